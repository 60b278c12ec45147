/*
 * Copyright 2026 The bttree Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bttree/bench.hpp"

int main(int argc, char** argv) {
    CLI::App app{
        "bench - throughput harness: threads repeatedly operate on one shared map,\n"
        "prefilled to its steady-state size, for a fixed duration or op budget."};

    std::string mix = "update";
    std::string impl = "bttree";
    std::string sync = "mutex";
    std::uint64_t k = 10000;
    int threads = 1;
    double duration = 5.0;
    std::uint64_t seed = 1;
    std::uint64_t ops = 0;
    std::string csv_path;

    app.add_option("--mix", mix, "workload mix: update, mixed, constant")
        ->check(CLI::IsMember({"update", "mixed", "constant"}));
    app.add_option("--k", k, "key range upper bound (keys drawn from [1, k])");
    app.add_option("--threads", threads, "worker threads")->check(CLI::Range(1, 64));
    app.add_option("--duration", duration, "timed-mode duration in seconds");
    app.add_option("--seed", seed, "PRNG seed");
    app.add_option("--impl", impl, "map under test: bttree, baseline_bst, baseline_hash")
        ->check(CLI::IsMember({"bttree", "baseline_bst", "baseline_hash"}));
    app.add_option("--sync", sync, "sync policy: mutex, seqlock, htm")
        ->check(CLI::IsMember({"mutex", "seqlock", "htm"}));
    app.add_option("--ops", ops, "deterministic mode: total op budget instead of a timer");
    app.add_option("--csv", csv_path, "also write the CSV to this path");

    CLI11_PARSE(app, argc, argv);

    bttree::bench::WorkloadSpec spec;
    spec.mix = bttree::bench::mix_from_string(mix);
    spec.key_range = k;
    spec.threads = threads;
    spec.duration_s = duration;
    spec.seed = seed;
    spec.op_budget = ops;
    spec.impl = bttree::bench::impl_from_string(impl);
    spec.sync = bttree::sync_policy_from_string(sync);

    try {
        const auto result = bttree::bench::run_workload(spec);
        const auto csv = bttree::bench::emit_csv({result});
        std::cout << csv;
        if (!csv_path.empty()) {
            std::ofstream out(csv_path);
            out << csv;
        }
        if (spec.op_budget != 0) {
            std::fprintf(stderr, "final_size=%zu content_hash=%016llx\n", result.final_size,
                         static_cast<unsigned long long>(result.content_hash));
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "bench: %s\n", e.what());
        return 1;
    }
    return 0;
}
