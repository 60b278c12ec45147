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
#include <filesystem>
#include <fstream>
#include <string>

#include <CLI11.hpp>

#include "bttree/differential.hpp"
#include "bttree/map.hpp"

namespace {

std::filesystem::path trace_path(const char* argv0) {
    std::filesystem::path self(argv0);
    auto dir = self.parent_path();
    if (dir.empty()) {
        dir = ".";
    }
    return dir / "conform_failure_trace.txt";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "conform - differential and concurrent stress testing against a reference\n"
        "oracle, with structural invariant checking. Nonzero exit on any violation."};

    std::uint64_t seed = 1;
    std::uint64_t ops = 1000000;
    std::uint64_t range = 500;
    int threads = 1;
    std::string sync = "mutex";
    bool canary = false;

    app.add_option("--seed", seed, "PRNG seed");
    app.add_option("--ops", ops, "operation count");
    app.add_option("--range", range, "key range upper bound");
    app.add_option("--threads", threads, "worker threads (>= 2 runs the concurrent stress)")
        ->check(CLI::Range(1, 64));
    app.add_option("--sync", sync, "sync policy: mutex, seqlock, htm")
        ->check(CLI::IsMember({"mutex", "seqlock", "htm"}));
    app.add_flag("--canary", canary, "poison reclaimed nodes and count reader sightings");

    CLI11_PARSE(app, argc, argv);

    bttree::Options opts;
    opts.sync = bttree::sync_policy_from_string(sync);
    opts.canary = canary;

    using MapT = bttree::Map<std::uint64_t, std::uint64_t, 32, 32>;
    try {
        if (threads <= 1) {
            const auto verdict =
                bttree::conformance::differential_run<MapT>(seed, ops, range, opts);
            if (!verdict.pass) {
                const auto path = trace_path(argv[0]);
                std::ofstream out(path);
                out << bttree::conformance::trace_to_text(verdict.trace);
                std::fprintf(stderr, "conform: FAIL: %s\n", verdict.message.c_str());
                std::fprintf(stderr, "conform: reproducing trace (%zu ops) written to %s\n",
                             verdict.trace.size(), path.string().c_str());
                return 1;
            }
            std::printf("conform: PASS differential seed=%llu ops=%llu range=%llu sync=%s\n",
                        static_cast<unsigned long long>(seed),
                        static_cast<unsigned long long>(ops),
                        static_cast<unsigned long long>(range), sync.c_str());
        } else {
            const auto result =
                bttree::conformance::concurrent_stress<MapT>(threads, ops, range, opts);
            if (!result.pass) {
                std::fprintf(stderr, "conform: FAIL: %s\n", result.message.c_str());
                return 1;
            }
            if (canary && result.canary_detections != 0) {
                std::fprintf(stderr, "conform: FAIL: %llu canary sightings (use after reclaim)\n",
                             static_cast<unsigned long long>(result.canary_detections));
                return 1;
            }
            std::printf("conform: PASS stress threads=%d ops=%llu range=%llu sync=%s canary=%d\n",
                        threads, static_cast<unsigned long long>(ops),
                        static_cast<unsigned long long>(range), sync.c_str(), int(canary));
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "conform: error: %s\n", e.what());
        return 2;
    }
    return 0;
}
