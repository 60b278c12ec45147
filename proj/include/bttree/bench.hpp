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

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "bttree/options.hpp"

namespace bttree::bench {

/// Operation distributions: Update is 50% insert / 50% remove, Mixed is
/// 70% search / 20% insert / 10% remove, Constant is 100% search.
enum class Mix : std::uint8_t {
    Update,
    Mixed,
    Constant,
};

enum class MapImpl : std::uint8_t {
    BtTree,
    BaselineBst,
    BaselineHash,
};

inline const char* to_string(Mix m) {
    switch (m) {
        case Mix::Update: return "update";
        case Mix::Mixed: return "mixed";
        case Mix::Constant: return "constant";
    }
    return "?";
}

inline Mix mix_from_string(std::string_view s) {
    if (s == "update") return Mix::Update;
    if (s == "mixed") return Mix::Mixed;
    if (s == "constant") return Mix::Constant;
    throw std::invalid_argument("unknown mix: " + std::string(s));
}

inline const char* to_string(MapImpl i) {
    switch (i) {
        case MapImpl::BtTree: return "bttree";
        case MapImpl::BaselineBst: return "baseline_bst";
        case MapImpl::BaselineHash: return "baseline_hash";
    }
    return "?";
}

inline MapImpl impl_from_string(std::string_view s) {
    if (s == "bttree") return MapImpl::BtTree;
    if (s == "baseline_bst") return MapImpl::BaselineBst;
    if (s == "baseline_hash") return MapImpl::BaselineHash;
    throw std::invalid_argument("unknown impl: " + std::string(s));
}

/// Steady-state prefill size for a mix over keys [1, k]: Update k/2,
/// Mixed floor(2k/3), Constant k.
inline std::uint64_t prefill_size(Mix mix, std::uint64_t k) {
    switch (mix) {
        case Mix::Update: return k / 2;
        case Mix::Mixed: return 2 * k / 3;
        case Mix::Constant: return k;
    }
    return 0;
}

struct WorkloadSpec {
    Mix mix = Mix::Update;
    std::uint64_t key_range = 10000;  // keys drawn uniformly from [1, key_range]
    int threads = 1;
    double duration_s = 5.0;
    std::uint64_t op_budget = 0;  // nonzero: deterministic mode, total ops instead of a timer
    std::uint64_t seed = 1;
    MapImpl impl = MapImpl::BtTree;
    SyncPolicy sync = SyncPolicy::Mutex;
};

struct BenchResult {
    WorkloadSpec spec;
    std::uint64_t prefill = 0;
    std::vector<std::uint64_t> per_thread_ops;
    std::uint64_t total_ops = 0;
    double elapsed_s = 0.0;
    std::size_t final_size = 0;
    std::uint64_t content_hash = 0;  // digest of final contents (deterministic mode)

    double throughput() const { return elapsed_s > 0 ? double(total_ops) / elapsed_s : 0.0; }
};

/// Prefill one shared map to its steady-state size, release the worker
/// threads, and count completed operations for duration_s seconds (or until
/// the op budget runs out in deterministic mode).
BenchResult run_workload(const WorkloadSpec& spec);

/// Header line plus one row per result; plain decimal, round-trippable.
std::string emit_csv(const std::vector<BenchResult>& results);

}  // namespace bttree::bench
