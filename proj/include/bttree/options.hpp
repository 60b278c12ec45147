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

#include <cstdlib>
#include <stdexcept>
#include <string>
#include <string_view>

namespace bttree {

/// How critical sections are realized.
///  - Mutex: plain test-and-set spinlock for readers and writers.
///  - Seqlock: writers lock and bump a sequence counter; readers run
///    lock-free with end validation and fall back to the lock after
///    retry_limit failed validations.
///  - Htm: hardware transactions with lock subscription when the CPU
///    supports them, pessimistic lock otherwise.
enum class SyncPolicy : std::uint8_t {
    Mutex,
    Seqlock,
    Htm,
};

inline const char* to_string(SyncPolicy p) {
    switch (p) {
        case SyncPolicy::Mutex: return "mutex";
        case SyncPolicy::Seqlock: return "seqlock";
        case SyncPolicy::Htm: return "htm";
    }
    return "?";
}

inline SyncPolicy sync_policy_from_string(std::string_view s) {
    if (s == "mutex") return SyncPolicy::Mutex;
    if (s == "seqlock") return SyncPolicy::Seqlock;
    if (s == "htm") return SyncPolicy::Htm;
    throw std::invalid_argument("unknown sync policy: " + std::string(s));
}

/// Runtime map configuration. Node capacities are template parameters of the
/// map; everything else is set here.
struct Options {
    SyncPolicy sync = SyncPolicy::Seqlock;
    /// Speculative tries before an operation falls back to the lock.
    int retry_limit = 2;
    /// Nodes of each kind preallocated per operation attempt.
    int prealloc_count = 6;
    /// Poison reclaimed nodes and count sightings by readers (debug aid).
    bool canary = false;
};

/// BTTREE_CANARY=1 in the environment forces canary poisoning on.
inline bool canary_env_enabled() {
    const char* v = std::getenv("BTTREE_CANARY");
    return v != nullptr && v[0] != '\0' && !(v[0] == '0' && v[1] == '\0');
}

}  // namespace bttree
