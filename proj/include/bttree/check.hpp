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

#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "bttree/map.hpp"

namespace bttree::conformance {

/// Structural validator. Walks the whole tree (no operation may be in
/// flight) and reports every violated invariant:
///   - uniform depth: all leaves at depth == height
///   - internal sizes in [2, fanout], routing keys strictly increasing
///   - every key inside the routing range established by its ancestors
///   - non-root leaf occupancy >= 2
///   - no key stored twice
///   - the maintained size counter matches the stored key count
/// Returns an empty vector iff the tree is well-formed.
template <class M>
std::vector<std::string> check_tree(const M& map) {
    using Key = typename M::key_type;
    struct Walker {
        const M& map;
        std::vector<std::string> violations;
        std::unordered_set<Key> seen;
        std::size_t key_count = 0;

        void fail(const char* category, const std::string& detail) {
            violations.push_back(std::string(category) + ": " + detail);
        }

        void walk(const void* node, int level, std::optional<Key> lo, std::optional<Key> hi,
                  bool is_root) {
            if (node == nullptr) {
                fail("structure", "null node reference");
                return;
            }
            if (level == 0) {
                const auto* leaf = M::as_leaf(node);
                int occupancy = 0;
                for (int i = 0; i < M::leaf_capacity; ++i) {
                    const Key k = leaf->entries[i].key;
                    if (k == 0) {
                        continue;
                    }
                    ++occupancy;
                    ++key_count;
                    if (lo && k < *lo) {
                        fail("range", "leaf key " + std::to_string(k) + " below lower bound " +
                                          std::to_string(*lo));
                    }
                    if (hi && k >= *hi) {
                        fail("range", "leaf key " + std::to_string(k) + " at or above upper bound " +
                                          std::to_string(*hi));
                    }
                    if (!seen.insert(k).second) {
                        fail("uniqueness", "key " + std::to_string(k) + " stored more than once");
                    }
                }
                if (!is_root && occupancy < 2) {
                    fail("occupancy", "non-root leaf holds " + std::to_string(occupancy) +
                                          " entries, minimum is 2");
                }
                return;
            }
            const auto* in = M::as_internal(node);
            const int size = in->size;
            if (size < 2 || size > M::internal_fanout) {
                fail("internal-size", "internal node size " + std::to_string(size) +
                                          " outside [2, " + std::to_string(M::internal_fanout) + "]");
                return;
            }
            for (int i = 0; i + 1 < size - 1; ++i) {
                if (!(in->keys[i] < in->keys[i + 1])) {
                    fail("key-order", "routing keys not strictly increasing at index " +
                                          std::to_string(i));
                }
            }
            for (int i = 0; i + 1 < size; ++i) {
                const Key k = in->keys[i];
                if (lo && k < *lo) {
                    fail("range", "routing key " + std::to_string(k) + " below lower bound " +
                                      std::to_string(*lo));
                }
                if (hi && k > *hi) {
                    fail("range", "routing key " + std::to_string(k) + " above upper bound " +
                                      std::to_string(*hi));
                }
            }
            for (int i = 0; i < size; ++i) {
                std::optional<Key> child_lo = i > 0 ? std::optional<Key>(in->keys[i - 1]) : lo;
                std::optional<Key> child_hi = i < size - 1 ? std::optional<Key>(in->keys[i]) : hi;
                walk(in->children[i], level - 1, child_lo, child_hi, false);
            }
        }
    };

    Walker w{map, {}, {}, 0};
    w.walk(map.root_node(), map.height(), std::nullopt, std::nullopt, map.height() == 0);
    if (w.key_count != map.size()) {
        w.fail("size", "size counter " + std::to_string(map.size()) + " but " +
                           std::to_string(w.key_count) + " keys stored");
    }
    return w.violations;
}

}  // namespace bttree::conformance
