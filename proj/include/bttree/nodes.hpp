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

#include <cassert>
#include <cstdint>
#include <cstring>
#include <optional>
#include <type_traits>

namespace bttree {

/// Key 0 marks an empty slot; user keys must be nonzero.
inline constexpr std::uint64_t kEmptyKey = 0;

/// A key-value pair. Leaf slots hold these; a slot with key 0 is unused.
template <class Key, class Value>
struct KeyVal {
    Key key;
    Value value;
};

/// Leaf node: a fixed array of unordered key-value slots, one cache line
/// aligned. Occupancy is the number of slots with a nonzero key.
template <class Key, class Value, int Capacity>
struct alignas(64) LeafNode {
    static_assert(Capacity >= 6, "leaf capacity must be at least 6");
    static constexpr int capacity = Capacity;
    using key_type = Key;
    using value_type = Value;

    KeyVal<Key, Value> entries[Capacity];
};

/// Internal node: child pointers, a child count, and size-1 routing keys.
/// keys[i] separates child i (keys < keys[i]) from child i+1 (keys >= keys[i]).
/// Internal nodes are immutable once linked into the tree; balancing always
/// builds replacements.
template <class Key, int Fanout>
struct alignas(64) InternalNode {
    static_assert(Fanout >= 6, "internal fanout must be at least 6");
    static constexpr int fanout = Fanout;
    using key_type = Key;

    void* children[Fanout];
    std::int32_t size;
    Key keys[Fanout - 1];
};

/// Outcome of a leaf-level operation. Merge and Split are signals consumed by
/// the operation retry loop; they never escape to callers of the map API.
enum class OpResult : std::uint8_t {
    Success,
    Failure,
    Merge,
    Split,
};

namespace detail {

/// Single load the compiler may not tear or invent; used on fields that
/// optimistic readers race with writers on.
template <class T>
inline T relaxed_load(const T& location) {
    static_assert(std::is_trivially_copyable_v<T>);
    if constexpr ((std::is_integral_v<T> || std::is_pointer_v<T>) && sizeof(T) <= sizeof(void*)) {
        return __atomic_load_n(&location, __ATOMIC_RELAXED);
    } else {
        T out;
        std::memcpy(&out, &location, sizeof(T));
        return out;
    }
}

template <class T>
inline void relaxed_store(T& location, T v) {
    static_assert(std::is_integral_v<T> || std::is_pointer_v<T>);
    __atomic_store_n(&location, v, __ATOMIC_RELAXED);
}

}  // namespace detail

/// Merge threshold b: merging two nodes yields one node iff their combined
/// size is at most b, else two. b = floor(2 * (capacity + 2) / 3).
constexpr int merge_threshold(int capacity) {
    return 2 * (capacity + 2) / 3;
}

/// Number of output nodes for a merge of two nodes of the given combined size.
constexpr int merge_output_count(int combined_size, int capacity) {
    return combined_size <= merge_threshold(capacity) ? 1 : 2;
}

/// Elements routed to the first output node: ceil(total / out). The second
/// output, when present, receives the remaining floor(total / out).
constexpr int split_first_count(int total, int out) {
    return (total + out - 1) / out;
}

/// Index of the child that may hold k: the smallest ci with k < keys[ci],
/// capped at size - 1. Separator keys route right (keys[ci] <= k moves on).
template <class Internal>
inline int route_child(const Internal& node, typename Internal::key_type k) {
    assert(node.size >= 2);
    int ci = 0;
    while (node.keys[ci] <= k && ++ci != node.size - 1) {
    }
    return ci;
}

template <class Leaf>
inline int leaf_occupancy(const Leaf& leaf) {
    int n = 0;
    for (int i = 0; i < Leaf::capacity; ++i) {
        n += leaf.entries[i].key != 0;
    }
    return n;
}

/// Scan every slot for k. Success + value on a match, Failure otherwise.
/// The loop visits all slots unconditionally so the compiler can unroll it.
template <class Leaf>
inline OpResult leaf_search(const Leaf& leaf, typename Leaf::key_type k,
                            typename Leaf::value_type& out) {
    int hit = -1;
    for (int i = 0; i < Leaf::capacity; ++i) {
        if (leaf.entries[i].key == k) {
            hit = i;
        }
    }
    if (hit >= 0) {
        out = leaf.entries[hit].value;
        return OpResult::Success;
    }
    return OpResult::Failure;
}

/// Upsert into a leaf. Overwrites a matching slot, else claims an empty slot,
/// else signals Split with the leaf untouched. `previous` is set iff k was
/// already present.
template <class Leaf>
inline OpResult leaf_insert(Leaf& leaf, typename Leaf::key_type k, typename Leaf::value_type v,
                            std::optional<typename Leaf::value_type>& previous) {
    int hit = -1;
    int spare = -1;
    for (int i = 0; i < Leaf::capacity; ++i) {
        const auto ek = leaf.entries[i].key;
        if (ek == 0) {
            spare = i;
        }
        if (ek == k) {
            hit = i;
        }
    }
    previous.reset();
    if (hit >= 0) {
        previous = leaf.entries[hit].value;
        leaf.entries[hit] = {k, v};
        return OpResult::Success;
    }
    if (spare >= 0) {
        leaf.entries[spare] = {k, v};
        return OpResult::Success;
    }
    return OpResult::Split;
}

/// Remove k from a leaf. A non-root leaf at occupancy <= 2 signals Merge
/// before anything is removed, so non-root occupancy never drops below 2.
template <class Leaf>
inline OpResult leaf_remove(Leaf& leaf, typename Leaf::key_type k, bool is_root,
                            typename Leaf::value_type& out) {
    int hit = -1;
    int n = 0;
    for (int i = 0; i < Leaf::capacity; ++i) {
        const auto ek = leaf.entries[i].key;
        n += ek != 0;
        if (ek == k) {
            hit = i;
        }
    }
    if (n <= 2 && !is_root) {
        return OpResult::Merge;
    }
    if (hit >= 0) {
        out = leaf.entries[hit].value;
        leaf.entries[hit].key = 0;
        return OpResult::Success;
    }
    return OpResult::Failure;
}

}  // namespace bttree
