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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "bttree/map.hpp"
#include "test_access.hpp"

using bttree::Direction;
using bttree::Map;
using bttree::OpResult;
using bttree::Options;
using bttree::SyncPolicy;

namespace {

Options mutex_opts() {
    Options o;
    o.sync = SyncPolicy::Mutex;
    return o;
}

}  // namespace

TEST_CASE("merge policy threshold") {
    // b = floor(2 * (C + 2) / 3)
    CHECK(bttree::merge_threshold(32) == 22);
    CHECK(bttree::merge_output_count(22, 32) == 1);
    CHECK(bttree::merge_output_count(23, 32) == 2);
    CHECK(bttree::merge_threshold(6) == 5);
    CHECK(bttree::merge_output_count(4, 6) == 1);

    // Exhaustive against the exact rational inequality 3*total <= 2*(C+2).
    for (int c : {6, 8, 16, 32, 100}) {
        for (int total = 4; total <= 2 * c; ++total) {
            const int expected = 3 * total <= 2 * (c + 2) ? 1 : 2;
            CHECK(bttree::merge_output_count(total, c) == expected);
        }
    }
}

TEST_CASE("split first count is ceil(total/out)") {
    CHECK(bttree::split_first_count(32, 2) == 16);
    CHECK(bttree::split_first_count(25, 2) == 13);
    CHECK(bttree::split_first_count(22, 1) == 22);
    for (int total = 1; total <= 64; ++total) {
        for (int out = 1; out <= 2; ++out) {
            int by_subtraction = total / out + (total % out != 0);
            CHECK(bttree::split_first_count(total, out) == by_subtraction);
        }
    }
}

TEST_CASE("route_child follows the routing loop") {
    bttree::InternalNode<std::uint64_t, 8> node{};
    node.size = 3;
    node.keys[0] = 10;
    node.keys[1] = 20;
    CHECK(bttree::route_child(node, 5ull) == 0);
    CHECK(bttree::route_child(node, 10ull) == 1);  // separators route right
    CHECK(bttree::route_child(node, 15ull) == 1);
    CHECK(bttree::route_child(node, 20ull) == 2);
    CHECK(bttree::route_child(node, 25ull) == 2);  // capped at size - 1
}

TEST_CASE("route_child totality") {
    std::mt19937_64 rng(7);
    bttree::InternalNode<std::uint64_t, 32> node{};
    for (int iter = 0; iter < 500; ++iter) {
        const int size = 2 + int(rng() % 31);
        node.size = size;
        std::uint64_t k = rng() % 50;
        for (int i = 0; i + 1 < size; ++i) {
            k += 1 + rng() % 40;
            node.keys[i] = k;
        }
        for (int probe = 0; probe < 50; ++probe) {
            const int ci = bttree::route_child(node, rng() % (k + 10));
            CHECK(ci >= 0);
            CHECK(ci < size);
        }
    }
}

TEST_CASE("leaf_search scans every slot") {
    bttree::LeafNode<std::uint64_t, std::uint64_t, 8> leaf{};
    leaf.entries[1] = {4, 40};
    leaf.entries[2] = {2, 20};
    std::uint64_t out = 0;
    CHECK(bttree::leaf_search(leaf, 4ull, out) == OpResult::Success);
    CHECK(out == 40);
    CHECK(bttree::leaf_search(leaf, 9ull, out) == OpResult::Failure);

    bttree::LeafNode<std::uint64_t, std::uint64_t, 8> empty{};
    CHECK(bttree::leaf_search(empty, 1ull, out) == OpResult::Failure);
}

TEST_CASE("leaf_insert replaces, claims a free slot, or signals split") {
    using Leaf = bttree::LeafNode<std::uint64_t, std::uint64_t, 6>;
    Leaf leaf{};
    std::optional<std::uint64_t> prev;

    SUBCASE("empty leaf gains exactly one slot") {
        CHECK(bttree::leaf_insert(leaf, 5ull, 50ull, prev) == OpResult::Success);
        CHECK(!prev);
        CHECK(bttree::leaf_occupancy(leaf) == 1);
    }

    SUBCASE("match is replaced in place") {
        leaf.entries[3] = {5, 50};
        CHECK(bttree::leaf_insert(leaf, 5ull, 51ull, prev) == OpResult::Success);
        CHECK(prev == 50);
        CHECK(leaf.entries[3].value == 51);
        CHECK(bttree::leaf_occupancy(leaf) == 1);
    }

    SUBCASE("full leaf without a match signals split, untouched") {
        for (int i = 0; i < 6; ++i) {
            leaf.entries[i] = {std::uint64_t(i + 1), std::uint64_t(10 * (i + 1))};
        }
        Leaf before = leaf;
        CHECK(bttree::leaf_insert(leaf, 99ull, 1ull, prev) == OpResult::Split);
        CHECK(std::memcmp(&before, &leaf, sizeof leaf) == 0);
    }
}

TEST_CASE("leaf_remove merges near-empty non-root leaves before removing") {
    using Leaf = bttree::LeafNode<std::uint64_t, std::uint64_t, 6>;
    Leaf leaf{};
    std::uint64_t out = 0;

    SUBCASE("non-root at occupancy 2 signals merge, untouched") {
        leaf.entries[0] = {7, 70};
        leaf.entries[4] = {9, 90};
        Leaf before = leaf;
        CHECK(bttree::leaf_remove(leaf, 7ull, false, out) == OpResult::Merge);
        CHECK(std::memcmp(&before, &leaf, sizeof leaf) == 0);
    }

    SUBCASE("root leaf may drain to empty") {
        leaf.entries[2] = {7, 70};
        CHECK(bttree::leaf_remove(leaf, 7ull, true, out) == OpResult::Success);
        CHECK(out == 70);
        CHECK(bttree::leaf_occupancy(leaf) == 0);
    }

    SUBCASE("missing key fails") {
        for (int i = 0; i < 5; ++i) {
            leaf.entries[i] = {std::uint64_t(i + 1), 1ull};
        }
        CHECK(bttree::leaf_remove(leaf, 42ull, false, out) == OpResult::Failure);
    }
}

TEST_CASE("map basics") {
    Map<> map(mutex_opts());
    CHECK(!map.search(5));
    CHECK(!map.insert(7, 70));
    CHECK(map.search(7) == 70);
    CHECK(map.insert(7, 71) == 70);
    CHECK(map.search(7) == 71);
    CHECK(map.size() == 1);
    CHECK(!map.remove(9));
    map.insert(9, 90);
    CHECK(map.remove(9) == 90);
    CHECK(!map.search(9));
    CHECK(map.size() == 1);
}

TEST_CASE("key zero is rejected") {
    Map<> map(mutex_opts());
    CHECK_THROWS_AS(map.search(0), std::invalid_argument);
    CHECK_THROWS_AS(map.insert(0, 1), std::invalid_argument);
    CHECK_THROWS_AS(map.remove(0), std::invalid_argument);
    // adjacent accepts any probe key
    CHECK(!map.successor(0));
    CHECK(!map.predecessor(0));
}

TEST_CASE("33 inserts split the root leaf into 16 + 17") {
    Map<> map(mutex_opts());
    for (std::uint64_t k = 1; k <= 33; ++k) {
        map.insert(k * 10, k);
    }
    CHECK(map.height() == 1);
    const auto* root = Map<>::as_internal(map.root_node());
    REQUIRE(root->size == 2);
    const auto* left = Map<>::as_leaf(root->children[0]);
    const auto* right = Map<>::as_leaf(root->children[1]);
    const int l = bttree::leaf_occupancy(*left);
    const int r = bttree::leaf_occupancy(*right);
    CHECK(l + r == 33);
    CHECK(std::min(l, r) == 16);
    CHECK(std::max(l, r) == 17);
    // separator = 17th-smallest key at the moment of the split
    CHECK(root->keys[0] == 170);
}

TEST_CASE("remove from occupancy-2 leaf merges then retries") {
    using SmallMap = Map<std::uint64_t, std::uint64_t, 6, 6>;
    SmallMap map(mutex_opts());
    // parent(keys=[10]) over leaf{5,7} and leaf{12,15,18}
    bttree::MapTestAccess::build_two_leaf_tree(map, {5, 7}, {12, 15, 18}, 10);
    CHECK(map.height() == 1);
    CHECK(map.remove(5) == 50);
    // total 5 <= b(6)=5: merged to one leaf which became the root
    CHECK(map.height() == 0);
    CHECK(!map.search(5));
    CHECK(map.search(7) == 70);
    CHECK(map.search(12) == 120);
    CHECK(map.search(15) == 150);
    CHECK(map.search(18) == 180);
}

TEST_CASE("leaf merge redistributes when combined size exceeds b") {
    // leaves of 2 and 23 (total 25 > b=22) -> 13 and 12, separator = 14th smallest
    Map<> map(mutex_opts());
    std::vector<std::uint64_t> left = {1000, 2000};
    std::vector<std::uint64_t> right;
    for (int i = 1; i <= 23; ++i) {
        right.push_back(2000 + i * 10);
    }
    bttree::MapTestAccess::build_two_leaf_tree(map, left, right, 2001);
    CHECK(map.remove(1000) == 10000);
    CHECK(map.height() == 1);
    const auto* root = Map<>::as_internal(map.root_node());
    REQUIRE(root->size == 2);
    const int l = bttree::leaf_occupancy(*Map<>::as_leaf(root->children[0]));
    const int r = bttree::leaf_occupancy(*Map<>::as_leaf(root->children[1]));
    // removal retried after the rebalance: 24 keys remain
    CHECK(l + r == 24);
    // separator chosen during the merge of 25 keys: the 14th smallest, 2120
    CHECK(root->keys[0] == 2120);
    CHECK(l == 12);  // 13 went left, then the retried removal took 1000...
}

TEST_CASE("leaf merge to one when combined size is within b") {
    // leaves of 2 and 20 (total 22 <= b=22) -> one leaf of 22
    Map<> map(mutex_opts());
    std::vector<std::uint64_t> left = {10, 20};
    std::vector<std::uint64_t> right;
    for (int i = 1; i <= 20; ++i) {
        right.push_back(100 + i);
    }
    bttree::MapTestAccess::build_two_leaf_tree(map, left, right, 100);
    CHECK(map.remove(10) == 100);
    // merged to a single root leaf, then the retried removal succeeded
    CHECK(map.height() == 0);
    CHECK(map.size() == 21);
}

TEST_CASE("successor and predecessor") {
    Map<> map(mutex_opts());
    map.insert(3, 30);
    map.insert(8, 80);
    CHECK(map.successor(3) == std::pair<std::uint64_t, std::uint64_t>{8, 80});
    CHECK(!map.predecessor(3));
    CHECK(map.predecessor(8) == std::pair<std::uint64_t, std::uint64_t>{3, 30});
    CHECK(!map.successor(8));
    CHECK(map.successor(0) == std::pair<std::uint64_t, std::uint64_t>{3, 30});

    SUBCASE("matches a sorted oracle across leaf boundaries") {
        std::mt19937_64 rng(42);
        std::map<std::uint64_t, std::uint64_t> oracle;
        for (int i = 0; i < 1000; ++i) {
            const std::uint64_t k = 1 + rng() % 5000;
            map.insert(k, k * 2);
            oracle[k] = k * 2;
        }
        for (int i = 0; i < 100; ++i) {
            const std::uint64_t probe = rng() % 5100;
            auto up = oracle.upper_bound(probe);
            auto got = map.successor(probe);
            if (up == oracle.end()) {
                CHECK(!got);
            } else {
                CHECK(got == std::pair{up->first, up->second});
            }
            auto low = oracle.lower_bound(probe);
            auto gotp = map.predecessor(probe);
            if (low == oracle.begin()) {
                CHECK(!gotp);
            } else {
                --low;
                CHECK(gotp == std::pair{low->first, low->second});
            }
        }
    }
}

TEST_CASE("content matches std::map under random churn") {
    for (auto policy : {SyncPolicy::Mutex, SyncPolicy::Seqlock, SyncPolicy::Htm}) {
        Options o;
        o.sync = policy;
        Map<std::uint64_t, std::uint64_t, 6, 6> small(o);
        Map<> wide(o);
        std::map<std::uint64_t, std::uint64_t> oracle;
        std::mt19937_64 rng(99);
        for (int i = 0; i < 10000; ++i) {
            const std::uint64_t k = 1 + rng() % 500;
            if (rng() % 2 == 0) {
                const std::uint64_t v = rng();
                auto it = oracle.find(k);
                std::optional<std::uint64_t> expect =
                    it == oracle.end() ? std::nullopt : std::optional(it->second);
                CHECK(small.insert(k, v) == expect);
                CHECK(wide.insert(k, v) == expect);
                oracle[k] = v;
            } else {
                auto it = oracle.find(k);
                std::optional<std::uint64_t> expect =
                    it == oracle.end() ? std::nullopt : std::optional(it->second);
                CHECK(small.remove(k) == expect);
                CHECK(wide.remove(k) == expect);
                if (it != oracle.end()) {
                    oracle.erase(it);
                }
            }
        }
        for (std::uint64_t k = 1; k <= 500; ++k) {
            auto it = oracle.find(k);
            std::optional<std::uint64_t> expect =
                it == oracle.end() ? std::nullopt : std::optional(it->second);
            CHECK(small.search(k) == expect);
            CHECK(wide.search(k) == expect);
        }
        CHECK(small.size() == oracle.size());
        CHECK(wide.size() == oracle.size());
    }
}

TEST_CASE("find-leaf context at height 0 and routing at height 1") {
    using M = Map<std::uint64_t, std::uint64_t, 6, 6>;
    M map(mutex_opts());
    auto ctx0 = bttree::MapTestAccess::find_leaf(map, 1);
    CHECK(ctx0.parent == nullptr);
    CHECK(ctx0.node == map.root_node());

    bttree::MapTestAccess::build_two_leaf_tree(map, {5, 7}, {12, 15, 18}, 10);
    auto ctx = bttree::MapTestAccess::find_leaf(map, 10);
    REQUIRE(ctx.parent != nullptr);
    CHECK(ctx.child_index == 1);  // separator keys route right
    auto ctx_left = bttree::MapTestAccess::find_leaf(map, 9);
    CHECK(ctx_left.child_index == 0);
}

TEST_CASE("descent merges a size-2 internal node and restarts") {
    using M = Map<std::uint64_t, std::uint64_t, 6, 6>;
    M map(mutex_opts());
    // height 2: root over [size-2 internal, size-3 internal]
    bttree::MapTestAccess::build_height2_with_small_internal(map);
    auto violations_before = bttree::MapTestAccess::internal_sizes(map);
    REQUIRE(violations_before.front() == 2);
    CHECK(map.search(1) == 10);  // reads do not rebalance
    auto after_read = bttree::MapTestAccess::internal_sizes(map);
    CHECK(after_read.front() == 2);
    map.insert(2, 20);  // write path triggers the proactive merge
    auto after = bttree::MapTestAccess::internal_sizes(map);
    for (std::size_t i = 1; i < after.size(); ++i) {
        CHECK(after[i] >= 2);
    }
    CHECK(map.search(1) == 10);
    CHECK(map.search(2) == 20);
}

TEST_CASE("splitting a full internal root raises the height") {
    using M = Map<std::uint64_t, std::uint64_t, 6, 6>;
    M map(mutex_opts());
    bttree::MapTestAccess::build_full_root(map);
    CHECK(map.height() == 1);
    auto keys_before = bttree::MapTestAccess::all_keys(map);
    map.insert(keys_before.front() + 1, 1);  // any write descends and splits the root
    CHECK(map.height() == 2);
    const auto* root = M::as_internal(map.root_node());
    CHECK(root->size == 2);
    CHECK(M::as_internal(root->children[0])->size == 3);
    CHECK(M::as_internal(root->children[1])->size == 3);
    auto keys_after = bttree::MapTestAccess::all_keys(map);
    for (auto k : keys_before) {
        CHECK(std::count(keys_after.begin(), keys_after.end(), k) == 1);
    }
}

TEST_CASE("merge durability bounds hold arithmetically") {
    // A merged-to-one node needs >= C-b inserts to fill and >= b-2 removals
    // to reach occupancy 2; a split output needs >= C - ceil(total/2) inserts.
    for (int c : {6, 8, 16, 32}) {
        const int b = bttree::merge_threshold(c);
        for (int total = 4; total <= b; ++total) {
            CHECK(c - total >= c - b);
            CHECK(total - 2 >= 0);
        }
        for (int total = b + 1; total <= 2 * c && total <= c + 2; ++total) {
            const int s = bttree::split_first_count(total, 2);
            CHECK(c - s >= c - bttree::split_first_count(c + 2, 2));
        }
    }
}
