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

#include <atomic>
#include <cstdint>
#include <random>
#include <thread>
#include <vector>

#include "bttree/arena.hpp"
#include "bttree/map.hpp"
#include "test_access.hpp"

using Leaf = bttree::LeafNode<std::uint64_t, std::uint64_t, 6>;
using Internal = bttree::InternalNode<std::uint64_t, 6>;
using Pool = bttree::NodePool<Leaf, Internal>;

TEST_CASE("ensure_capacity preallocates both kinds") {
    Pool pool;
    pool.ensure_capacity(6);
    CHECK(pool.allocated_nodes() == 12);
    CHECK(pool.free_nodes() == 12);

    SUBCASE("no allocation when capacity is already there") {
        pool.ensure_capacity(6);
        CHECK(pool.allocated_nodes() == 12);
    }

    SUBCASE("tops back up after consumption") {
        (void)pool.take_leaf();
        (void)pool.take_leaf();
        (void)pool.take_leaf();
        pool.ensure_capacity(6);
        CHECK(pool.free_nodes() == 12);
    }
}

TEST_CASE("take returns zeroed, 64-byte aligned nodes and never allocates") {
    Pool pool;
    pool.ensure_capacity(6);
    const auto allocated = pool.allocated_nodes();
    std::vector<Leaf*> taken;
    for (int i = 0; i < 6; ++i) {
        Leaf* leaf = pool.take_leaf();
        CHECK(reinterpret_cast<std::uintptr_t>(leaf) % 64 == 0);
        for (int j = 0; j < Leaf::capacity; ++j) {
            CHECK(leaf->entries[j].key == 0);
        }
        taken.push_back(leaf);
    }
    CHECK(pool.allocated_nodes() == allocated);
    CHECK_THROWS_AS(pool.take_leaf(), std::logic_error);

    Internal* in = pool.take_internal();
    CHECK(reinterpret_cast<std::uintptr_t>(in) % 64 == 0);
    CHECK(in->size == 0);
}

TEST_CASE("a retired node is withheld while an older-epoch reader is announced") {
    Pool pool;
    pool.ensure_capacity(1);
    Leaf* node = pool.take_leaf();
    pool.retire(node);
    {
        Pool::EpochGuard reader(pool);  // announced at the retirement epoch
        pool.advance_epoch();
        pool.ensure_capacity(1);  // must allocate fresh, not reuse
        Leaf* other = pool.take_leaf();
        CHECK(other != node);
        CHECK(pool.retired_pending() == 1);
    }
    // Reader gone: the node becomes reusable.
    pool.ensure_capacity(1);
    Leaf* again = pool.take_leaf();
    CHECK(again == node);
    CHECK(pool.retired_pending() == 0);
}

TEST_CASE("reclamation without readers reuses nodes after the epoch advances") {
    Pool pool;
    pool.ensure_capacity(1);
    const auto allocated = pool.allocated_nodes();
    Leaf* node = pool.take_leaf();
    pool.retire(node);
    pool.advance_epoch();
    pool.ensure_capacity(1);
    CHECK(pool.allocated_nodes() == allocated);  // reclaimed, not allocated
    CHECK(pool.take_leaf() == node);
}

TEST_CASE("canary poisoning marks reclaimed nodes until they are re-dispensed") {
    Pool pool(/*canary=*/true);
    pool.ensure_capacity(1);
    Leaf* node = pool.take_leaf();
    node->entries[0] = {42, 420};
    pool.retire(node);
    pool.advance_epoch();
    pool.ensure_capacity(1);  // reclaims and poisons
    CHECK(node->entries[0].key == bttree::canary_key_pattern<std::uint64_t>());
    Leaf* again = pool.take_leaf();
    REQUIRE(again == node);
    CHECK(again->entries[0].key == 0);  // zeroed on dispense
}

TEST_CASE("double retire trips the debug check") {
    Pool pool(/*canary=*/true);
    pool.ensure_capacity(1);
    Leaf* node = pool.take_leaf();
    pool.retire(node);
    CHECK_THROWS_AS(pool.retire(node), std::logic_error);
}

TEST_CASE("pool conservation: allocated = free + retired + in tree") {
    using M = bttree::Map<std::uint64_t, std::uint64_t, 6, 6>;
    bttree::Options o;
    o.sync = bttree::SyncPolicy::Mutex;
    M map(o);
    std::mt19937_64 rng(3);
    for (int i = 0; i < 20000; ++i) {
        const std::uint64_t k = 1 + rng() % 200;
        if (rng() % 2) {
            map.insert(k, k);
        } else {
            map.remove(k);
        }
    }
    auto& pool = map.pool();
    const auto in_tree = bttree::MapTestAccess::nodes_in_tree(map);
    CHECK(pool.allocated_nodes() == pool.free_nodes() + pool.retired_pending() + in_tree);
}

TEST_CASE("no use-after-reclaim under optimistic readers with canary") {
    using M = bttree::Map<std::uint64_t, std::uint64_t, 6, 6>;
    bttree::Options o;
    o.sync = bttree::SyncPolicy::Seqlock;
    o.canary = true;
    M map(o);
    for (std::uint64_t k = 1; k <= 64; ++k) {
        map.insert(k, k);
    }
    std::atomic<bool> stop{false};
    std::thread writer([&] {
        std::mt19937_64 rng(11);
        for (int i = 0; i < 200000; ++i) {
            const std::uint64_t k = 1 + rng() % 128;
            if (rng() % 2) {
                map.insert(k, k);
            } else {
                map.remove(k);
            }
        }
        stop.store(true);
    });
    std::vector<std::thread> readers;
    for (int t = 0; t < 2; ++t) {
        readers.emplace_back([&, t] {
            std::mt19937_64 rng(100 + t);
            std::uint64_t sink = 0;
            while (!stop.load()) {
                auto v = map.search(1 + rng() % 128);
                sink += v.value_or(0);
                auto s = map.successor(rng() % 128);
                sink += s ? s->first : 0;
            }
            volatile std::uint64_t keep = sink;
            (void)keep;
        });
    }
    writer.join();
    for (auto& r : readers) {
        r.join();
    }
    CHECK(map.canary_detections() == 0);
}
