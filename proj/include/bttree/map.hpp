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

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>

#include "bttree/arena.hpp"
#include "bttree/nodes.hpp"
#include "bttree/options.hpp"
#include "bttree/sync.hpp"

namespace bttree {

enum class Direction : std::uint8_t {
    Successor,
    Predecessor,
};

/// Concurrent ordered map backed by an external multiway search tree with
/// unordered fixed-capacity leaves and weak balancing invariants.
///
/// All key-value pairs live in leaves; internal nodes carry routing keys
/// only. Leaves split only when full and merge when a removal finds them at
/// occupancy 2; internal nodes split at full fanout and merge at size 2,
/// proactively during descent. Every operation runs as a critical section of
/// the configured sync policy; insert and remove follow the classic
/// find-leaf / operate / rebalance-and-retry template, while search and the
/// ordered neighbor queries are pure readers.
///
/// Key 0 is reserved as the empty-slot sentinel and rejected by the API.
template <class Key = std::uint64_t, class Value = Key, int LeafCap = 32, int Fanout = 32>
class Map {
    static_assert(std::is_integral_v<Key> && std::is_unsigned_v<Key>,
                  "keys must be unsigned integers (0 is the empty-slot sentinel)");
    static_assert(std::is_trivially_copyable_v<Value>, "values are copied by value");

public:
    using key_type = Key;
    using mapped_type = Value;
    using Leaf = LeafNode<Key, Value, LeafCap>;
    using Internal = InternalNode<Key, Fanout>;
    using Pool = NodePool<Leaf, Internal>;

    static constexpr int leaf_capacity = LeafCap;
    static constexpr int internal_fanout = Fanout;

    explicit Map(Options opts = {})
        : opts_(sanitize(opts)), lock_(opts_.sync, opts_.retry_limit), pool_(opts_.canary) {
        pool_.ensure_capacity(opts_.prealloc_count);
        const auto mode = lock_.enter_exclusive();
        root_ = pool_.take_leaf();
        height_ = 0;
        publish_root();
        lock_.exit_exclusive(mode);
        pool_.advance_epoch();
    }

    Map(const Map&) = delete;
    Map& operator=(const Map&) = delete;

    const Options& options() const { return opts_; }

    /// Exact count maintained under the lock; an estimate while writers run.
    std::size_t size() const { return detail::relaxed_load(size_); }

    std::optional<Value> search(Key k) const {
        require_valid_key(k);
        std::optional<Value> result;
        lock_.run_read([&](typename ElidableLock::Mode) -> bool {
            typename Pool::EpochGuard guard(pool_);
            result.reset();
            Key lower;
            Key upper;
            bool has_upper;
            const Leaf* leaf = descend_readonly(k, lower, upper, has_upper);
            if (leaf == nullptr) {
                return false;
            }
            Value found{};
            bool hit = false;
            for (int i = 0; i < LeafCap; ++i) {
                if (detail::relaxed_load(leaf->entries[i].key) == k) {
                    found = detail::relaxed_load(leaf->entries[i].value);
                    hit = true;
                }
            }
            if (hit) {
                result = found;
            }
            return true;
        });
        return result;
    }

    /// Upsert. Returns the previous value when k was already present.
    std::optional<Value> insert(Key k, Value v) {
        require_valid_key(k);
        std::optional<Value> previous;
        run_update([&]() -> bool {
            DescentContext ctx;
            if (descend_to_leaf(k, ctx)) {
                return false;  // rebalanced; retry from the top
            }
            Leaf* leaf = as_leaf(ctx.node);
            std::optional<Value> prior;
            switch (leaf_insert(*leaf, k, v, prior)) {
                case OpResult::Success:
                    previous = prior;
                    if (!prior) {
                        ++size_;
                    }
                    return true;
                case OpResult::Split:
                    split_leaf(ctx);
                    return false;
                default:
                    assert(false);
                    return true;
            }
        });
        return previous;
    }

    /// Returns the removed value when k was present.
    std::optional<Value> remove(Key k) {
        require_valid_key(k);
        std::optional<Value> removed;
        run_update([&]() -> bool {
            DescentContext ctx;
            if (descend_to_leaf(k, ctx)) {
                return false;
            }
            Leaf* leaf = as_leaf(ctx.node);
            Value out{};
            switch (leaf_remove(*leaf, k, ctx.parent == nullptr, out)) {
                case OpResult::Success:
                    removed = out;
                    --size_;
                    return true;
                case OpResult::Failure:
                    removed.reset();
                    return true;
                case OpResult::Merge:
                    merge_leaf(ctx);
                    return false;
                default:
                    assert(false);
                    return true;
            }
        });
        return removed;
    }

    /// Strict neighbor query: the smallest stored key > k (Successor) or the
    /// largest stored key < k (Predecessor). k itself may be 0 or absent.
    std::optional<std::pair<Key, Value>> adjacent(Key k, Direction dir) const {
        std::optional<std::pair<Key, Value>> result;
        lock_.run_read([&](typename ElidableLock::Mode) -> bool {
            typename Pool::EpochGuard guard(pool_);
            result.reset();
            Key lower;
            Key upper;
            bool has_upper;
            const Leaf* leaf = descend_readonly(k, lower, upper, has_upper);
            if (leaf == nullptr) {
                return false;
            }
            if (dir == Direction::Successor) {
                auto best = scan_leaf(*leaf, [&](Key ek) { return ek > k; }, /*want_min=*/true);
                if (!best && has_upper) {
                    // Every key >= upper lives right of this leaf; the leaf
                    // reached by descending for `upper` holds the smallest.
                    Key l2, u2;
                    bool h2;
                    const Leaf* next = descend_readonly(upper, l2, u2, h2);
                    if (next == nullptr) {
                        return false;
                    }
                    best = scan_leaf(*next, [](Key) { return true; }, true);
                    if (!best) {
                        return false;  // non-root leaves are never empty
                    }
                }
                result = best;
            } else {
                auto best = scan_leaf(*leaf, [&](Key ek) { return ek < k; }, /*want_min=*/false);
                if (!best && lower != 0) {
                    Key l2, u2;
                    bool h2;
                    const Leaf* prev = descend_readonly(lower - 1, l2, u2, h2);
                    if (prev == nullptr) {
                        return false;
                    }
                    best = scan_leaf(*prev, [](Key) { return true; }, false);
                    if (!best) {
                        return false;
                    }
                }
                result = best;
            }
            return true;
        });
        return result;
    }

    std::optional<std::pair<Key, Value>> successor(Key k) const {
        return adjacent(k, Direction::Successor);
    }

    std::optional<std::pair<Key, Value>> predecessor(Key k) const {
        return adjacent(k, Direction::Predecessor);
    }

    // Structural introspection for validators and tests; callers must ensure
    // no operation is in flight.
    int height() const { return detail::relaxed_load(height_); }
    const void* root_node() const { return detail::relaxed_load(root_); }
    Pool& pool() const { return pool_; }
    std::uint64_t canary_detections() const { return pool_.canary_detections(); }

    static Leaf* as_leaf(void* p) { return static_cast<Leaf*>(p); }
    static Internal* as_internal(void* p) { return static_cast<Internal*>(p); }
    static const Leaf* as_leaf(const void* p) { return static_cast<const Leaf*>(p); }
    static const Internal* as_internal(const void* p) { return static_cast<const Internal*>(p); }

    friend struct MapTestAccess;

private:
    using KV = KeyVal<Key, Value>;

    /// Where an operation landed: the leaf, its parent, the leaf's index in
    /// the parent, and the slot holding the parent (the root slot when the
    /// parent is the root or absent).
    struct DescentContext {
        void** parent_slot;
        Internal* parent;
        int child_index;
        void* node;
    };

    static Options sanitize(Options o) {
        if (o.retry_limit < 0) {
            o.retry_limit = 0;
        }
        if (o.prealloc_count < 3) {
            o.prealloc_count = 3;  // one rebalance consumes up to 3 nodes of a kind
        }
        if (canary_env_enabled()) {
            o.canary = true;
        }
        return o;
    }

    static void require_valid_key(Key k) {
        if (k == 0) {
            throw std::invalid_argument("bttree: key 0 is reserved as the empty-slot sentinel");
        }
    }

    template <class Body>
    BTTREE_ALWAYS_INLINE void run_update(Body&& body) {
        for (;;) {
            pool_.ensure_capacity(opts_.prealloc_count);
            const auto mode = lock_.enter_exclusive();
            const bool done = body();
            publish_root();
            lock_.exit_exclusive(mode);
            pool_.advance_epoch();
            if (done) {
                return;
            }
        }
    }

    /// Readers obtain root and height from one word so the pair is always
    /// coherent; stale is fine (retired nodes outlive their readers), mixed
    /// is not.
    void publish_root() {
        assert(height_ >= 0 && height_ < 64);
        assert((reinterpret_cast<std::uintptr_t>(root_) & 63) == 0);
        detail::relaxed_store(root_word_, reinterpret_cast<std::uintptr_t>(root_) |
                                              static_cast<std::uintptr_t>(height_));
    }

    /// Walk from the root toward the leaf that may hold k, splitting any
    /// full node and merging any non-root internal node of size 2 on the
    /// way. Returns true when a rebalance happened; the operation must leave
    /// its critical section and start over.
    bool descend_to_leaf(Key k, DescentContext& ctx) {
        void** pp = &root_;
        Internal* p = nullptr;
        int ci = 0;
        void* c = root_;
        int h = height_;
        if (h == 0) {
            ctx = {pp, nullptr, 0, c};
            return false;
        }
        Internal* root = as_internal(c);
        if (root->size == Fanout) {
            split_internal(pp, nullptr, 0, root);
            return true;
        }
        p = root;
        ci = route_child(*p, k);
        c = p->children[ci];
        while (--h > 0) {
            Internal* node = as_internal(c);
            if (node->size == 2) {
                merge_internal(pp, p, ci);
                return true;
            }
            if (node->size == Fanout) {
                split_internal(pp, p, ci, node);
                return true;
            }
            pp = &p->children[ci];
            p = node;
            ci = route_child(*p, k);
            c = p->children[ci];
        }
        ctx = {pp, p, ci, c};
        return false;
    }

    /// Rebuild the parent after in children at index i were balanced into
    /// out nodes. The parent is replaced by a fresh copy (never mutated in
    /// place) so optimistic readers can finish walking the old version. With
    /// no parent the root itself was split; a root of size 2 whose children
    /// merged to one hands the tree to the merged child.
    void rebuild_parent(void** pp, Internal* p, int i, int in, int out, void* n1, void* n2,
                        Key separator) {
        if (p == nullptr) {
            Internal* new_root = pool_.take_internal();
            new_root->children[0] = n1;
            new_root->children[1] = n2;
            new_root->keys[0] = separator;
            new_root->size = 2;
            *pp = new_root;
            ++height_;
            return;
        }
        const int psize = p->size;
        if (out == 1 && psize == 2 && p == root_) {
            *pp = n1;  // pp is the root slot
            --height_;
            pool_.retire(p);
            return;
        }
        Internal* np = pool_.take_internal();
        int w = 0;
        for (int j = 0; j < i; ++j) {
            np->children[w++] = p->children[j];
        }
        np->children[w++] = n1;
        if (out == 2) {
            np->children[w++] = n2;
        }
        for (int j = i + in; j < psize; ++j) {
            np->children[w++] = p->children[j];
        }
        np->size = psize - in + out;
        int kw = 0;
        for (int j = 0; j < i; ++j) {
            np->keys[kw++] = p->keys[j];
        }
        if (out == 2) {
            np->keys[kw++] = separator;
        }
        for (int j = i + in - 1; j < psize - 1; ++j) {
            np->keys[kw++] = p->keys[j];
        }
        assert(w == np->size && kw == np->size - 1);
        assert(np->size >= 2 && np->size <= Fanout);
        *pp = np;
        pool_.retire(p);
    }

    /// Split one internal node (which is full) into two halves, promoting
    /// the middle key. With p == nullptr this is the root split.
    void split_internal(void** pp, Internal* p, int ci, Internal* node) {
        const int total = node->size;
        assert(total == Fanout);
        const int s = split_first_count(total, 2);
        Internal* n1 = pool_.take_internal();
        Internal* n2 = pool_.take_internal();
        std::copy_n(node->children, s, n1->children);
        std::copy_n(node->children + s, total - s, n2->children);
        std::copy_n(node->keys, s - 1, n1->keys);
        std::copy_n(node->keys + s, total - s - 1, n2->keys);
        n1->size = s;
        n2->size = total - s;
        const Key promoted = node->keys[s - 1];
        rebuild_parent(pp, p, ci, 1, 2, n1, n2, promoted);
        pool_.retire(node);
    }

    /// Merge the size-2 internal node at child index ci with an adjacent
    /// sibling (left when one exists): gather children and keys, including
    /// the separator between the two, and emit one node or two per the merge
    /// policy.
    void merge_internal(void** pp, Internal* p, int ci) {
        const int i = ci > 0 ? ci - 1 : ci;
        Internal* c1 = as_internal(p->children[i]);
        Internal* c2 = as_internal(p->children[i + 1]);
        const int total = c1->size + c2->size;
        const int out = merge_output_count(total, Fanout);
        const int s = split_first_count(total, out);

        void* children[2 * Fanout];
        Key keys[2 * Fanout];
        std::copy_n(c1->children, c1->size, children);
        std::copy_n(c2->children, c2->size, children + c1->size);
        std::copy_n(c1->keys, c1->size - 1, keys);
        keys[c1->size - 1] = p->keys[i];
        std::copy_n(c2->keys, c2->size - 1, keys + c1->size);

        Internal* n1 = pool_.take_internal();
        std::copy_n(children, s, n1->children);
        std::copy_n(keys, s - 1, n1->keys);
        n1->size = s;
        Internal* n2 = nullptr;
        Key promoted{};
        if (out == 2) {
            n2 = pool_.take_internal();
            std::copy_n(children + s, total - s, n2->children);
            std::copy_n(keys + s, total - s - 1, n2->keys);
            n2->size = total - s;
            promoted = keys[s - 1];
        }
        rebuild_parent(pp, p, i, 2, out, n1, n2, promoted);
        pool_.retire(c1);
        pool_.retire(c2);
    }

    static int gather_entries(const Leaf& leaf, KV* out) {
        int n = 0;
        for (int i = 0; i < LeafCap; ++i) {
            if (leaf.entries[i].key != 0) {
                out[n++] = leaf.entries[i];
            }
        }
        return n;
    }

    /// Distribute `total` gathered entries over one or two fresh leaves.
    /// For two outputs the entries are rank-partitioned (not sorted): the
    /// s smallest go left, the rest right, and the smallest right-hand key
    /// becomes the separator.
    void balance_leaves(void** pp, Internal* p, int i, KV* buf, int total, int in) {
        const int out = in == 1 ? 2 : merge_output_count(total, LeafCap);
        const int s = split_first_count(total, out);
        Leaf* n1 = pool_.take_leaf();
        Leaf* n2 = nullptr;
        Key separator{};
        if (out == 2) {
            std::nth_element(buf, buf + s, buf + total,
                             [](const KV& a, const KV& b) { return a.key < b.key; });
            n2 = pool_.take_leaf();
            std::copy_n(buf + s, total - s, n2->entries);
            separator = n2->entries[0].key;  // rank s: the smallest key going right
        }
        std::copy_n(buf, s, n1->entries);
        rebuild_parent(pp, p, i, in, out, n1, n2, separator);
    }

    void split_leaf(const DescentContext& ctx) {
        Leaf* node = as_leaf(ctx.node);
        KV buf[LeafCap];
        const int total = gather_entries(*node, buf);
        assert(total == LeafCap);
        balance_leaves(ctx.parent_slot, ctx.parent, ctx.child_index, buf, total, 1);
        pool_.retire(node);
    }

    void merge_leaf(const DescentContext& ctx) {
        Internal* p = ctx.parent;
        assert(p != nullptr);  // the root leaf never signals Merge
        const int i = ctx.child_index > 0 ? ctx.child_index - 1 : ctx.child_index;
        Leaf* c1 = as_leaf(p->children[i]);
        Leaf* c2 = as_leaf(p->children[i + 1]);
        KV buf[2 * LeafCap];
        int total = gather_entries(*c1, buf);
        total += gather_entries(*c2, buf + total);
        balance_leaves(ctx.parent_slot, p, i, buf, total, 2);
        pool_.retire(c1);
        pool_.retire(c2);
    }

    /// Lock-free descent. Tolerates races with writers: every pointer it can
    /// load is a current or retired-but-unreclaimed node (internal nodes are
    /// immutable once published and the root/height pair comes from one
    /// word), so dereferencing is safe and validation decides correctness.
    /// Returns nullptr when an inconsistency is detected; also reports the
    /// tightest routing bounds around the reached leaf.
    const Leaf* descend_readonly(Key k, Key& lower, Key& upper, bool& has_upper) const {
        lower = 0;
        upper = 0;
        has_upper = false;
        const std::uintptr_t word = detail::relaxed_load(root_word_);
        const void* node = reinterpret_cast<const void*>(word & ~std::uintptr_t{63});
        int h = static_cast<int>(word & 63);
        if (node == nullptr) {
            return nullptr;
        }
        const bool canary = pool_.canary_enabled();
        while (h-- > 0) {
            const Internal* in = static_cast<const Internal*>(node);
            const std::int32_t size = detail::relaxed_load(in->size);
            if (canary && size == static_cast<std::int32_t>(0xCBCBCBCB)) {
                pool_.count_canary_detection();
            }
            if (size < 2 || size > Fanout) {
                return nullptr;
            }
            int ci = 0;
            while (detail::relaxed_load(in->keys[ci]) <= k && ++ci != size - 1) {
            }
            if (ci > 0) {
                lower = detail::relaxed_load(in->keys[ci - 1]);
            }
            if (ci < size - 1) {
                upper = detail::relaxed_load(in->keys[ci]);
                has_upper = true;
            }
            node = detail::relaxed_load(in->children[ci]);
            if (node == nullptr) {
                return nullptr;
            }
        }
        const Leaf* leaf = static_cast<const Leaf*>(node);
        if (canary && detail::relaxed_load(leaf->entries[0].key) == canary_key_pattern<Key>()) {
            pool_.count_canary_detection();
        }
        return leaf;
    }

    /// Best entry passing `pred`, by minimum (want_min) or maximum key.
    template <class Pred>
    static std::optional<std::pair<Key, Value>> scan_leaf(const Leaf& leaf, Pred&& pred,
                                                          bool want_min) {
        Key best_key = 0;
        Value best_value{};
        bool found = false;
        for (int i = 0; i < LeafCap; ++i) {
            const Key ek = detail::relaxed_load(leaf.entries[i].key);
            if (ek == 0 || !pred(ek)) {
                continue;
            }
            if (!found || (want_min ? ek < best_key : ek > best_key)) {
                best_key = ek;
                best_value = detail::relaxed_load(leaf.entries[i].value);
                found = true;
            }
        }
        if (!found) {
            return std::nullopt;
        }
        return std::make_pair(best_key, best_value);
    }

    Options opts_;
    mutable ElidableLock lock_;
    mutable Pool pool_;
    void* root_ = nullptr;
    int height_ = 0;
    std::size_t size_ = 0;
    std::uintptr_t root_word_ = 0;
};

}  // namespace bttree
