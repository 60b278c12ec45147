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

#include <array>
#include <atomic>
#include <cstdint>
#include <cstring>
#include <mutex>
#include <stdexcept>
#include <unordered_set>
#include <vector>

namespace bttree {

inline constexpr unsigned char kCanaryByte = 0xCB;

/// The byte pattern a key reads as after its node was poisoned.
template <class Key>
constexpr Key canary_key_pattern() {
    Key k{};
    for (std::size_t i = 0; i < sizeof(Key); ++i) {
        k = static_cast<Key>((k << 8) | kCanaryByte);
    }
    return k;
}

/// Node allocator with per-thread free lists and grace-period reclamation.
///
/// ensure_capacity (outside critical sections) is the only place that
/// allocates; take/retire inside critical sections are allocation-free.
/// Retired nodes are tagged with the global epoch and handed out again only
/// once every announced reader epoch is strictly newer, so an optimistic
/// reader can keep dereferencing a node that was unlinked under its feet.
template <class LeafT, class InternalT>
class NodePool {
public:
    static constexpr std::uint64_t kInactiveEpoch = ~std::uint64_t{0};

    explicit NodePool(bool canary = false) : pool_id_(next_pool_id().fetch_add(1)), canary_(canary) {}

    NodePool(const NodePool&) = delete;
    NodePool& operator=(const NodePool&) = delete;

    ~NodePool() {
        const int n = state_count_.load(std::memory_order_acquire);
        for (int i = 0; i < n; ++i) {
            delete states_[i].load(std::memory_order_acquire);
        }
        for (LeafT* p : leaf_blocks_) {
            delete p;
        }
        for (InternalT* p : internal_blocks_) {
            delete p;
        }
        destruction_generation().fetch_add(1, std::memory_order_release);
    }

    bool canary_enabled() const { return canary_; }

    std::uint64_t canary_detections() const { return canary_hits_.load(std::memory_order_relaxed); }
    void count_canary_detection() { canary_hits_.fetch_add(1, std::memory_order_relaxed); }

    std::uint64_t current_epoch() const { return epoch_.load(std::memory_order_acquire); }

    /// Writers call this when leaving a critical section; reclamation of
    /// anything retired inside the section becomes possible once readers
    /// have moved past it.
    void advance_epoch() { epoch_.fetch_add(1, std::memory_order_acq_rel); }

    /// Marks the calling thread as reading tree memory until destruction.
    /// Nodes retired at or after the announced epoch stay mapped meanwhile.
    class EpochGuard {
    public:
        explicit EpochGuard(NodePool& pool) : slot_(&pool.local_state().announced) {
            slot_->store(pool.epoch_.load(std::memory_order_acquire), std::memory_order_relaxed);
            std::atomic_thread_fence(std::memory_order_seq_cst);
        }

        EpochGuard(const EpochGuard&) = delete;
        EpochGuard& operator=(const EpochGuard&) = delete;

        ~EpochGuard() { slot_->store(kInactiveEpoch, std::memory_order_release); }

    private:
        std::atomic<std::uint64_t>* slot_;
    };

    /// Top the calling thread's free lists up to n nodes of each kind.
    /// Must run outside critical sections: this is where reclamation and
    /// allocation happen, or never.
    void ensure_capacity(int n) {
        ThreadState& ts = local_state();
        if (static_cast<int>(ts.free_leaves.size()) < n ||
            static_cast<int>(ts.free_internals.size()) < n) {
            reclaim(ts);
        }
        while (static_cast<int>(ts.free_leaves.size()) < n) {
            LeafT* node = new LeafT;
            {
                std::lock_guard<std::mutex> g(alloc_mu_);
                leaf_blocks_.push_back(node);
            }
            allocated_.fetch_add(1, std::memory_order_relaxed);
            ts.free_leaves.push_back(node);
        }
        while (static_cast<int>(ts.free_internals.size()) < n) {
            InternalT* node = new InternalT;
            {
                std::lock_guard<std::mutex> g(alloc_mu_);
                internal_blocks_.push_back(node);
            }
            allocated_.fetch_add(1, std::memory_order_relaxed);
            ts.free_internals.push_back(node);
        }
        // Keep retire() push_back allocation-free inside critical sections.
        if (ts.retired.capacity() < ts.retired.size() + 8) {
            ts.retired.reserve(ts.retired.size() + 64);
        }
    }

    /// Pop a zeroed node. Only legal after ensure_capacity; never allocates.
    LeafT* take_leaf() {
        ThreadState& ts = local_state();
        if (ts.free_leaves.empty()) {
            throw std::logic_error("NodePool::take_leaf: free list empty; prealloc bug");
        }
        LeafT* node = ts.free_leaves.back();
        ts.free_leaves.pop_back();
        std::memset(static_cast<void*>(node), 0, sizeof(LeafT));
        return node;
    }

    InternalT* take_internal() {
        ThreadState& ts = local_state();
        if (ts.free_internals.empty()) {
            throw std::logic_error("NodePool::take_internal: free list empty; prealloc bug");
        }
        InternalT* node = ts.free_internals.back();
        ts.free_internals.pop_back();
        std::memset(static_cast<void*>(node), 0, sizeof(InternalT));
        return node;
    }

    void retire(LeafT* node) { retire_impl(node, true); }
    void retire(InternalT* node) { retire_impl(node, false); }

    // Accounting; exact only at quiescence.
    std::uint64_t allocated_nodes() const { return allocated_.load(std::memory_order_relaxed); }

    std::size_t free_nodes() const {
        std::size_t total = 0;
        for_each_state([&](const ThreadState& ts) {
            total += ts.free_leaves.size() + ts.free_internals.size();
        });
        return total;
    }

    std::size_t retired_pending() const {
        std::size_t total = 0;
        for_each_state([&](const ThreadState& ts) { total += ts.retired.size(); });
        return total;
    }

private:
    struct RetiredNode {
        void* node;
        bool is_leaf;
        std::uint64_t epoch;
    };

    struct alignas(64) ThreadState {
        std::vector<LeafT*> free_leaves;
        std::vector<InternalT*> free_internals;
        std::vector<RetiredNode> retired;
        std::atomic<std::uint64_t> announced{kInactiveEpoch};
    };

    static constexpr int kMaxThreads = 64;

    static std::atomic<std::uint64_t>& next_pool_id() {
        static std::atomic<std::uint64_t> id{1};
        return id;
    }

    static std::atomic<std::uint64_t>& destruction_generation() {
        static std::atomic<std::uint64_t> gen{0};
        return gen;
    }

    ThreadState& local_state() {
        struct CacheEntry {
            std::uint64_t pool;
            ThreadState* state;
        };
        struct Cache {
            std::uint64_t generation = ~std::uint64_t{0};
            std::vector<CacheEntry> entries;
        };
        thread_local Cache cache;
        const std::uint64_t gen = destruction_generation().load(std::memory_order_acquire);
        if (cache.generation != gen) {
            cache.generation = gen;
            cache.entries.clear();
        }
        for (const CacheEntry& e : cache.entries) {
            if (e.pool == pool_id_) {
                return *e.state;
            }
        }
        auto* ts = new ThreadState;
        const int idx = state_count_.fetch_add(1, std::memory_order_acq_rel);
        if (idx >= kMaxThreads) {
            delete ts;
            throw std::runtime_error("NodePool: too many threads");
        }
        states_[idx].store(ts, std::memory_order_release);
        cache.entries.push_back({pool_id_, ts});
        return *ts;
    }

    template <class Fn>
    void for_each_state(Fn&& fn) const {
        const int n = state_count_.load(std::memory_order_acquire);
        for (int i = 0; i < n; ++i) {
            const ThreadState* ts = states_[i].load(std::memory_order_acquire);
            if (ts != nullptr) {
                fn(*ts);
            }
        }
    }

    std::uint64_t min_announced() const {
        std::uint64_t min = kInactiveEpoch;
        for_each_state([&](const ThreadState& ts) {
            const std::uint64_t a = ts.announced.load(std::memory_order_relaxed);
            if (a < min) {
                min = a;
            }
        });
        return min;
    }

    void reclaim(ThreadState& ts) {
        if (ts.retired.empty()) {
            return;
        }
        std::atomic_thread_fence(std::memory_order_seq_cst);
        const std::uint64_t safe_before = min_announced();
        std::size_t kept = 0;
        for (const RetiredNode& r : ts.retired) {
            if (r.epoch < safe_before) {
                if (canary_) {
                    std::lock_guard<std::mutex> g(debug_mu_);
                    debug_retired_.erase(r.node);
                }
                if (r.is_leaf) {
                    auto* leaf = static_cast<LeafT*>(r.node);
                    if (canary_) {
                        std::memset(static_cast<void*>(leaf), kCanaryByte, sizeof(LeafT));
                    }
                    ts.free_leaves.push_back(leaf);
                } else {
                    auto* internal = static_cast<InternalT*>(r.node);
                    if (canary_) {
                        std::memset(static_cast<void*>(internal), kCanaryByte, sizeof(InternalT));
                    }
                    ts.free_internals.push_back(internal);
                }
            } else {
                ts.retired[kept++] = r;
            }
        }
        ts.retired.resize(kept);
    }

    void retire_impl(void* node, bool is_leaf) {
        if (canary_) {
            std::lock_guard<std::mutex> g(debug_mu_);
            if (!debug_retired_.insert(node).second) {
                throw std::logic_error("NodePool::retire: node retired twice");
            }
        }
        ThreadState& ts = local_state();
        ts.retired.push_back({node, is_leaf, epoch_.load(std::memory_order_relaxed)});
    }

    const std::uint64_t pool_id_;
    const bool canary_;
    std::atomic<std::uint64_t> epoch_{1};
    std::atomic<std::uint64_t> canary_hits_{0};
    std::atomic<std::uint64_t> allocated_{0};

    std::array<std::atomic<ThreadState*>, kMaxThreads> states_{};
    std::atomic<int> state_count_{0};

    std::mutex alloc_mu_;
    std::vector<LeafT*> leaf_blocks_;
    std::vector<InternalT*> internal_blocks_;

    std::mutex debug_mu_;
    std::unordered_set<void*> debug_retired_;
};

}  // namespace bttree
