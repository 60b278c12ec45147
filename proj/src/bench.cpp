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

#include "bttree/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <stdexcept>
#include <thread>

#include "bttree/baselines.hpp"
#include "bttree/map.hpp"
#include "bttree/sync.hpp"

namespace bttree::bench {
namespace {

using std::uint32_t;
using std::uint64_t;

template <class T>
inline void do_not_optimize(const T& value) {
    asm volatile("" : : "r,m"(value) : "memory");
}

/// Counter-based generator; one independent stream per purpose.
struct SplitMix64 {
    uint64_t state;

    explicit SplitMix64(uint64_t seed) : state(seed) {}

    uint64_t next() {
        uint64_t z = (state += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }
};

uint64_t derive_stream(uint64_t seed, uint64_t stream) {
    SplitMix64 rng(seed ^ (0xA0761D6478BD642Full * (stream + 1)));
    return rng.next();
}

uint64_t fnv1a64(uint64_t h, uint64_t x) {
    for (int i = 0; i < 8; ++i) {
        h ^= (x >> (8 * i)) & 0xFF;
        h *= 0x100000001B3ull;
    }
    return h;
}

// ---------------------------------------------------------------------------
// Map adapters: one call surface over the tree and the two locked baselines.
// The baselines synchronize reads pessimistically; wiring seqlock reads into
// them would require their nodes to go through the grace-period arena.
// ---------------------------------------------------------------------------

struct BtAdapter {
    using MapT = bttree::Map<uint32_t, uint32_t, 32, 32>;
    MapT map;

    explicit BtAdapter(const WorkloadSpec& spec) : map(make_options(spec)) {}

    static Options make_options(const WorkloadSpec& spec) {
        Options o;
        o.sync = spec.sync;
        return o;
    }

    bool insert_new(uint32_t k, uint32_t v) { return !map.insert(k, v).has_value(); }
    void insert(uint32_t k, uint32_t v) { map.insert(k, v); }
    void remove(uint32_t k) { map.remove(k); }
    bool search(uint32_t k) const { return map.search(k).has_value(); }
    std::size_t size() const { return map.size(); }

    std::vector<std::pair<uint32_t, uint32_t>> contents() const {
        std::vector<std::pair<uint32_t, uint32_t>> out;
        uint32_t k = 0;
        while (auto next = map.successor(k)) {
            out.push_back(*next);
            k = next->first;
        }
        return out;
    }
};

struct BstAdapter {
    baseline::AvlMap<uint32_t, uint32_t> core;
    mutable ElidableLock lock;

    explicit BstAdapter(const WorkloadSpec& spec) : lock(spec.sync) {}

    bool insert_new(uint32_t k, uint32_t v) {
        const auto mode = lock.enter_exclusive();
        const bool fresh = !core.insert(k, v).has_value();
        lock.exit_exclusive(mode);
        return fresh;
    }
    void insert(uint32_t k, uint32_t v) {
        const auto mode = lock.enter_exclusive();
        core.insert(k, v);
        lock.exit_exclusive(mode);
    }
    void remove(uint32_t k) {
        const auto mode = lock.enter_exclusive();
        core.remove(k);
        lock.exit_exclusive(mode);
    }
    bool search(uint32_t k) const {
        lock.lock();
        const bool hit = core.search(k).has_value();
        lock.unlock();
        return hit;
    }
    std::size_t size() const { return core.size(); }

    std::vector<std::pair<uint32_t, uint32_t>> contents() const {
        std::vector<std::pair<uint32_t, uint32_t>> out;
        core.for_each([&](uint32_t k, uint32_t v) { out.emplace_back(k, v); });
        return out;
    }
};

struct HashAdapter {
    baseline::OpenHashMap<uint32_t, uint32_t> core;
    mutable ElidableLock lock;

    explicit HashAdapter(const WorkloadSpec& spec)
        : core(spec.key_range), lock(spec.sync) {}

    bool insert_new(uint32_t k, uint32_t v) {
        const auto mode = lock.enter_exclusive();
        const bool fresh = !core.insert(k, v).has_value();
        lock.exit_exclusive(mode);
        return fresh;
    }
    void insert(uint32_t k, uint32_t v) {
        const auto mode = lock.enter_exclusive();
        core.insert(k, v);
        lock.exit_exclusive(mode);
    }
    void remove(uint32_t k) {
        const auto mode = lock.enter_exclusive();
        core.remove(k);
        lock.exit_exclusive(mode);
    }
    bool search(uint32_t k) const {
        lock.lock();
        const bool hit = core.search(k).has_value();
        lock.unlock();
        return hit;
    }
    std::size_t size() const { return core.size(); }

    std::vector<std::pair<uint32_t, uint32_t>> contents() const {
        std::vector<std::pair<uint32_t, uint32_t>> out;
        core.for_each([&](uint32_t k, uint32_t v) { out.emplace_back(k, v); });
        std::sort(out.begin(), out.end());
        return out;
    }
};

// ---------------------------------------------------------------------------
// Harness
// ---------------------------------------------------------------------------

template <class Adapter>
void worker_loop(Adapter& adapter, const WorkloadSpec& spec, int tid,
                 const std::atomic<bool>& stop, uint64_t budget, uint64_t& ops_out) {
    SplitMix64 rng(derive_stream(spec.seed, uint64_t(tid)));
    const uint64_t k = spec.key_range;
    uint64_t ops = 0;
    for (;;) {
        for (int batch = 0; batch < 128; ++batch) {
            if (budget != 0 && ops == budget) {
                ops_out = ops;
                return;
            }
            const auto key = uint32_t(1 + rng.next() % k);
            switch (spec.mix) {
                case Mix::Update:
                    if (rng.next() % 100 < 50) {
                        adapter.insert(key, key);
                    } else {
                        adapter.remove(key);
                    }
                    break;
                case Mix::Mixed: {
                    const uint64_t pick = rng.next() % 100;
                    if (pick < 70) {
                        do_not_optimize(adapter.search(key));
                    } else if (pick < 90) {
                        adapter.insert(key, key);
                    } else {
                        adapter.remove(key);
                    }
                    break;
                }
                case Mix::Constant:
                    do_not_optimize(adapter.search(key));
                    break;
            }
            ++ops;
        }
        if (budget == 0 && stop.load(std::memory_order_relaxed)) {
            break;
        }
        if (budget != 0 && ops >= budget) {
            break;
        }
    }
    ops_out = ops;
}

template <class Adapter>
void prefill(Adapter& adapter, const WorkloadSpec& spec, uint64_t n) {
    SplitMix64 rng(derive_stream(spec.seed, 0xF1E1ull));
    uint64_t added = 0;
    while (added < n) {
        const auto key = uint32_t(1 + rng.next() % spec.key_range);
        if (adapter.insert_new(key, key)) {
            ++added;
        }
    }
}

template <class Adapter>
BenchResult run_typed(const WorkloadSpec& spec) {
    if (spec.threads < 1 || spec.threads > 64) {
        throw std::invalid_argument("bench: thread count must be in [1, 64]");
    }
    if (spec.key_range < 1) {
        throw std::invalid_argument("bench: key range must be at least 1");
    }
    const uint64_t n = prefill_size(spec.mix, spec.key_range);
    if (n > spec.key_range) {
        throw std::invalid_argument("bench: prefill size exceeds key range");
    }

    Adapter adapter(spec);
    prefill(adapter, spec, n);

    BenchResult result;
    result.spec = spec;
    result.prefill = n;
    result.per_thread_ops.assign(spec.threads, 0);

    std::atomic<bool> stop{false};
    std::atomic<int> ready{0};
    std::atomic<bool> go{false};
    std::vector<std::thread> workers;
    workers.reserve(spec.threads);
    for (int t = 0; t < spec.threads; ++t) {
        uint64_t budget = 0;
        if (spec.op_budget != 0) {
            budget = spec.op_budget / uint64_t(spec.threads);
            if (t < int(spec.op_budget % uint64_t(spec.threads))) {
                ++budget;
            }
        }
        workers.emplace_back([&, t, budget] {
            ready.fetch_add(1);
            while (!go.load(std::memory_order_acquire)) {
                detail::cpu_relax();
            }
            worker_loop(adapter, spec, t, stop, budget, result.per_thread_ops[t]);
        });
    }
    while (ready.load() != spec.threads) {
        std::this_thread::yield();
    }
    const auto t0 = std::chrono::steady_clock::now();
    go.store(true, std::memory_order_release);
    if (spec.op_budget == 0) {
        std::this_thread::sleep_for(std::chrono::duration<double>(spec.duration_s));
        stop.store(true, std::memory_order_relaxed);
    }
    for (auto& w : workers) {
        w.join();
    }
    const auto t1 = std::chrono::steady_clock::now();

    result.elapsed_s = std::chrono::duration<double>(t1 - t0).count();
    for (const uint64_t ops : result.per_thread_ops) {
        result.total_ops += ops;
    }
    result.final_size = adapter.size();
    if (spec.op_budget != 0) {
        uint64_t h = 0xCBF29CE484222325ull;
        for (const auto& [k, v] : adapter.contents()) {
            h = fnv1a64(h, k);
            h = fnv1a64(h, v);
        }
        result.content_hash = h;
    }
    return result;
}

}  // namespace

BenchResult run_workload(const WorkloadSpec& spec) {
    switch (spec.impl) {
        case MapImpl::BtTree: return run_typed<BtAdapter>(spec);
        case MapImpl::BaselineBst: return run_typed<BstAdapter>(spec);
        case MapImpl::BaselineHash: return run_typed<HashAdapter>(spec);
    }
    throw std::invalid_argument("bench: unknown map implementation");
}

std::string emit_csv(const std::vector<BenchResult>& results) {
    std::string out = "impl,sync,mix,k,n,threads,duration_s,total_ops,throughput_ops_s,seed\n";
    char line[256];
    for (const BenchResult& r : results) {
        std::snprintf(line, sizeof line, "%s,%s,%s,%llu,%llu,%d,%.17g,%llu,%.17g,%llu\n",
                      to_string(r.spec.impl), bttree::to_string(r.spec.sync), to_string(r.spec.mix),
                      static_cast<unsigned long long>(r.spec.key_range),
                      static_cast<unsigned long long>(r.prefill), r.spec.threads, r.elapsed_s,
                      static_cast<unsigned long long>(r.total_ops), r.throughput(),
                      static_cast<unsigned long long>(r.spec.seed));
        out += line;
    }
    return out;
}

}  // namespace bttree::bench
