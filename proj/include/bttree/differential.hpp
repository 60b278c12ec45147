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

#include <atomic>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "bttree/check.hpp"
#include "bttree/map.hpp"
#include "bttree/oracle.hpp"

namespace bttree::conformance {

enum class OpKind : std::uint8_t {
    Insert,
    Remove,
    Search,
    Successor,
    Predecessor,
};

inline const char* to_string(OpKind k) {
    switch (k) {
        case OpKind::Insert: return "insert";
        case OpKind::Remove: return "remove";
        case OpKind::Search: return "search";
        case OpKind::Successor: return "successor";
        case OpKind::Predecessor: return "predecessor";
    }
    return "?";
}

/// One replayable operation plus the oracle's expected outcome.
struct OpRecord {
    OpKind kind;
    std::uint64_t key;
    std::uint64_t value;  // insert payload
    bool expect_present;
    std::uint64_t expect_key;    // adjacent results
    std::uint64_t expect_value;  // present/previous/removed value
};

using OpTrace = std::vector<OpRecord>;

struct Verdict {
    bool pass = true;
    std::string message;
    std::uint64_t checkpoints = 0;  // structural checks that ran clean
    OpTrace trace;                  // minimized reproduction when failing
};

inline std::string trace_to_text(const OpTrace& trace) {
    std::ostringstream out;
    out << "bttree-trace v1 " << trace.size() << "\n";
    for (const OpRecord& r : trace) {
        out << to_string(r.kind) << ' ' << r.key << ' ' << r.value << ' ' << r.expect_present
            << ' ' << r.expect_key << ' ' << r.expect_value << "\n";
    }
    return out.str();
}

inline OpTrace trace_from_text(const std::string& text) {
    std::istringstream in(text);
    std::string magic, version;
    std::size_t count = 0;
    in >> magic >> version >> count;
    OpTrace trace;
    trace.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::string kind;
        OpRecord r{};
        in >> kind >> r.key >> r.value >> r.expect_present >> r.expect_key >> r.expect_value;
        if (!in) {
            break;
        }
        if (kind == "insert") r.kind = OpKind::Insert;
        else if (kind == "remove") r.kind = OpKind::Remove;
        else if (kind == "search") r.kind = OpKind::Search;
        else if (kind == "successor") r.kind = OpKind::Successor;
        else r.kind = OpKind::Predecessor;
        trace.push_back(r);
    }
    return trace;
}

namespace detail {

/// Apply one op to the map and compare with the oracle. Returns an empty
/// string on agreement, else a description of the divergence. Fills the
/// record's expectation fields from the oracle as it goes.
template <class MapT>
std::string apply_and_compare(MapT& map, OracleMap<typename MapT::key_type, typename MapT::mapped_type>& oracle,
                              OpRecord& r) {
    using Key = typename MapT::key_type;
    using Value = typename MapT::mapped_type;
    const Key k = static_cast<Key>(r.key);
    const Value v = static_cast<Value>(r.value);

    auto note_value = [&](const std::optional<Value>& expect) {
        r.expect_present = expect.has_value();
        r.expect_key = 0;
        r.expect_value = expect ? std::uint64_t(*expect) : 0;
    };
    auto mismatch_value = [&](const char* what, const std::optional<Value>& got,
                              const std::optional<Value>& expect) {
        std::ostringstream out;
        out << what << "(" << std::uint64_t(k) << ") returned ";
        if (got) out << std::uint64_t(*got);
        else out << "absent";
        out << " but the oracle has ";
        if (expect) out << std::uint64_t(*expect);
        else out << "absent";
        return out.str();
    };

    switch (r.kind) {
        case OpKind::Insert: {
            const auto expect = oracle.insert(k, v);
            note_value(expect);
            const auto got = map.insert(k, v);
            if (got != expect) return mismatch_value("insert", got, expect);
            return {};
        }
        case OpKind::Remove: {
            const auto expect = oracle.remove(k);
            note_value(expect);
            const auto got = map.remove(k);
            if (got != expect) return mismatch_value("remove", got, expect);
            return {};
        }
        case OpKind::Search: {
            const auto expect = oracle.search(k);
            note_value(expect);
            const auto got = map.search(k);
            if (got != expect) return mismatch_value("search", got, expect);
            return {};
        }
        case OpKind::Successor:
        case OpKind::Predecessor: {
            const bool succ = r.kind == OpKind::Successor;
            const auto expect = succ ? oracle.successor(k) : oracle.predecessor(k);
            r.expect_present = expect.has_value();
            r.expect_key = expect ? std::uint64_t(expect->first) : 0;
            r.expect_value = expect ? std::uint64_t(expect->second) : 0;
            const auto got = succ ? map.successor(k) : map.predecessor(k);
            if (got != expect) {
                std::ostringstream out;
                out << (succ ? "successor(" : "predecessor(") << std::uint64_t(k) << ") returned ";
                if (got) out << "(" << std::uint64_t(got->first) << "," << std::uint64_t(got->second) << ")";
                else out << "absent";
                out << " but the oracle has ";
                if (expect) out << "(" << std::uint64_t(expect->first) << "," << std::uint64_t(expect->second) << ")";
                else out << "absent";
                return out.str();
            }
            return {};
        }
    }
    return {};
}

/// Full contents via the public successor chain.
template <class MapT>
std::vector<std::pair<typename MapT::key_type, typename MapT::mapped_type>> map_contents(
    const MapT& map) {
    std::vector<std::pair<typename MapT::key_type, typename MapT::mapped_type>> out;
    typename MapT::key_type k = 0;
    for (;;) {
        auto next = map.successor(k);
        if (!next) {
            break;
        }
        out.push_back(*next);
        k = next->first;
    }
    return out;
}

/// Compare final map contents against the oracle.
template <class MapT>
std::string compare_contents(const MapT& map,
                             const OracleMap<typename MapT::key_type, typename MapT::mapped_type>& oracle) {
    const auto got = map_contents(map);
    if (got.size() != oracle.contents().size()) {
        return "final content size " + std::to_string(got.size()) + " vs oracle " +
               std::to_string(oracle.contents().size());
    }
    std::size_t i = 0;
    for (const auto& [k, v] : oracle.contents()) {
        if (got[i].first != k || got[i].second != v) {
            return "final content diverges at rank " + std::to_string(i);
        }
        ++i;
    }
    if (map.size() != oracle.size()) {
        return "size() reports " + std::to_string(map.size()) + " vs oracle " +
               std::to_string(oracle.size());
    }
    return {};
}

/// Failure index of a trace replayed from scratch, or -1 when it passes.
/// Expectations are recomputed, so this works on edited traces.
template <class MapT>
std::ptrdiff_t replay_failure_index(OpTrace& trace, const Options& opts,
                                    std::uint64_t check_period) {
    MapT map(opts);
    OracleMap<typename MapT::key_type, typename MapT::mapped_type> oracle;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        if (!apply_and_compare(map, oracle, trace[i]).empty()) {
            return static_cast<std::ptrdiff_t>(i);
        }
        if (check_period != 0 && (i + 1) % check_period == 0 && !check_tree(map).empty()) {
            return static_cast<std::ptrdiff_t>(i);
        }
    }
    if (!check_tree(map).empty() || !compare_contents(map, oracle).empty()) {
        return static_cast<std::ptrdiff_t>(trace.size()) - 1;
    }
    return -1;
}

/// Greedy minimization: truncate to the failing prefix, then drop ops that
/// are not needed to keep it failing.
template <class MapT>
void shrink_trace(OpTrace& trace, const Options& opts, std::ptrdiff_t failing_index) {
    if (failing_index >= 0 && failing_index + 1 < static_cast<std::ptrdiff_t>(trace.size())) {
        trace.resize(failing_index + 1);
    }
    if (trace.size() > 4096) {
        return;  // prefix truncation only; per-op removal would be quadratic
    }
    for (std::size_t i = 0; i < trace.size() && trace.size() > 1;) {
        OpTrace candidate;
        candidate.reserve(trace.size() - 1);
        for (std::size_t j = 0; j < trace.size(); ++j) {
            if (j != i) {
                candidate.push_back(trace[j]);
            }
        }
        if (replay_failure_index<MapT>(candidate, opts, 0) >= 0) {
            trace = std::move(candidate);
        } else {
            ++i;
        }
    }
}

}  // namespace detail

/// Apply an identical random operation sequence to the tree and the oracle,
/// comparing every result, validating the structure every check_period ops,
/// and comparing full contents at the end. On divergence the returned trace
/// is a minimized reproduction.
template <class MapT>
Verdict differential_run(std::uint64_t seed, std::uint64_t op_count, std::uint64_t key_range,
                         Options opts = {}, std::uint64_t check_period = 1000) {
    MapT map(opts);
    OracleMap<typename MapT::key_type, typename MapT::mapped_type> oracle;
    std::mt19937_64 rng(seed);
    OpTrace trace;
    trace.reserve(op_count);
    std::uint64_t checkpoints = 0;

    auto fail = [&](std::string msg, std::ptrdiff_t index) {
        detail::shrink_trace<MapT>(trace, opts, index);
        Verdict v;
        v.pass = false;
        v.message = std::move(msg);
        v.checkpoints = checkpoints;
        v.trace = std::move(trace);
        return v;
    };

    for (std::uint64_t i = 0; i < op_count; ++i) {
        const std::uint64_t pick = rng() % 100;
        OpRecord r{};
        if (pick < 35) r.kind = OpKind::Insert;
        else if (pick < 60) r.kind = OpKind::Remove;
        else if (pick < 85) r.kind = OpKind::Search;
        else if (pick < 93) r.kind = OpKind::Successor;
        else r.kind = OpKind::Predecessor;
        r.key = 1 + rng() % key_range;
        r.value = rng() | 1;
        trace.push_back(r);
        const std::string diverged = detail::apply_and_compare(map, oracle, trace.back());
        if (!diverged.empty()) {
            return fail("op " + std::to_string(i) + ": " + diverged,
                        static_cast<std::ptrdiff_t>(i));
        }
        if ((i + 1) % check_period == 0) {
            const auto violations = check_tree(map);
            ++checkpoints;
            if (!violations.empty()) {
                return fail("op " + std::to_string(i) + ": structural violation: " + violations.front(),
                            static_cast<std::ptrdiff_t>(i));
            }
        }
    }
    const auto violations = check_tree(map);
    if (!violations.empty()) {
        return fail("final structural violation: " + violations.front(),
                    static_cast<std::ptrdiff_t>(trace.size()) - 1);
    }
    const std::string content = detail::compare_contents(map, oracle);
    if (!content.empty()) {
        return fail(content, static_cast<std::ptrdiff_t>(trace.size()) - 1);
    }
    Verdict ok;
    ok.checkpoints = checkpoints;
    return ok;
}

struct StressResult {
    bool pass = true;
    std::string message;
    std::uint64_t canary_detections = 0;
    std::uint64_t checkpoints = 0;
};

/// Two-phase concurrent correctness run.
///
/// Phase 1 gives each thread a disjoint key range on one shared map; with no
/// cross-thread interference every thread's live-recorded results must
/// replay exactly against a private oracle, and the final per-range contents
/// must match it.
///
/// Phase 2 overlaps: thread t owns keys congruent to t mod threads and is
/// the only writer of them (searches roam the whole range); the final map
/// contents must equal the union of the per-thread write replays — any lost
/// update breaks the equality.
template <class MapT>
StressResult concurrent_stress(int threads, std::uint64_t op_count, std::uint64_t key_range,
                               Options opts = {}) {
    using Key = typename MapT::key_type;
    using Value = typename MapT::mapped_type;
    StressResult result;

    struct WriteRec {
        OpKind kind;
        Key key;
        Value value;
        bool got_present;
        Value got_value;
    };

    const std::uint64_t per_thread = op_count / std::uint64_t(threads);

    // ---- phase 1: disjoint ranges ----
    {
        MapT map(opts);
        std::vector<std::vector<WriteRec>> logs(threads);
        std::vector<std::thread> workers;
        std::atomic<bool> failed{false};
        for (int t = 0; t < threads; ++t) {
            workers.emplace_back([&, t] {
                const std::uint64_t lo = 1 + (key_range * std::uint64_t(t)) / std::uint64_t(threads);
                const std::uint64_t hi =
                    (key_range * std::uint64_t(t + 1)) / std::uint64_t(threads);  // inclusive
                std::mt19937_64 rng(0x9E3779B97F4A7C15ull * (t + 1));
                auto& log = logs[t];
                log.reserve(per_thread);
                for (std::uint64_t i = 0; i < per_thread && !failed.load(std::memory_order_relaxed);
                     ++i) {
                    const Key k = static_cast<Key>(lo + rng() % (hi - lo + 1));
                    const std::uint64_t pick = rng() % 100;
                    WriteRec r{};
                    r.key = k;
                    if (pick < 40) {
                        r.kind = OpKind::Insert;
                        r.value = static_cast<Value>(rng() | 1);
                        const auto got = map.insert(k, r.value);
                        r.got_present = got.has_value();
                        r.got_value = got.value_or(Value{});
                    } else if (pick < 70) {
                        r.kind = OpKind::Remove;
                        const auto got = map.remove(k);
                        r.got_present = got.has_value();
                        r.got_value = got.value_or(Value{});
                    } else {
                        r.kind = OpKind::Search;
                        const auto got = map.search(k);
                        r.got_present = got.has_value();
                        r.got_value = got.value_or(Value{});
                    }
                    log.push_back(r);
                }
            });
        }
        for (auto& w : workers) {
            w.join();
        }
        const auto violations = check_tree(map);
        if (!violations.empty()) {
            result.pass = false;
            result.message = "phase 1 structural violation: " + violations.front();
            return result;
        }
        const auto contents = detail::map_contents(map);
        for (int t = 0; t < threads; ++t) {
            OracleMap<Key, Value> oracle;
            for (const WriteRec& r : logs[t]) {
                std::optional<Value> expect;
                switch (r.kind) {
                    case OpKind::Insert: expect = oracle.insert(r.key, r.value); break;
                    case OpKind::Remove: expect = oracle.remove(r.key); break;
                    default: expect = oracle.search(r.key); break;
                }
                const std::optional<Value> got =
                    r.got_present ? std::optional<Value>(r.got_value) : std::nullopt;
                if (got != expect) {
                    result.pass = false;
                    result.message = "phase 1: thread " + std::to_string(t) +
                                     " observed a result inconsistent with its private range";
                    return result;
                }
            }
            const std::uint64_t lo = 1 + (key_range * std::uint64_t(t)) / std::uint64_t(threads);
            const std::uint64_t hi = (key_range * std::uint64_t(t + 1)) / std::uint64_t(threads);
            std::size_t in_range = 0;
            for (const auto& [k, v] : contents) {
                if (std::uint64_t(k) >= lo && std::uint64_t(k) <= hi) {
                    ++in_range;
                    const auto expect = oracle.search(k);
                    if (!expect || *expect != v) {
                        result.pass = false;
                        result.message = "phase 1: final contents diverge in thread " +
                                         std::to_string(t) + "'s range";
                        return result;
                    }
                }
            }
            if (in_range != oracle.size()) {
                result.pass = false;
                result.message = "phase 1: thread " + std::to_string(t) + " range holds " +
                                 std::to_string(in_range) + " keys, oracle " +
                                 std::to_string(oracle.size());
                return result;
            }
        }
        result.canary_detections += map.canary_detections();
        ++result.checkpoints;
    }

    // ---- phase 2: overlapping keys, writes partitioned by key mod threads ----
    {
        MapT map(opts);
        std::vector<std::vector<WriteRec>> logs(threads);
        std::vector<std::thread> workers;
        for (int t = 0; t < threads; ++t) {
            workers.emplace_back([&, t] {
                std::mt19937_64 rng(0xD1B54A32D192ED03ull * (t + 1));
                auto& log = logs[t];
                log.reserve(per_thread / 2 + 1);
                std::uint64_t sink = 0;
                for (std::uint64_t i = 0; i < per_thread; ++i) {
                    const std::uint64_t draw = 1 + rng() % key_range;
                    if (rng() % 2 == 0) {
                        // search anywhere; result unverifiable under races
                        sink += map.search(static_cast<Key>(draw)).value_or(Value{});
                        continue;
                    }
                    // own keys only: k == t (mod threads)
                    std::uint64_t k = draw - (draw % std::uint64_t(threads)) + std::uint64_t(t);
                    if (k == 0) {
                        k += threads;
                    }
                    if (k > key_range) {
                        k -= threads;
                    }
                    if (k == 0 || k > key_range) {
                        continue;
                    }
                    WriteRec r{};
                    r.key = static_cast<Key>(k);
                    if (rng() % 2 == 0) {
                        r.kind = OpKind::Insert;
                        r.value = static_cast<Value>(rng() | 1);
                        map.insert(r.key, r.value);
                    } else {
                        r.kind = OpKind::Remove;
                        map.remove(r.key);
                    }
                    log.push_back(r);
                }
                volatile std::uint64_t keep = sink;
                (void)keep;
            });
        }
        for (auto& w : workers) {
            w.join();
        }
        const auto violations = check_tree(map);
        if (!violations.empty()) {
            result.pass = false;
            result.message = "phase 2 structural violation: " + violations.front();
            return result;
        }
        OracleMap<Key, Value> expected;
        for (int t = 0; t < threads; ++t) {
            OracleMap<Key, Value> own;
            for (const WriteRec& r : logs[t]) {
                if (r.kind == OpKind::Insert) {
                    own.insert(r.key, r.value);
                } else {
                    own.remove(r.key);
                }
            }
            for (const auto& [k, v] : own.contents()) {
                expected.insert(k, v);
            }
        }
        const auto contents = detail::map_contents(map);
        if (contents.size() != expected.size()) {
            result.pass = false;
            result.message = "phase 2: map holds " + std::to_string(contents.size()) +
                             " keys but the ownership oracles union to " +
                             std::to_string(expected.size()) + " (lost update)";
            return result;
        }
        for (const auto& [k, v] : contents) {
            const auto expect = expected.search(k);
            if (!expect || *expect != v) {
                result.pass = false;
                result.message = "phase 2: key " + std::to_string(std::uint64_t(k)) +
                                 " diverges from its owner's oracle (lost update)";
                return result;
            }
        }
        result.canary_detections += map.canary_detections();
        ++result.checkpoints;
    }
    return result;
}

}  // namespace bttree::conformance
