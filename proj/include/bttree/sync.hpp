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
#include <thread>

#include "bttree/options.hpp"

#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
#define BTTREE_HTM_X86 1
#include <cpuid.h>
#endif

#if defined(__GNUC__) || defined(__clang__)
#define BTTREE_ALWAYS_INLINE inline __attribute__((always_inline))
#else
#define BTTREE_ALWAYS_INLINE inline
#endif

namespace bttree {

namespace detail {

inline void cpu_relax() {
#if defined(__x86_64__) || defined(__i386__)
    asm volatile("pause");
#elif defined(__aarch64__)
    asm volatile("yield");
#endif
}

#if BTTREE_HTM_X86
inline constexpr unsigned kTxnStarted = ~0u;

BTTREE_ALWAYS_INLINE unsigned txn_begin() {
    unsigned status = kTxnStarted;
    // xbegin with a zero-displacement fallback target; aborts land here with
    // the abort code in eax.
    asm volatile(".byte 0xc7,0xf8; .long 0" : "+a"(status) : : "memory");
    return status;
}

inline void txn_end() {
    asm volatile(".byte 0x0f,0x01,0xd5" : : : "memory");
}

inline void txn_abort() {
    asm volatile(".byte 0xc6,0xf8,0xff" : : : "memory");
}

inline bool htm_supported() {
    static const bool supported = [] {
        unsigned a = 0, b = 0, c = 0, d = 0;
        if (!__get_cpuid_count(7, 0, &a, &b, &c, &d)) {
            return false;
        }
        return (b & (1u << 11)) != 0;  // RTM
    }();
    return supported;
}
#else
inline bool htm_supported() {
    return false;
}
#endif

}  // namespace detail

/// Per-tree lock giving every operation an atomic critical section.
///
/// A single word serves as a test-and-set lock; a sequence counter (odd while
/// a writer's section is open) lets the seqlock policy validate optimistic
/// reads. Writers always bump the sequence so readers of any policy can
/// detect them; readers that fall back to the lock do not bump it, so they
/// never invalidate concurrent optimistic readers.
class ElidableLock {
public:
    enum class Mode : std::uint8_t {
        Locked,       // holding the test-and-set lock
        Speculative,  // inside a hardware transaction
    };

    struct ReadTicket {
        std::uint64_t seq;
        bool valid;
    };

    explicit ElidableLock(SyncPolicy policy = SyncPolicy::Mutex, int retry_limit = 2)
        : policy_(policy), retry_limit_(retry_limit < 0 ? 0 : retry_limit) {}

    ElidableLock(const ElidableLock&) = delete;
    ElidableLock& operator=(const ElidableLock&) = delete;

    SyncPolicy policy() const { return policy_; }
    int retry_limit() const { return retry_limit_; }

    std::uint64_t sequence() const { return seq_.load(std::memory_order_acquire); }
    bool is_locked() const { return state_.load(std::memory_order_relaxed) != 0; }

    void lock() {
        for (;;) {
            std::uint32_t expected = 0;
            if (state_.compare_exchange_weak(expected, 1, std::memory_order_acquire,
                                             std::memory_order_relaxed)) {
                return;
            }
            int spins = 0;
            while (state_.load(std::memory_order_relaxed) != 0) {
                detail::cpu_relax();
                // Oversubscribed runs: stop burning the quantum the lock
                // holder needs.
                if (++spins == 1024) {
                    spins = 0;
                    std::this_thread::yield();
                }
            }
        }
    }

    void unlock() { state_.store(0, std::memory_order_release); }

    /// Enter an exclusive (writer-capable) section. Under Htm this first
    /// attempts retry_limit hardware transactions subscribed to the lock
    /// word, then degrades to the lock. Must stay inlined so a transaction
    /// abort resumes in the caller's live frame.
    BTTREE_ALWAYS_INLINE Mode enter_exclusive() {
#if BTTREE_HTM_X86
        if (policy_ == SyncPolicy::Htm && detail::htm_supported()) {
            for (int attempt = 0; attempt < retry_limit_; ++attempt) {
                const unsigned status = detail::txn_begin();
                if (status == detail::kTxnStarted) {
                    if (!is_locked()) {
                        return Mode::Speculative;
                    }
                    detail::txn_abort();
                }
                while (is_locked()) {
                    detail::cpu_relax();
                }
            }
        }
#endif
        lock();
        seq_.fetch_add(1, std::memory_order_relaxed);
        std::atomic_thread_fence(std::memory_order_release);
        return Mode::Locked;
    }

    void exit_exclusive(Mode mode) {
#if BTTREE_HTM_X86
        if (mode == Mode::Speculative) {
            detail::txn_end();
            return;
        }
#else
        (void)mode;
#endif
        seq_.fetch_add(1, std::memory_order_release);
        unlock();
    }

    /// Begin an optimistic read attempt. Invalid when a writer is mid-section.
    ReadTicket begin_optimistic() const {
        const std::uint64_t s = seq_.load(std::memory_order_acquire);
        return {s, (s & 1) == 0};
    }

    /// True iff no writer section overlapped the reads since the ticket.
    bool validate(const ReadTicket& t) const {
        std::atomic_thread_fence(std::memory_order_acquire);
        return seq_.load(std::memory_order_relaxed) == t.seq;
    }

    /// Run `body` under read semantics for this lock's policy. body(mode)
    /// returns false to discard the attempt (detected inconsistency); a
    /// speculative attempt also fails when end validation fails. After
    /// retry_limit failed speculative attempts the reader takes the lock, so
    /// with the default limit of 2 the pessimistic path runs on attempt 3.
    template <class Body>
    BTTREE_ALWAYS_INLINE void run_read(Body&& body) const {
        auto* self = const_cast<ElidableLock*>(this);
        switch (policy_) {
            case SyncPolicy::Mutex: {
                self->lock();
                (void)body(Mode::Locked);
                self->unlock();
                return;
            }
            case SyncPolicy::Seqlock: {
                for (int failures = 0; failures < retry_limit_; ++failures) {
                    const ReadTicket t = begin_optimistic();
                    if (t.valid && body(Mode::Speculative) && validate(t)) {
                        return;
                    }
                }
                self->lock();
                (void)body(Mode::Locked);
                self->unlock();
                return;
            }
            case SyncPolicy::Htm: {
                for (;;) {
                    const Mode mode = self->enter_exclusive();
                    const bool ok = body(mode);
                    self->exit_exclusive(mode);
                    if (ok || mode == Mode::Locked) {
                        return;
                    }
                }
            }
        }
    }

private:
    std::atomic<std::uint32_t> state_{0};
    std::atomic<std::uint64_t> seq_{0};
    SyncPolicy policy_;
    int retry_limit_;
};

}  // namespace bttree
