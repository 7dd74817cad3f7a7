#pragma once

#include <chrono>
#include <deque>
#include <memory>
#include <mutex>

#include "avcap/clock.hpp"

namespace avcap {

// Sliding-window limiter: never admits more than `per_minute` calls in any
// 60 s window. Blocks through the injected clock, so tests run on virtual time.
class SlidingWindowRateLimiter {
public:
    SlidingWindowRateLimiter(int per_minute, std::shared_ptr<Clock> clock);

    void acquire();

    // Admission timestamps still inside the current window (for tests).
    size_t in_window() const;

private:
    int limit_;
    std::shared_ptr<Clock> clock_;
    mutable std::mutex mutex_;
    std::deque<std::chrono::steady_clock::time_point> admissions_;
};

}  // namespace avcap
