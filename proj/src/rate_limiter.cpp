#include "avcap/rate_limiter.hpp"

#include <algorithm>
#include <stdexcept>

namespace avcap {

namespace {
constexpr auto kWindow = std::chrono::seconds(60);
}

SlidingWindowRateLimiter::SlidingWindowRateLimiter(int per_minute, std::shared_ptr<Clock> clock)
    : limit_(per_minute), clock_(std::move(clock)) {
    if (limit_ <= 0) throw std::invalid_argument("rate limit must be positive");
}

void SlidingWindowRateLimiter::acquire() {
    while (true) {
        std::chrono::milliseconds wait{0};
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto now = clock_->now();
            while (!admissions_.empty() && admissions_.front() + kWindow <= now)
                admissions_.pop_front();
            if (admissions_.size() < size_t(limit_)) {
                admissions_.push_back(now);
                return;
            }
            wait = std::max(std::chrono::milliseconds(1),
                            std::chrono::duration_cast<std::chrono::milliseconds>(
                                admissions_.front() + kWindow - now));
        }
        clock_->sleep_for(wait);
    }
}

size_t SlidingWindowRateLimiter::in_window() const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto now = clock_->now();
    size_t n = 0;
    for (const auto& t : admissions_) {
        if (t + kWindow > now) ++n;
    }
    return n;
}

}  // namespace avcap
