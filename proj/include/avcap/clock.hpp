#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <thread>

namespace avcap {

// Injectable clock so rate limiting and retry backoff are testable
// without real sleeps.
class Clock {
public:
    virtual ~Clock() = default;
    virtual std::chrono::steady_clock::time_point now() const = 0;
    virtual void sleep_for(std::chrono::milliseconds d) = 0;
};

class SystemClock final : public Clock {
public:
    std::chrono::steady_clock::time_point now() const override {
        return std::chrono::steady_clock::now();
    }
    void sleep_for(std::chrono::milliseconds d) override { std::this_thread::sleep_for(d); }
};

// Virtual clock: sleep_for advances time instantly.
class VirtualClock final : public Clock {
public:
    std::chrono::steady_clock::time_point now() const override {
        std::lock_guard<std::mutex> lock(mutex_);
        return now_;
    }
    void sleep_for(std::chrono::milliseconds d) override {
        std::lock_guard<std::mutex> lock(mutex_);
        now_ += d;
    }
    void advance(std::chrono::milliseconds d) { sleep_for(d); }

private:
    mutable std::mutex mutex_;
    std::chrono::steady_clock::time_point now_{};
};

inline std::shared_ptr<Clock> system_clock() {
    static auto instance = std::make_shared<SystemClock>();
    return instance;
}

}  // namespace avcap
