#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace avcap {

// Error carried by Result<T>. `path` points at the offending input location
// (JSON path, line number, byte offset) when one exists.
struct Error {
    std::string message;
    std::string path;

    std::string to_string() const {
        if (path.empty()) return message;
        return message + " (at " + path + ")";
    }
};

// Minimal value-or-error type used across parsers and validators.
// Store/config layers throw instead; see store.hpp.
template <typename T>
class Result {
public:
    Result(T value) : value_(std::move(value)) {}
    Result(Error error) : error_(std::move(error)) {}

    static Result ok(T value) { return Result(std::move(value)); }
    static Result fail(std::string message, std::string path = "") {
        return Result(Error{std::move(message), std::move(path)});
    }

    bool has_value() const { return value_.has_value(); }
    explicit operator bool() const { return has_value(); }

    const T& value() const& {
        if (!value_) throw std::logic_error("Result::value on error: " + error_->to_string());
        return *value_;
    }
    T&& take() {
        if (!value_) throw std::logic_error("Result::take on error: " + error_->to_string());
        return std::move(*value_);
    }
    const Error& error() const {
        if (!error_) throw std::logic_error("Result::error on ok result");
        return *error_;
    }

private:
    std::optional<T> value_;
    std::optional<Error> error_;
};

}  // namespace avcap
