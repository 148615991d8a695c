#pragma once

#include <functional>
#include <mutex>
#include <iostream>
#include <stdexcept>
#include <string>
#include <utility>

namespace tapkit {

/// Error classes surfaced by the library. The CLI maps each kind to its own
/// exit code, so keep the numbering stable.
enum class ErrorKind {
    dimension = 10,
    input = 11,
    index = 12,
    numeric = 13,
    parse = 14,
    validation = 15,
    format = 16,
    config = 17,
    io = 18,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::dimension: return "dimension error";
    case ErrorKind::input: return "input error";
    case ErrorKind::index: return "index error";
    case ErrorKind::numeric: return "numeric error";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::validation: return "validation error";
    case ErrorKind::format: return "format error";
    case ErrorKind::config: return "config error";
    case ErrorKind::io: return "io error";
    }
    return "error";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Non-fatal diagnostics (degenerate instances, normalized input). Defaults
/// to stderr; tests and the CLI may install their own sink.
using WarningHandler = std::function<void(const std::string&)>;

namespace detail {
inline std::mutex& warning_mutex() {
    static std::mutex m;
    return m;
}
inline WarningHandler& warning_handler() {
    static WarningHandler handler = [](const std::string& msg) {
        std::cerr << "warning: " << msg << '\n';
    };
    return handler;
}
} // namespace detail

inline WarningHandler set_warning_handler(WarningHandler handler) {
    std::lock_guard lock(detail::warning_mutex());
    return std::exchange(detail::warning_handler(), std::move(handler));
}

inline void warn(const std::string& msg) {
    std::lock_guard lock(detail::warning_mutex());
    if (detail::warning_handler()) detail::warning_handler()(msg);
}

/// Installs a handler for the lifetime of the guard.
class ScopedWarningHandler {
public:
    explicit ScopedWarningHandler(WarningHandler handler)
        : previous_(set_warning_handler(std::move(handler))) {}
    ~ScopedWarningHandler() { set_warning_handler(std::move(previous_)); }
    ScopedWarningHandler(const ScopedWarningHandler&) = delete;
    ScopedWarningHandler& operator=(const ScopedWarningHandler&) = delete;

private:
    WarningHandler previous_;
};

} // namespace tapkit
