#pragma once

#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "tapkit/tapkit.hpp"

namespace tapkit::testing {

inline Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double bound = 1.0) {
    return uniform_matrix(r, c, bound, rng);
}

/// Runs `fn` and reports whether it threw a tapkit::Error of `kind`.
template <class Fn>
::testing::AssertionResult throws_kind(Fn&& fn, ErrorKind kind) {
    try {
        fn();
    } catch (const Error& e) {
        if (e.kind() == kind) return ::testing::AssertionSuccess();
        return ::testing::AssertionFailure() << "wrong kind: " << e.what();
    } catch (const std::exception& e) {
        return ::testing::AssertionFailure() << "foreign exception: " << e.what();
    }
    return ::testing::AssertionFailure() << "nothing thrown";
}

/// Collects warnings for the lifetime of the object.
struct WarningLog {
    std::vector<std::string> messages;
    ScopedWarningHandler scope{[this](const std::string& m) { messages.push_back(m); }};
};

} // namespace tapkit::testing
