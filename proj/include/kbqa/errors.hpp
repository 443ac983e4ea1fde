#pragma once

#include <stdexcept>
#include <string>

namespace kbqa {

// Process exit codes, one per failure family. The CLI maps exceptions to
// these; library code just throws.
enum class ExitCode : int {
    ok = 0,
    internal = 1,
    config = 2,
    data = 3,
    numeric = 4,
};

// Bad configuration: unknown key, wrong type, out-of-range value,
// incompatible checkpoint/config combinations.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input data: malformed triple/question files, unknown entities,
// missing splits.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numeric contract violations: shape mismatches, non-finite losses,
// backward on a non-scalar.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace kbqa
