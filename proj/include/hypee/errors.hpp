#pragma once

#include <stdexcept>
#include <string>

namespace hypee {

// Numeric failure during a computation (divergence, overflow guard, ...).
// CLI maps this to exit code 4.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Data / file-format failure. CLI maps this to exit code 3.
class IoError : public std::runtime_error {
public:
    enum class Code {
        not_found,
        bad_magic,
        bad_version,
        truncated,
        bad_payload,
        schema,
        write_failed,
    };

    IoError(Code code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    Code code() const { return code_; }

private:
    Code code_;
};

// Invalid configuration or usage. CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace hypee
