#pragma once

#include <stdexcept>
#include <string>

namespace mg {

enum class ErrorCode {
    invalid_argument,
    shape_mismatch,
    io,
    corrupt_file,
    version_mismatch,
    task_mismatch,
    numeric,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace mg
