#pragma once

#include <stdexcept>
#include <string>

namespace afex {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Whole file as a string; throws IoError when unreadable.
std::string read_file(const std::string& path);

/// Writes via a temp file in the same directory followed by a rename, so a
/// crash never leaves a half-written file behind.
void atomic_write_file(const std::string& path, const std::string& content);

}  // namespace afex
