#pragma once

#include <stdexcept>
#include <string>

namespace bbt {

// Bad input: malformed files, failed validation, unknown configuration keys.
// The CLI maps this to exit status 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Failures while executing a valid request (I/O, numerical divergence).
// The CLI maps this to exit status 2.
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string at_line(const std::string& path, std::size_t line_no) {
  return path + ": line " + std::to_string(line_no) + ": ";
}

}  // namespace bbt
