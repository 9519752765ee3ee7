#pragma once

#include <stdexcept>
#include <string>

namespace cmbert {

// User-facing errors: bad configuration, bad input files, shape mismatches
// caused by caller data. The CLI maps these to exit code 1.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct InputError : std::runtime_error {
  explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Parse failure in a text input, carrying a 1-based line number.
struct ParseError : InputError {
  ParseError(const std::string& msg, std::size_t line)
      : InputError(msg + " (line " + std::to_string(line) + ")"), line_number(line) {}
  std::size_t line_number;
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training run stopped early (non-finite loss); previous checkpoints stay valid.
struct TrainAborted : std::runtime_error {
  explicit TrainAborted(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cmbert
