#pragma once

#include <stdexcept>
#include <string>

namespace bayesrx {

// Error categories map 1:1 onto CLI exit codes.
enum class ErrorCode : int {
  invalid_input = 1,
  config = 2,
  training = 3,
  io = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string msg) : std::runtime_error(std::move(msg)), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

struct InvalidInput : Error {
  explicit InvalidInput(std::string msg) : Error(ErrorCode::invalid_input, std::move(msg)) {}
};

struct ConfigError : Error {
  explicit ConfigError(std::string msg) : Error(ErrorCode::config, std::move(msg)) {}
};

struct TrainingError : Error {
  explicit TrainingError(std::string msg) : Error(ErrorCode::training, std::move(msg)) {}
};

struct IoError : Error {
  explicit IoError(std::string msg) : Error(ErrorCode::io, std::move(msg)) {}
};

}  // namespace bayesrx
