#pragma once

#include <stdexcept>
#include <string>

namespace zakai {

enum class ErrorCode {
  invalid_argument,  // precondition / configuration violation
  divergence,        // stepper produced a non-finite or degenerate state
  degenerate_state,  // vanishing normalizer in a moment/density query
  mass_loss,         // basis transition lost too much L2 mass
  io                 // file / parse problem
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode c, const std::string& msg) {
  throw Error(c, msg);
}

inline void require(bool cond, ErrorCode c, const std::string& msg) {
  if (!cond) fail(c, msg);
}

}  // namespace zakai
