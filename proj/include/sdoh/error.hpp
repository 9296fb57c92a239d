#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace sdoh {

// Library-wide exception. `kind` is a stable machine-checkable tag
// ("SurfaceMismatch", "UntrainedModel", ...), the message is free text.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

[[noreturn]] inline void raise(std::string kind, const std::string& message) {
  throw Error(std::move(kind), message);
}

}  // namespace sdoh
