#pragma once

#include <stdexcept>
#include <string>

namespace safemarl {

// Non-finite or malformed numeric input to a pure operation.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A state that the world model forbids (agent outside the wall, ...).
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Barrier quantity evaluated outside its domain (h <= 0).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss or parameter.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& reason, int episode)
      : std::runtime_error(reason + " (episode " + std::to_string(episode) + ")"),
        reason_(reason),
        episode_(episode) {}
  const std::string& reason() const noexcept { return reason_; }
  int episode() const noexcept { return episode_; }

 private:
  std::string reason_;
  int episode_;
};

// Run artifacts (checkpoints, CSVs) that are missing or do not match what the reader expects.
class ArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace safemarl
