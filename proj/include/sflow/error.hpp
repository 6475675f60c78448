#pragma once

#include <stdexcept>
#include <string>

namespace sflow {

// Shape mismatch not resolvable by broadcasting, rank overflow, etc.
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Violated precondition on an operation's arguments.
class ContractError : public std::runtime_error {
 public:
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training aborted (NaN loss); carries the offending batch seed.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& msg, unsigned long long batch_seed)
      : std::runtime_error(msg), batch_seed_(batch_seed) {}
  unsigned long long batch_seed() const { return batch_seed_; }

 private:
  unsigned long long batch_seed_;
};

}  // namespace sflow
