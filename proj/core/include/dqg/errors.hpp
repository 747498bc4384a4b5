#pragma once

#include <stdexcept>
#include <string>

namespace dqg {

// Every failure raised by the library derives from Error. `kind()` is a
// stable machine-readable tag; the CLI prints it verbatim.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& m) : Error("dimension", m) {}
};

class IndexError : public Error {
 public:
  explicit IndexError(const std::string& m) : Error("index", m) {}
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& m) : Error("contract", m) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& m) : Error("numeric", m) {}
};

class AlignmentError : public Error {
 public:
  explicit AlignmentError(const std::string& m) : Error("alignment", m) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& m) : Error("parse", m) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& m) : Error("io", m) {}
};

class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& m) : Error("training", m) {}
};

class CheckpointError : public Error {
 protected:
  CheckpointError(std::string kind, const std::string& m) : Error(std::move(kind), m) {}
};

class CheckpointVersionError : public CheckpointError {
 public:
  explicit CheckpointVersionError(const std::string& m) : CheckpointError("checkpoint_version", m) {}
};

class CheckpointManifestError : public CheckpointError {
 public:
  explicit CheckpointManifestError(const std::string& m) : CheckpointError("checkpoint_manifest", m) {}
};

class CheckpointTruncatedError : public CheckpointError {
 public:
  explicit CheckpointTruncatedError(const std::string& m) : CheckpointError("checkpoint_truncated", m) {}
};

}  // namespace dqg
