#ifndef ADVPC_ERRORS_HPP
#define ADVPC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace advpc {

// Root of every error this library throws on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  // Short machine-parsable category, e.g. "contract" or "file-format".
  virtual const char* kind() const { return "error"; }
};

// A caller violated a documented precondition (shape mismatch, bad label,
// negative budget, consumed tape, ...).
class ContractError : public Error {
 public:
  using Error::Error;
  const char* kind() const override { return "contract"; }
};

// Gradient with L1 mass below the usable threshold.
class DegenerateGradientError : public Error {
 public:
  using Error::Error;
  const char* kind() const override { return "degenerate-gradient"; }
};

// Non-finite value produced while integrating an ODE.
class IntegrationError : public Error {
 public:
  using Error::Error;
  const char* kind() const override { return "integration"; }
};

// Fixed-point solve of an implicit step did not converge.
class ImplicitSolveError : public Error {
 public:
  using Error::Error;
  const char* kind() const override { return "implicit-solve"; }
};

// Training loss went non-finite.
class TrainingError : public Error {
 public:
  using Error::Error;
  const char* kind() const override { return "training"; }
};

// Filesystem failure, reported with the offending path.
class IoError : public Error {
 public:
  using Error::Error;
  const char* kind() const override { return "io"; }
};

// Structurally broken binary file. The subclasses keep the failure kinds
// distinguishable so callers (and tests) can tell them apart.
class FileFormatError : public Error {
 public:
  using Error::Error;
  const char* kind() const override { return "file-format"; }
};
class BadMagicError : public FileFormatError {
 public:
  using FileFormatError::FileFormatError;
  const char* kind() const override { return "bad-magic"; }
};
class VersionMismatchError : public FileFormatError {
 public:
  using FileFormatError::FileFormatError;
  const char* kind() const override { return "version-mismatch"; }
};
class TruncatedFileError : public FileFormatError {
 public:
  using FileFormatError::FileFormatError;
  const char* kind() const override { return "truncated-file"; }
};
class ChecksumError : public FileFormatError {
 public:
  using FileFormatError::FileFormatError;
  const char* kind() const override { return "checksum"; }
};

// A model-evaluation subset came out empty (e.g. no correctly classified
// examples to attack).
class EmptySubsetError : public Error {
 public:
  using Error::Error;
  const char* kind() const override { return "empty-subset"; }
};

}  // namespace advpc

#endif  // ADVPC_ERRORS_HPP
