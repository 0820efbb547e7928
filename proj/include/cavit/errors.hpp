#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cavit {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand extents do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

class RankError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

/// A model or run configuration violates one of its invariants.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An operation was called with arguments outside its contract.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// An object was used in a state that forbids the call (e.g. a second backward pass).
class StateError : public Error {
 public:
  using Error::Error;
};

/// The requested feature is not available for this model variant.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value appeared where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Failure while decoding one of the binary file formats.
class FormatError : public Error {
 public:
  enum class Kind {
    kBadMagic,
    kBadVersion,
    kTruncated,
    kInvalidValue,
    kShapeMismatch,
    kMissingTensor,
  };

  FormatError(Kind kind, std::uint64_t offset, const std::string& what)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        kind_(kind),
        offset_(offset) {}

  Kind kind() const noexcept { return kind_; }
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  Kind kind_;
  std::uint64_t offset_;
};

}  // namespace cavit
