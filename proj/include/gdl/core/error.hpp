#pragma once

#include <stdexcept>
#include <string>

namespace gdl {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents or feature widths that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyperparameter or layer configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Caller violated an operation's precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

class EmptySetError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class NonManifoldError : public Error {
 public:
  using Error::Error;
};

class IndexRangeError : public Error {
 public:
  using Error::Error;
};

class ChannelLengthError : public Error {
 public:
  using Error::Error;
};

class DegenerateFaceError : public Error {
 public:
  using Error::Error;
};

class DecimationError : public Error {
 public:
  using Error::Error;
};

class VoxelizationError : public Error {
 public:
  using Error::Error;
};

class SplitError : public Error {
 public:
  using Error::Error;
};

class UnknownChannelError : public Error {
 public:
  using Error::Error;
};

class PoolingError : public Error {
 public:
  using Error::Error;
};

class AsymmetricAdjacencyError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

class BadMagicError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class VersionMismatchError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class TruncatedCheckpointError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class ArchitectureMismatchError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

}  // namespace gdl
