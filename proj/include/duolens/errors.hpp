#pragma once

#include <stdexcept>
#include <string>

namespace duolens {

// Errors caused by bad inputs (shapes, files, corpora, configs). The CLI maps
// these to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public DataError {
 public:
  using DataError::DataError;
};

class BundleError : public DataError {
 public:
  using DataError::DataError;
};

class TokenizerError : public DataError {
 public:
  using DataError::DataError;
};

class CorpusError : public DataError {
 public:
  using DataError::DataError;
};

class ConfigError : public DataError {
 public:
  using DataError::DataError;
};

// Broken invariants inside the engine (exit code 3).
class InternalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace duolens
