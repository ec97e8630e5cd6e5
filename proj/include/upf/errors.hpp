#pragma once

#include <stdexcept>
#include <string>

namespace upf {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or referentially broken input data.
class DataError : public Error {
 public:
  using Error::Error;
};

// A required input file or upstream artifact does not exist.
class MissingInputError : public Error {
 public:
  explicit MissingInputError(const std::string& path)
      : Error("missing input: " + path), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// An internal invariant was violated or a precondition of an operation was not met.
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace upf
