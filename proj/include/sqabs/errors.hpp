#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sqabs {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input set too small or rank-deficient for the requested operation.
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

class UnknownFormat : public Error {
 public:
  using Error::Error;
};

class MalformedRecord : public Error {
 public:
  MalformedRecord(const std::string& path, std::size_t line, const std::string& what)
      : Error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class EmptyCloud : public Error {
 public:
  using Error::Error;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace sqabs
