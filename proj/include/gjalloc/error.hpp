#pragma once

#include <stdexcept>
#include <string>

namespace gja {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A slot count exceeds what a datacenter can hold.
class CapacityError : public Error {
 public:
  CapacityError(int dc, const std::string& what) : Error(what), dc_(dc) {}
  int dc() const { return dc_; }

 private:
  int dc_;
};

// Malformed input. `path` names the offending field, e.g. "topology.m".
class ValidationError : public Error {
 public:
  ValidationError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// No feasible allocation exists for the request.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// An exhaustive routine was asked to work beyond its configured bound.
class SizeLimitError : public Error {
 public:
  using Error::Error;
};

}  // namespace gja
