// errors.hpp
// Exception hierarchy shared by all tdm modules.

#pragma once

#include <stdexcept>
#include <string>

namespace tdm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller passed something that violates a documented precondition.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// A file (BRAT, CoNLL, model) does not parse; message carries location.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Two annotations of identical extent carry different labels (strict mode).
class AnnotationConflict : public Error {
 public:
  using Error::Error;
};

// Non-finite value encountered during scoring or optimization.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Input uses a documented-but-unsupported construct (e.g. discontinuous spans).
class Unsupported : public Error {
 public:
  using Error::Error;
};

}  // namespace tdm
