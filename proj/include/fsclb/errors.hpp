#pragma once

#include <stdexcept>
#include <string>

namespace fsclb {

// Base for everything the library throws on contract violations.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidMatrix : public Error {
 public:
  using Error::Error;
};

class InvalidVector : public Error {
 public:
  using Error::Error;
};

class InvalidSpectrum : public Error {
 public:
  using Error::Error;
};

class InvalidRegularizer : public Error {
 public:
  using Error::Error;
};

class InvalidState : public Error {
 public:
  using Error::Error;
};

class InvalidConfidence : public Error {
 public:
  using Error::Error;
};

class NoArms : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace fsclb
