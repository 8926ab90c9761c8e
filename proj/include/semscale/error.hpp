#pragma once

#include <stdexcept>
#include <string>

namespace semscale {

class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent configuration (CLI exit code 2).
class ConfigError : public Error
{
public:
  using Error::Error;
};

// Input data that violates a contract: x > y, unknown doc ids, truncated files (exit code 3).
class DataError : public Error
{
public:
  using Error::Error;
};

// An upstream artifact a stage depends on is missing (exit code 3).
class MissingInputError : public DataError
{
public:
  using DataError::DataError;
};

// Numerical degeneracy: zero variance, empty split, unimodal density.
class NumericalError : public Error
{
public:
  using Error::Error;
};

// Retryable transport failure talking to the classifier.
class TransportError : public Error
{
public:
  TransportError(std::string doc_id, const std::string& what)
    : Error(what), doc_id_(std::move(doc_id))
  {}
  const std::string& doc_id() const { return doc_id_; }

private:
  std::string doc_id_;
};

// The classifier answered but the payload does not match the wire contract.
class ProtocolError : public Error
{
public:
  using Error::Error;
};

// The sampler could not initialize or adapt.
class SamplerError : public Error
{
public:
  using Error::Error;
};

} // namespace semscale
