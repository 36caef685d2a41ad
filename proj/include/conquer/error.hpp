#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace conquer {

//! Argument outside its mathematical domain (tau, bandwidth, alpha, ...).
class DomainError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

//! Problems with the supplied data: shapes, parse failures, degenerate designs.
class DataError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public DataError
{
public:
  using DataError::DataError;
};

class DegenerateDesignError : public DataError
{
public:
  DegenerateDesignError(std::size_t column, const std::string& what)
    : DataError(what)
    , column_(column)
  {}
  std::size_t column() const { return column_; }

private:
  std::size_t column_;
};

class ParseError : public DataError
{
public:
  ParseError(std::size_t row, std::size_t column, const std::string& what)
    : DataError(what)
    , row_(row)
    , column_(column)
  {}
  std::size_t row() const { return row_; }
  std::size_t column() const { return column_; }

private:
  std::size_t row_;
  std::size_t column_;
};

//! Failures of a numerical procedure on otherwise valid input.
class NumericalError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class NumericalDivergenceError : public NumericalError
{
public:
  NumericalDivergenceError(int iteration, const std::string& what)
    : NumericalError(what)
    , iteration_(iteration)
  {}
  int iteration() const { return iteration_; }

private:
  int iteration_;
};

class SingularHessianError : public NumericalError
{
public:
  using NumericalError::NumericalError;
};

class NonPositiveDefiniteError : public NumericalError
{
public:
  using NumericalError::NumericalError;
};

class UnreliableInferenceError : public NumericalError
{
public:
  using NumericalError::NumericalError;
};

class BudgetExceededError : public NumericalError
{
public:
  using NumericalError::NumericalError;
};

} // namespace conquer
