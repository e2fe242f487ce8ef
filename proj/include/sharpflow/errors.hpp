#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace sharpflow {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
  using Error::Error;
};

class ContractViolation : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class SolverFailure : public Error {
public:
  SolverFailure(const std::string& what, double lo, double hi)
      : Error(what), bracket_lo(lo), bracket_hi(hi) {}
  double bracket_lo;
  double bracket_hi;
};

class OffManifold : public Error {
public:
  OffManifold(const std::string& what, double residual)
      : Error(what), residual_inf(residual) {}
  double residual_inf;
};

class DegenerateJacobian : public Error {
public:
  DegenerateJacobian(const std::string& what, double lambda_min)
      : Error(what), smallest_eigenvalue(lambda_min) {}
  double smallest_eigenvalue;
};

class RetractionFailure : public Error {
public:
  RetractionFailure(const std::string& what, std::vector<double> history)
      : Error(what), residual_history(std::move(history)) {}
  std::vector<double> residual_history;
};

class Divergence : public Error {
public:
  using Error::Error;
};

class InsufficientSamples : public Error {
public:
  using Error::Error;
};

class CoherenceUnreachable : public Error {
public:
  CoherenceUnreachable(const std::string& what, double best_mu)
      : Error(what), best(best_mu) {}
  double best;
};

}  // namespace sharpflow
