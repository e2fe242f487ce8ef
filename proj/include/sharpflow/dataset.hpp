#pragma once

#include "sharpflow/activation.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <string>

namespace sharpflow {

struct Dataset {
  Eigen::MatrixXd X;  // d x n, unit-norm columns
  Eigen::VectorXd y;  // n
  double mu = 0.0;
  bool low_dimensional = false;  // n > d, so X^T X is singular

  int d() const { return int(X.rows()); }
  int n() const { return int(X.cols()); }
  std::uint64_t hash() const;
};

enum class LabelMode { UniformBox, Realizable };

struct GenerateOptions {
  double mu_min = 0.0;
  int max_retries = 100;
  double label_lo = 0.0;
  double label_hi = 1.0;
  // Realizable mode: y_i = m * phi(v_i), v_i drawn uniform in [label_lo, label_hi].
  int m = 1;
  ActivationSpec spec = odd_poly(1, 1.0);
};

double coherence(const Eigen::MatrixXd& X);

Dataset make_dataset(Eigen::MatrixXd X, Eigen::VectorXd y);

Dataset generate_dataset(int n, int d, LabelMode mode, std::uint64_t seed,
                         const GenerateOptions& opt = {});

void write_dataset_csv(const Dataset& data, const std::string& path);
Dataset read_dataset_csv(const std::string& path);

std::uint64_t fnv1a(const void* bytes, std::size_t len, std::uint64_t h = 1469598103934665603ULL);

}  // namespace sharpflow
