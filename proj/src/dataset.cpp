#include "sharpflow/dataset.hpp"

#include "sharpflow/errors.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

namespace sharpflow {

std::uint64_t fnv1a(const void* bytes, std::size_t len, std::uint64_t h) {
  auto p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t Dataset::hash() const {
  std::int64_t dims[2] = {X.rows(), X.cols()};
  std::uint64_t h = fnv1a(dims, sizeof dims);
  h = fnv1a(X.data(), sizeof(double) * X.size(), h);
  return fnv1a(y.data(), sizeof(double) * y.size(), h);
}

double coherence(const Eigen::MatrixXd& X) {
  if (X.cols() == 0) return 0.0;
  Eigen::MatrixXd G = X.transpose() * X;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

Dataset make_dataset(Eigen::MatrixXd X, Eigen::VectorXd y) {
  if (X.cols() != y.size())
    throw DimensionMismatch("dataset: X has " + std::to_string(X.cols()) + " columns but y has " +
                            std::to_string(y.size()) + " entries");
  if (!X.allFinite() || !y.allFinite()) throw ContractViolation("dataset: non-finite entries");
  for (int i = 0; i < X.cols(); ++i) {
    double nrm = X.col(i).norm();
    if (std::abs(nrm - 1.0) > 1e-12)
      throw ContractViolation("dataset: column " + std::to_string(i) + " has norm " + std::to_string(nrm));
  }
  Dataset ds;
  ds.X = std::move(X);
  ds.y = std::move(y);
  ds.low_dimensional = ds.n() > ds.d();
  ds.mu = ds.low_dimensional ? 0.0 : std::max(coherence(ds.X), 0.0);
  return ds;
}

Dataset generate_dataset(int n, int d, LabelMode mode, std::uint64_t seed, const GenerateOptions& opt) {
  if (n < 1 || d < 1) throw ConfigError("generate_dataset: n and d must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> lab(opt.label_lo, opt.label_hi);
  double best = -1.0;
  for (int attempt = 0; attempt <= opt.max_retries; ++attempt) {
    Eigen::MatrixXd X(d, n);
    for (int i = 0; i < n; ++i)
      for (int r = 0; r < d; ++r) X(r, i) = unit(rng);
    for (int i = 0; i < n; ++i) X.col(i) /= X.col(i).norm();
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      double v = lab(rng);
      y(i) = mode == LabelMode::Realizable ? opt.m * eval_activation(opt.spec, v).phi : v;
    }
    Dataset ds = make_dataset(std::move(X), std::move(y));
    if (ds.low_dimensional || ds.mu >= opt.mu_min) return ds;
    best = std::max(best, ds.mu);
  }
  std::ostringstream os;
  os << "generate_dataset: coherence " << opt.mu_min << " not reached after " << opt.max_retries
     << " retries (best " << best << ")";
  throw CoherenceUnreachable(os.str(), best);
}

void write_dataset_csv(const Dataset& data, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ConfigError("cannot write dataset file " + path);
  std::fprintf(f, "%d,%d\n", data.d(), data.n());
  for (int r = 0; r < data.d(); ++r)
    for (int i = 0; i < data.n(); ++i) std::fprintf(f, i + 1 < data.n() ? "%.17g," : "%.17g\n", data.X(r, i));
  for (int i = 0; i < data.n(); ++i) std::fprintf(f, i + 1 < data.n() ? "%.17g," : "%.17g\n", data.y(i));
  std::fclose(f);
}

namespace {
std::vector<double> split_row(const std::string& line, const std::string& path, int lineno) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
    }
  }
  return out;
}
}  // namespace

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset file " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": empty file");
  auto head = split_row(line, path, 1);
  if (head.size() != 2 || head[0] < 1 || head[1] < 1 || head[0] != std::floor(head[0]) ||
      head[1] != std::floor(head[1]))
    throw ConfigError(path + ":1: expected 'd,n'");
  int d = int(head[0]), n = int(head[1]);
  Eigen::MatrixXd X(d, n);
  Eigen::VectorXd y(n);
  for (int r = 0; r <= d; ++r) {
    if (!std::getline(in, line)) throw ConfigError(path + ": truncated, expected " + std::to_string(d + 2) + " rows");
    auto row = split_row(line, path, r + 2);
    if (int(row.size()) != n) throw ConfigError(path + ":" + std::to_string(r + 2) + ": expected " + std::to_string(n) + " values");
    for (int i = 0; i < n; ++i) (r < d ? X(r, i) : y(i)) = row[i];
  }
  return make_dataset(std::move(X), std::move(y));
}

}  // namespace sharpflow
