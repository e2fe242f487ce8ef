#pragma once

#include "sharpflow/analysis.hpp"

#include <cstdint>
#include <iosfwd>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

namespace sharpflow {

inline constexpr const char* kVersion = "0.3.0";

enum class Dynamics { Euclidean, Riemannian, Sgd, Full };

struct DataConfig {
  LabelMode mode = LabelMode::UniformBox;
  double mu_min = 0.0;
  int max_retries = 100;
  double label_lo = 0.0;
  double label_hi = 1.0;
  std::string path;  // load from CSV instead of generating
};

struct ExperimentConfig {
  ActivationSpec activation = odd_poly(1, 1.0);
  int n = 3, d = 5, m = 10;
  std::uint64_t seed = 1;
  int repeats = 1;
  DataConfig data;
  double init_scale = 0.3;
  Dynamics dynamics = Dynamics::Riemannian;
  IntegratorConfig integrator;  // riemannian flow, or phase 2 of the full pipeline
  IntegratorConfig phase1;      // euclidean flow
  SgdConfig sgd;
  bool checks = true;
  std::string out_dir = "out";

  nlohmann::json raw;  // the validated input, echoed into manifests
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> stride;
};
void apply_overrides(ExperimentConfig& cfg, const Overrides& o);

std::uint64_t data_seed(const ExperimentConfig& cfg);
std::uint64_t init_seed(const ExperimentConfig& cfg, int repeat);
std::uint64_t noise_seed(const ExperimentConfig& cfg, int repeat);

Dataset obtain_dataset(const ExperimentConfig& cfg);
Params initial_params(const ExperimentConfig& cfg, const Dataset& data, int repeat);

std::string file_hash(const std::string& path);

struct RunManifest {
  nlohmann::json config;
  std::string dataset_hash;
  std::string version = kVersion;
  std::vector<std::string> traces;
  std::vector<std::string> verdicts;
  std::string data_path;
  double wall_seconds = 0.0;
  std::vector<std::string> errors;
  nlohmann::json file_hashes = nlohmann::json::object();

  nlohmann::json to_json() const;
};

RunManifest read_manifest(const std::string& path);

// Each command returns a process exit code (0 ok, 2 config/io, 3 dynamics,
// 4 verification failure) and writes human-readable progress to log.
int cmd_gen_data(const ExperimentConfig& cfg, std::ostream& log);
int cmd_run(const ExperimentConfig& cfg, std::ostream& log);
int cmd_verify(const std::vector<std::string>& traces, const ExperimentConfig& cfg,
               const std::optional<std::string>& data_path, std::ostream& log);
int cmd_report(const std::string& manifest_path, const std::optional<std::string>& out, std::ostream& log);

// Tidy rows (trace, t, quantity, value) for one trace.
struct ReportRow {
  std::string trace;
  double t;
  std::string quantity;
  double value;
};
std::vector<ReportRow> report_rows(const std::string& name, const FlowTrace& trace, const Dataset& data,
                                   const ActivationSpec& spec);
void write_report_csv(const std::vector<ReportRow>& rows, std::ostream& out);

// Top-two principal component scores of the rows of Theta X (one row per neuron).
Eigen::MatrixXd neuron_pca(const Params& theta, const Dataset& data);

}  // namespace sharpflow
