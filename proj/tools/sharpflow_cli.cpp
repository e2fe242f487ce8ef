#include "sharpflow/errors.hpp"
#include "sharpflow/experiment.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace sharpflow;

int main(int argc, char** argv) {
#ifdef _OPENMP
  if (const char* env = std::getenv("SHARPFLOW_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) omp_set_num_threads(v);
  }
#endif

  CLI::App app{"Sharpness-flow laboratory for two-layer networks"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> stride;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the configured seed");
    sub->add_option("--out", out, "output directory");
    sub->add_option("--stride", stride, "snapshot stride for traces");
  };

  auto* gen = app.add_subcommand("gen-data", "generate a dataset and report its coherence");
  common(gen);
  auto* run = app.add_subcommand("run", "run the configured dynamics and write traces plus a manifest");
  common(run);
  auto* verify = app.add_subcommand("verify", "check traces against the theory and write a verdict");
  common(verify);
  std::vector<std::string> traces;
  std::optional<std::string> data_path;
  verify->add_option("traces", traces, "trace files (JSON lines)")->required();
  verify->add_option("--data", data_path, "dataset CSV (default: regenerate from config)");

  auto* report = app.add_subcommand("report", "turn a run manifest into plot-ready CSV");
  std::string manifest;
  std::optional<std::string> report_out;
  report->add_option("manifest", manifest, "manifest.json written by run")->required();
  report->add_option("--out", report_out, "CSV path (default: report.csv next to the manifest)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (report->parsed()) return cmd_report(manifest, report_out, std::cout);
    ExperimentConfig cfg = load_config(config_path);
    apply_overrides(cfg, Overrides{seed, out, stride});
    if (gen->parsed()) return cmd_gen_data(cfg, std::cout);
    if (run->parsed()) return cmd_run(cfg, std::cout);
    if (verify->parsed()) return cmd_verify(traces, cfg, data_path, std::cout);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const CoherenceUnreachable& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DimensionMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ContractViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "dynamics error: " << e.what() << "\n";
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
