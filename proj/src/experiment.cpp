#include "sharpflow/experiment.hpp"

#include "sharpflow/errors.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sharpflow {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError("config: unknown field '" + where + it.key() + "'");
  }
}

const json& need_object(const json& j, const std::string& name) {
  if (!j.is_object()) throw ConfigError("config: '" + name + "' must be an object");
  return j;
}

double get_num(const json& obj, const char* key, const std::string& where, double dflt) {
  auto it = obj.find(key);
  if (it == obj.end()) return dflt;
  if (!it->is_number()) throw ConfigError("config: '" + where + key + "' must be a number");
  return it->get<double>();
}

long get_int(const json& obj, const char* key, const std::string& where, long dflt) {
  auto it = obj.find(key);
  if (it == obj.end()) return dflt;
  if (!it->is_number_integer()) throw ConfigError("config: '" + where + key + "' must be an integer");
  return it->get<long>();
}

std::string get_str(const json& obj, const char* key, const std::string& where, const std::string& dflt) {
  auto it = obj.find(key);
  if (it == obj.end()) return dflt;
  if (!it->is_string()) throw ConfigError("config: '" + where + key + "' must be a string");
  return it->get<std::string>();
}

const char* dynamics_name(Dynamics d) {
  switch (d) {
    case Dynamics::Euclidean: return "euclidean";
    case Dynamics::Riemannian: return "riemannian";
    case Dynamics::Sgd: return "sgd";
    case Dynamics::Full: return "full";
  }
  return "?";
}

int thread_cap() {
  if (const char* env = std::getenv("SHARPFLOW_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
}

std::string repeat_dir(const ExperimentConfig& cfg, int r) {
  if (cfg.repeats == 1) return cfg.out_dir;
  std::ostringstream os;
  os << cfg.out_dir << "/run_" << std::setw(3) << std::setfill('0') << r;
  return os.str();
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  need_object(j, "<root>");
  reject_unknown(j, "", {"activation", "dims", "seed", "repeats", "data", "init", "dynamics", "integrator", "phase1",
                         "sgd", "checks", "output"});
  ExperimentConfig c;
  c.raw = j;

  if (j.contains("activation")) {
    const json& a = need_object(j["activation"], "activation");
    reject_unknown(a, "activation.", {"kind", "k", "nu"});
    std::string kind = get_str(a, "kind", "activation.", "odd-poly");
    if (kind == "cube") {
      if (a.contains("k") || a.contains("nu")) throw ConfigError("config: 'activation.k'/'activation.nu' not allowed for cube");
      c.activation = cube();
    } else if (kind == "odd-poly") {
      c.activation = odd_poly(int(get_int(a, "k", "activation.", 1)), get_num(a, "nu", "activation.", 1.0));
    } else {
      throw ConfigError("config: 'activation.kind' must be \"odd-poly\" or \"cube\"");
    }
  }
  if (j.contains("dims")) {
    const json& dm = need_object(j["dims"], "dims");
    reject_unknown(dm, "dims.", {"n", "d", "m"});
    c.n = int(get_int(dm, "n", "dims.", c.n));
    c.d = int(get_int(dm, "d", "dims.", c.d));
    c.m = int(get_int(dm, "m", "dims.", c.m));
    if (c.n < 1 || c.d < 1 || c.m < 1) throw ConfigError("config: 'dims' entries must be positive");
  }
  long seed = get_int(j, "seed", "", 1);
  if (seed < 0) throw ConfigError("config: 'seed' must be non-negative");
  c.seed = std::uint64_t(seed);
  c.repeats = int(get_int(j, "repeats", "", 1));
  if (c.repeats < 1) throw ConfigError("config: 'repeats' must be >= 1");

  if (j.contains("data")) {
    const json& dd = need_object(j["data"], "data");
    reject_unknown(dd, "data.", {"mode", "mu_min", "max_retries", "label_lo", "label_hi", "path"});
    std::string mode = get_str(dd, "mode", "data.", "uniform");
    if (mode == "uniform") c.data.mode = LabelMode::UniformBox;
    else if (mode == "realizable") c.data.mode = LabelMode::Realizable;
    else throw ConfigError("config: 'data.mode' must be \"uniform\" or \"realizable\"");
    c.data.mu_min = get_num(dd, "mu_min", "data.", 0.0);
    c.data.max_retries = int(get_int(dd, "max_retries", "data.", 100));
    c.data.label_lo = get_num(dd, "label_lo", "data.", 0.0);
    c.data.label_hi = get_num(dd, "label_hi", "data.", 1.0);
    c.data.path = get_str(dd, "path", "data.", "");
    if (!(c.data.label_hi >= c.data.label_lo)) throw ConfigError("config: 'data.label_hi' must be >= 'data.label_lo'");
    if (!c.data.path.empty() && !fs::exists(c.data.path))
      throw ConfigError("config: 'data.path' file does not exist: " + c.data.path);
  }
  if (j.contains("init")) {
    const json& in = need_object(j["init"], "init");
    reject_unknown(in, "init.", {"scale"});
    c.init_scale = get_num(in, "scale", "init.", c.init_scale);
    if (!(c.init_scale >= 0)) throw ConfigError("config: 'init.scale' must be >= 0");
  }
  std::string dyn = get_str(j, "dynamics", "", "riemannian");
  if (dyn == "euclidean") c.dynamics = Dynamics::Euclidean;
  else if (dyn == "riemannian") c.dynamics = Dynamics::Riemannian;
  else if (dyn == "sgd") c.dynamics = Dynamics::Sgd;
  else if (dyn == "full") c.dynamics = Dynamics::Full;
  else throw ConfigError("config: 'dynamics' must be one of euclidean, riemannian, sgd, full");

  try {
    if (j.contains("integrator")) c.integrator = integrator_from_json(j["integrator"]);
    if (j.contains("phase1")) c.phase1 = integrator_from_json(j["phase1"]);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (j.contains("sgd")) {
    const json& s = need_object(j["sgd"], "sgd");
    reject_unknown(s, "sgd.", {"eta", "sigma", "iterations", "stride", "divergence_bound"});
    c.sgd.eta = get_num(s, "eta", "sgd.", c.sgd.eta);
    c.sgd.sigma = get_num(s, "sigma", "sgd.", c.sgd.sigma);
    c.sgd.iterations = get_int(s, "iterations", "sgd.", c.sgd.iterations);
    c.sgd.stride = int(get_int(s, "stride", "sgd.", c.sgd.stride));
    c.sgd.divergence_bound = get_num(s, "divergence_bound", "sgd.", c.sgd.divergence_bound);
    if (!(c.sgd.eta > 0) || !(c.sgd.sigma >= 0) || c.sgd.iterations < 0 || c.sgd.stride < 1)
      throw ConfigError("config: 'sgd' needs eta > 0, sigma >= 0, iterations >= 0, stride >= 1");
  }
  if (j.contains("checks")) {
    if (!j["checks"].is_boolean()) throw ConfigError("config: 'checks' must be a boolean");
    c.checks = j["checks"].get<bool>();
  }
  if (j.contains("output")) {
    const json& o = need_object(j["output"], "output");
    reject_unknown(o, "output.", {"dir"});
    c.out_dir = get_str(o, "dir", "output.", c.out_dir);
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return parse_config(j);
}

void apply_overrides(ExperimentConfig& cfg, const Overrides& o) {
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.raw["seed"] = *o.seed;
  }
  if (o.out) {
    cfg.out_dir = *o.out;
    cfg.raw["output"]["dir"] = *o.out;
  }
  if (o.stride) {
    if (*o.stride < 1) throw ConfigError("--stride must be >= 1");
    cfg.integrator.stride = cfg.phase1.stride = cfg.sgd.stride = *o.stride;
    cfg.raw["stride_override"] = *o.stride;
  }
}

std::uint64_t data_seed(const ExperimentConfig& cfg) { return cfg.seed; }
std::uint64_t init_seed(const ExperimentConfig& cfg, int repeat) { return cfg.seed * 1000003ULL + 17ULL + repeat; }
std::uint64_t noise_seed(const ExperimentConfig& cfg, int repeat) { return cfg.seed * 2000003ULL + 29ULL + repeat; }

Dataset obtain_dataset(const ExperimentConfig& cfg) {
  if (!cfg.data.path.empty()) {
    Dataset ds = read_dataset_csv(cfg.data.path);
    if (ds.n() != cfg.n || ds.d() != cfg.d)
      throw ConfigError("dataset " + cfg.data.path + " is " + std::to_string(ds.d()) + "x" + std::to_string(ds.n()) +
                        " but config dims say d=" + std::to_string(cfg.d) + ", n=" + std::to_string(cfg.n));
    return ds;
  }
  GenerateOptions opt;
  opt.mu_min = cfg.data.mu_min;
  opt.max_retries = cfg.data.max_retries;
  opt.label_lo = cfg.data.label_lo;
  opt.label_hi = cfg.data.label_hi;
  opt.m = cfg.m;
  opt.spec = cfg.activation;
  return generate_dataset(cfg.n, cfg.d, cfg.data.mode, data_seed(cfg), opt);
}

Params initial_params(const ExperimentConfig& cfg, const Dataset& data, int repeat) {
  Params p = random_params(cfg.m, data.d(), cfg.init_scale, init_seed(cfg, repeat));
  if (cfg.dynamics == Dynamics::Riemannian) {
    RetractOptions ro;
    ro.tol = cfg.integrator.retract_tol;
    ro.basin = std::numeric_limits<double>::infinity();
    ro.max_iters = 200;
    p = retract(p, data, cfg.activation, ro).theta;
  }
  return p;
}

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return hex64(fnv1a(bytes.data(), bytes.size()));
}

json RunManifest::to_json() const {
  json j;
  j["version"] = version;
  j["config"] = config;
  j["dataset_hash"] = dataset_hash;
  j["data_path"] = data_path;
  j["traces"] = traces;
  j["verdicts"] = verdicts;
  j["file_hashes"] = file_hashes;
  j["errors"] = errors;
  j["wall_seconds"] = wall_seconds;
  return j;
}

RunManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("manifest " + path + ": " + e.what());
  }
  RunManifest m;
  try {
    m.config = j.at("config");
    m.dataset_hash = j.at("dataset_hash").get<std::string>();
    m.version = j.value("version", "");
    m.data_path = j.at("data_path").get<std::string>();
    m.traces = j.at("traces").get<std::vector<std::string>>();
    m.verdicts = j.value("verdicts", std::vector<std::string>{});
    m.file_hashes = j.value("file_hashes", json::object());
    m.errors = j.value("errors", std::vector<std::string>{});
    m.wall_seconds = j.value("wall_seconds", 0.0);
  } catch (const json::exception& e) {
    throw ConfigError("manifest " + path + ": " + e.what());
  }
  return m;
}

int cmd_gen_data(const ExperimentConfig& cfg, std::ostream& log) {
  Dataset ds = obtain_dataset(cfg);
  fs::create_directories(cfg.out_dir);
  std::string path = cfg.out_dir + "/data.csv";
  write_dataset_csv(ds, path);
  log << "wrote " << path << " (d=" << ds.d() << ", n=" << ds.n() << ")\n";
  log << "mu = " << std::setprecision(17) << ds.mu << "\n";
  if (ds.low_dimensional) log << "low-dimensional regime: n > d, X^T X is singular\n";
  log << "dataset hash " << hex64(ds.hash()) << "\n";
  return 0;
}

namespace {

struct RepeatOutcome {
  std::vector<std::string> traces;
  std::vector<std::string> verdicts;
  std::vector<std::string> errors;
  bool dynamics_error = false;
  bool check_failed = false;
};

void save_verdict(const std::vector<CheckReport>& reports, const std::string& path, RepeatOutcome& out) {
  write_text(path, verdict_json(reports).dump(1) + "\n");
  out.verdicts.push_back(path);
  for (const auto& r : reports)
    if (!r.skipped && !r.pass) out.check_failed = true;
}

RepeatOutcome run_repeat(const ExperimentConfig& cfg, const Dataset& data, int r) {
  RepeatOutcome out;
  const std::string dir = repeat_dir(cfg, r);
  fs::create_directories(dir);
  auto emit = [&](const FlowTrace& tr, const std::string& name) {
    std::string path = dir + "/trace_" + name + ".jsonl";
    write_trace_file(tr, path);
    out.traces.push_back(path);
    if (cfg.checks) save_verdict(verify_trace(tr, data, cfg.activation), dir + "/verdict_" + name + ".json", out);
  };
  auto guarded = [&](const char* what, auto&& fn) {
    try {
      fn();
    } catch (const Timeout& e) {
      emit(e.trace, std::string(what) + "_partial");
      out.errors.push_back(std::string(what) + ": " + e.what());
      out.dynamics_error = true;
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      out.errors.push_back(std::string(what) + ": " + e.what());
      out.dynamics_error = true;
    }
  };
  guarded("init", [&] {
    Params theta0 = initial_params(cfg, data, r);
    switch (cfg.dynamics) {
      case Dynamics::Euclidean:
        guarded("euclidean", [&] { emit(euclidean_flow(theta0, data, cfg.activation, cfg.phase1).trace, "euclidean"); });
        break;
      case Dynamics::Riemannian:
        guarded("riemannian", [&] { emit(riemannian_flow(theta0, data, cfg.activation, cfg.integrator), "riemannian"); });
        break;
      case Dynamics::Sgd:
        guarded("sgd", [&] { emit(label_noise_sgd(theta0, data, cfg.activation, cfg.sgd, noise_seed(cfg, r)), "sgd"); });
        break;
      case Dynamics::Full:
        guarded("full", [&] {
          auto p1 = euclidean_flow(theta0, data, cfg.activation, cfg.phase1);
          emit(p1.trace, "euclidean");
          if (cfg.checks) {
            double Ft = sharpness(p1.theta_tilde, data, cfg.activation);
            const auto& s0 = p1.trace.samples.front();
            auto rep = phase1_sharpness_check(Ft, s0.traceH, s0.loss, data, cfg.activation, cfg.m);
            rep.context["evaluated_at"] = "retracted limit point";
            save_verdict({rep}, dir + "/verdict_phase1_limit.json", out);
          }
          emit(riemannian_flow(p1.theta_tilde, data, cfg.activation, cfg.integrator), "riemannian");
        });
        guarded("sgd", [&] { emit(label_noise_sgd(theta0, data, cfg.activation, cfg.sgd, noise_seed(cfg, r)), "sgd"); });
        break;
    }
  });
  return out;
}

}  // namespace

int cmd_run(const ExperimentConfig& cfg, std::ostream& log) {
  auto start = std::chrono::steady_clock::now();
  Dataset data = obtain_dataset(cfg);
  fs::create_directories(cfg.out_dir);
  RunManifest man;
  man.config = cfg.raw;
  man.dataset_hash = hex64(data.hash());
  man.data_path = cfg.out_dir + "/data.csv";
  write_dataset_csv(data, man.data_path);

  std::vector<RepeatOutcome> outcomes(static_cast<std::size_t>(cfg.repeats));
  std::vector<std::string> fatal(static_cast<std::size_t>(cfg.repeats));
  const int R = cfg.repeats;
#pragma omp parallel for schedule(dynamic) num_threads(thread_cap()) if (R > 1)
  for (int r = 0; r < R; ++r) {
    try {
      outcomes[std::size_t(r)] = run_repeat(cfg, data, r);
    } catch (const std::exception& e) {
      fatal[std::size_t(r)] = e.what();
    }
  }
  bool dyn_err = false, check_fail = false;
  for (int r = 0; r < R; ++r) {
    const auto& o = outcomes[std::size_t(r)];
    if (!fatal[std::size_t(r)].empty()) throw ConfigError(fatal[std::size_t(r)]);
    man.traces.insert(man.traces.end(), o.traces.begin(), o.traces.end());
    man.verdicts.insert(man.verdicts.end(), o.verdicts.begin(), o.verdicts.end());
    for (const auto& e : o.errors) man.errors.push_back("repeat " + std::to_string(r) + ": " + e);
    dyn_err = dyn_err || o.dynamics_error;
    check_fail = check_fail || o.check_failed;
  }
  man.file_hashes[man.data_path] = file_hash(man.data_path);
  for (const auto& p : man.traces) man.file_hashes[p] = file_hash(p);
  for (const auto& p : man.verdicts) man.file_hashes[p] = file_hash(p);
  man.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::string mpath = cfg.out_dir + "/manifest.json";
  write_text(mpath, man.to_json().dump(1) + "\n");

  log << "dynamics " << dynamics_name(cfg.dynamics) << ", " << R << " repeat(s), mu = " << data.mu << "\n";
  for (const auto& p : man.traces) log << "  trace   " << p << "\n";
  for (const auto& p : man.verdicts) log << "  verdict " << p << "\n";
  for (const auto& e : man.errors) log << "  error   " << e << "\n";
  log << "manifest " << mpath << "\n";
  if (dyn_err) return 3;
  if (check_fail) {
    log << "some in-regime checks failed (see verdict files)\n";
    return 4;
  }
  return 0;
}

int cmd_verify(const std::vector<std::string>& traces, const ExperimentConfig& cfg,
               const std::optional<std::string>& data_path, std::ostream& log) {
  if (traces.empty()) throw ConfigError("verify: no trace files given");
  Dataset data = data_path ? read_dataset_csv(*data_path) : obtain_dataset(cfg);
  const std::string hash = hex64(data.hash());
  std::vector<CheckReport> all;
  for (const auto& path : traces) {
    FlowTrace tr = read_trace_file(path);
    std::string th = tr.metadata.value("data_hash", "");
    if (!th.empty() && th != hash)
      throw ConfigError("verify: trace " + path + " was produced on dataset " + th + ", not " + hash);
    auto reps = verify_trace(tr, data, cfg.activation);
    for (auto& r : reps) r.context["trace"] = path;
    all.insert(all.end(), reps.begin(), reps.end());
  }
  fs::create_directories(cfg.out_dir);
  std::string vpath = cfg.out_dir + "/verdict.json";
  write_text(vpath, verdict_json(all).dump(1) + "\n");

  struct Tally {
    int pass = 0, fail = 0, skip = 0;
  };
  std::map<std::string, Tally> tally;
  for (const auto& r : all) {
    auto& t = tally[r.name];
    (r.skipped ? t.skip : r.pass ? t.pass : t.fail)++;
  }
  int failed = 0, skipped_total = 0;
  log << std::left << std::setw(28) << "check" << std::right << std::setw(8) << "pass" << std::setw(8) << "fail"
      << std::setw(8) << "skip" << "\n";
  for (const auto& [name, t] : tally) {
    log << std::left << std::setw(28) << name << std::right << std::setw(8) << t.pass << std::setw(8) << t.fail
        << std::setw(8) << t.skip << "\n";
    failed += t.fail;
    skipped_total += t.skip;
  }
  log << "verdict " << vpath << " (" << all.size() << " reports, " << skipped_total << " skipped)\n";
  if (failed > 0) {
    for (const auto& [name, t] : tally)
      if (t.fail) log << "FAILED: " << name << "\n";
    return 4;
  }
  return 0;
}

Eigen::MatrixXd neuron_pca(const Params& theta, const Dataset& data) {
  Eigen::MatrixXd F = theta.theta() * data.X;  // m x n, one embedding per neuron
  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(F.rows(), 2);
  if (F.rows() == 0 || F.cols() == 0) return scores;
  F.rowwise() -= F.colwise().mean();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(F, Eigen::ComputeThinU);
  const Eigen::Index k = std::min<Eigen::Index>(2, svd.singularValues().size());
  for (Eigen::Index c = 0; c < k; ++c) scores.col(c) = svd.matrixU().col(c) * svd.singularValues()(c);
  return scores;
}

std::vector<ReportRow> report_rows(const std::string& name, const FlowTrace& trace, const Dataset& data,
                                   const ActivationSpec& spec) {
  std::vector<ReportRow> rows;
  if (trace.samples.empty()) return rows;
  std::optional<StationaryTarget> target;
  try {
    target = stationary_target(data, trace.m, spec);
  } catch (const Error&) {
  }
  for (const auto& s : trace.samples) {
    for (Eigen::Index k = 0; k < s.sv.size(); ++k) rows.push_back({name, s.t, "sv_" + std::to_string(k + 1), s.sv(k)});
    if (s.sv.size() > 1 && s.sv(0) > 0) rows.push_back({name, s.t, "sv_ratio_21", s.sv(1) / s.sv(0)});
    if (s.gradnorm && *s.gradnorm > 0) rows.push_back({name, s.t, "log_gradnorm_sq", std::log(*s.gradnorm * *s.gradnorm)});
    rows.push_back({name, s.t, "loss", s.loss});
    rows.push_back({name, s.t, "traceH", s.traceH});
    if (target && s.theta.size() == Eigen::Index(trace.m) * data.d())
      rows.push_back({name, s.t, "gap", stationarity_gap(Params(s.theta, trace.m, data.d()), data, *target)});
  }
  const auto& last = trace.samples.back();
  if (last.theta.size() == Eigen::Index(trace.m) * data.d()) {
    Params p(last.theta, trace.m, data.d());
    Eigen::MatrixXd pcs = neuron_pca(p, data);
    for (Eigen::Index j = 0; j < pcs.rows(); ++j) {
      rows.push_back({name, last.t, "pc1_neuron_" + std::to_string(j), pcs(j, 0)});
      rows.push_back({name, last.t, "pc2_neuron_" + std::to_string(j), pcs(j, 1)});
    }
    Eigen::MatrixXd F = p.theta() * data.X;
    std::vector<double> dist;
    for (Eigen::Index a = 0; a < F.rows(); ++a)
      for (Eigen::Index b = a + 1; b < F.rows(); ++b) dist.push_back((F.row(a) - F.row(b)).norm());
    if (!dist.empty()) {
      const int bins = 10;
      double hi = *std::max_element(dist.begin(), dist.end());
      std::vector<int> count(bins, 0);
      for (double v : dist) count[std::size_t(hi > 0 ? std::min(bins - 1, int(v / hi * bins)) : 0)]++;
      rows.push_back({name, last.t, "pairdist_max", hi});
      for (int b = 0; b < bins; ++b) rows.push_back({name, last.t, "pairdist_bin_" + std::to_string(b), double(count[std::size_t(b)])});
    }
  }
  return rows;
}

void write_report_csv(const std::vector<ReportRow>& rows, std::ostream& out) {
  out << "trace,t,quantity,value\n";
  char buf[64];
  for (const auto& r : rows) {
    out << r.trace << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.t);
    out << buf << ',' << r.quantity << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.value);
    out << buf << '\n';
  }
}

int cmd_report(const std::string& manifest_path, const std::optional<std::string>& out, std::ostream& log) {
  RunManifest man = read_manifest(manifest_path);
  ExperimentConfig cfg = parse_config(man.config);
  Dataset data = read_dataset_csv(man.data_path);
  if (hex64(data.hash()) != man.dataset_hash)
    throw ConfigError("report: dataset " + man.data_path + " does not match the manifest hash");
  for (auto it = man.file_hashes.begin(); it != man.file_hashes.end(); ++it)
    if (file_hash(it.key()) != it.value().get<std::string>())
      throw ConfigError("report: " + it.key() + " changed since the manifest was written");
  std::vector<ReportRow> rows;
  for (const auto& path : man.traces) {
    FlowTrace tr = read_trace_file(path);
    auto part = report_rows(fs::path(path).stem().string() + "@" + fs::path(path).parent_path().filename().string(),
                            tr, data, cfg.activation);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  std::string path = out ? *out : (fs::path(manifest_path).parent_path() / "report.csv").string();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path);
  write_report_csv(rows, f);
  log << "wrote " << rows.size() << " rows to " << path << "\n";
  return 0;
}

}  // namespace sharpflow
