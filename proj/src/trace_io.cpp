#include "sharpflow/dynamics.hpp"

#include "sharpflow/errors.hpp"

#include <fstream>
#include <sstream>

namespace sharpflow {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {
ordered_json vec_json(const Eigen::VectorXd& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Eigen::VectorXd json_vec(const json& a, const char* field, int line) {
  if (!a.is_array()) throw ConfigError("trace line " + std::to_string(line) + ": '" + field + "' is not an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw ConfigError("trace line " + std::to_string(line) + ": non-numeric entry in " + field);
    v(Eigen::Index(i)) = a[i].get<double>();
  }
  return v;
}

double need_number(const json& j, const char* field, int line) {
  auto it = j.find(field);
  if (it == j.end() || !it->is_number())
    throw ConfigError("trace line " + std::to_string(line) + ": missing numeric field '" + field + "'");
  return it->get<double>();
}
}  // namespace

void write_trace(const FlowTrace& trace, std::ostream& out) {
  ordered_json head;
  head["record"] = "header";
  head["m"] = trace.m;
  head["d"] = trace.d;
  head["stop_reason"] = trace.stop_reason;
  head["metadata"] = ordered_json::parse(trace.metadata.dump());
  out << head.dump() << '\n';
  for (const auto& s : trace.samples) {
    ordered_json r;
    r["t"] = s.t;
    r["loss"] = s.loss;
    r["traceH"] = s.traceH;
    r["gradnorm"] = s.gradnorm ? ordered_json(*s.gradnorm) : ordered_json(nullptr);
    r["residual"] = s.residual;
    r["sv"] = vec_json(s.sv);
    r["theta"] = vec_json(s.theta);
    out << r.dump() << '\n';
  }
}

void write_trace_file(const FlowTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write trace file " + path);
  write_trace(trace, out);
  if (!out) throw ConfigError("error while writing trace file " + path);
}

FlowTrace read_trace(std::istream& in) {
  FlowTrace tr;
  std::string line;
  int lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ConfigError("trace line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!have_header) {
      if (!j.is_object() || j.value("record", "") != "header")
        throw ConfigError("trace: first record must be the metadata header");
      tr.m = j.value("m", 0);
      tr.d = j.value("d", 0);
      tr.stop_reason = j.value("stop_reason", "");
      tr.metadata = j.value("metadata", json::object());
      have_header = true;
      continue;
    }
    FlowSample s;
    s.t = need_number(j, "t", lineno);
    s.loss = need_number(j, "loss", lineno);
    s.traceH = need_number(j, "traceH", lineno);
    s.residual = need_number(j, "residual", lineno);
    auto g = j.find("gradnorm");
    if (g != j.end() && g->is_number()) s.gradnorm = g->get<double>();
    if (j.contains("sv")) s.sv = json_vec(j["sv"], "sv", lineno);
    if (j.contains("theta")) s.theta = json_vec(j["theta"], "theta", lineno);
    tr.samples.push_back(std::move(s));
  }
  if (!have_header) throw ConfigError("trace: empty input (no header record)");
  return tr;
}

FlowTrace read_trace_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open trace file " + path);
  return read_trace(in);
}

}  // namespace sharpflow
