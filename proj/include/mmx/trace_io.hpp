#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "mmx/metrics.hpp"

namespace mmx {

/// RFC-4180 field quoting; only applied when the field needs it (numeric
/// fields never do).
inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string trace_row_csv(const TraceRow& r) {
  std::ostringstream os;
  os << r.t << ',' << format_double(r.Gx) << ',' << format_double(r.Gy) << ','
     << format_double(r.c_norm) << ',' << format_double(r.dist_M) << ','
     << format_double(r.primal_gap) << ',' << format_double(r.rel_grad) << ','
     << format_double(r.grad_pen_x) << ',' << format_double(r.manifold_residual) << ','
     << format_double(r.dual_residual) << ',' << format_double(r.x_norm) << ','
     << (r.ball_active ? 1 : 0);
  return os.str();
}

inline void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_trace_csv: cannot open " + path);
  out << trace_csv_header() << "\r\n";
  for (const auto& r : rows) out << trace_row_csv(r) << "\r\n";
}

inline std::vector<TraceRow> read_trace_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_trace_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("read_trace_csv: empty file");
  std::vector<TraceRow> rows;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() != 12)
      throw std::runtime_error("read_trace_csv: malformed row in " + path);
    TraceRow r;
    r.t = std::stol(fields[0]);
    r.Gx = std::stod(fields[1]);
    r.Gy = std::stod(fields[2]);
    r.c_norm = std::stod(fields[3]);
    r.dist_M = std::stod(fields[4]);
    r.primal_gap = std::stod(fields[5]);
    r.rel_grad = std::stod(fields[6]);
    r.grad_pen_x = std::stod(fields[7]);
    r.manifold_residual = std::stod(fields[8]);
    r.dual_residual = std::stod(fields[9]);
    r.x_norm = std::stod(fields[10]);
    r.ball_active = fields[11] == "1";
    rows.push_back(r);
  }
  return rows;
}

/// Per-metric mean and standard deviation across repetitions at each
/// recorded iteration. Rows must share the recording grid; the population
/// standard deviation is reported.
struct TraceSummary {
  std::vector<long> t;
  // metric name -> (mean per t, std per t)
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> metrics;
};

inline TraceSummary summarize_traces(const std::vector<std::vector<TraceRow>>& traces) {
  TraceSummary s;
  if (traces.empty()) return s;
  std::size_t nrow = traces.front().size();
  for (const auto& tr : traces)
    if (tr.size() != nrow)
      throw std::runtime_error("summarize_traces: traces have mismatched recording grids");
  const char* names[] = {"Gx", "Gy", "c_norm", "dist_M", "primal_gap", "rel_grad",
                         "grad_pen_x", "manifold_residual", "dual_residual", "x_norm"};
  auto get = [](const TraceRow& r, const std::string& name) -> double {
    if (name == "Gx") return r.Gx;
    if (name == "Gy") return r.Gy;
    if (name == "c_norm") return r.c_norm;
    if (name == "dist_M") return r.dist_M;
    if (name == "primal_gap") return r.primal_gap;
    if (name == "rel_grad") return r.rel_grad;
    if (name == "grad_pen_x") return r.grad_pen_x;
    if (name == "manifold_residual") return r.manifold_residual;
    if (name == "dual_residual") return r.dual_residual;
    return r.x_norm;
  };
  for (std::size_t i = 0; i < nrow; ++i) s.t.push_back(traces.front()[i].t);
  double reps = static_cast<double>(traces.size());
  for (const char* name : names) {
    std::vector<double> mean(nrow, 0.0), stdev(nrow, 0.0);
    for (std::size_t i = 0; i < nrow; ++i) {
      double sum = 0.0;
      for (const auto& tr : traces) sum += get(tr[i], name);
      mean[i] = sum / reps;
      double var = 0.0;
      for (const auto& tr : traces) {
        double d = get(tr[i], name) - mean[i];
        var += d * d;
      }
      stdev[i] = std::sqrt(var / reps);
    }
    s.metrics[name] = {std::move(mean), std::move(stdev)};
  }
  return s;
}

inline nlohmann::json summary_to_json(const TraceSummary& s) {
  nlohmann::json j;
  j["t"] = s.t;
  for (const auto& [name, ms] : s.metrics) {
    j["metrics"][name]["mean"] = ms.first;
    j["metrics"][name]["std"] = ms.second;
  }
  return j;
}

}  // namespace mmx
