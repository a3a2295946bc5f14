#pragma once

// Artifact output: CSV (comma separated, header row, shortest round-trip
// decimal, locale independent), JSON reports and atomic file replacement.

#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "nstrip/conditions.hpp"
#include "nstrip/config.hpp"
#include "nstrip/harness.hpp"

namespace nstrip {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Writes to a sibling temporary file and renames it over `path`.
inline void write_atomic(const std::filesystem::path& path, const std::string& data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header) { row(header); }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) text_ += ',';
      text_ += quote(cells[i]);
    }
    text_ += '\n';
  }

  // Mixed rows: strings go through as-is, numbers via format_double.
  struct Cell {
    Cell(const std::string& s) : text(s) {}
    Cell(const char* s) : text(s) {}
    Cell(double v) : text(format_double(v)) {}
    Cell(int v) : text(std::to_string(v)) {}
    Cell(std::size_t v) : text(std::to_string(v)) {}
    std::string text;
  };
  void add(std::initializer_list<Cell> cells) {
    std::vector<std::string> s;
    for (const auto& c : cells) s.push_back(c.text);
    row(s);
  }

  const std::string& str() const { return text_; }

 private:
  static std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  }
  std::string text_;
};

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Report wrapper; the timestamp lives only in the "meta" block.
inline Json with_meta(Json body, const std::string& command) {
  Json j;
  j["meta"] = {{"command", command}, {"timestamp", utc_timestamp()}};
  for (auto it = body.begin(); it != body.end(); ++it) j[it.key()] = it.value();
  return j;
}

inline Json vec_json(const Vec& v) {
  Json a = Json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

// Non-finite numbers are stored as strings so the document stays valid JSON.
inline Json num_json(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

// ---------------------------------------------------------------------------

inline std::string path_csv(const PathRecord& rec) {
  const int n = rec.states.empty() ? 0 : static_cast<int>(rec.states.front().size());
  std::vector<std::string> header = {"step", "time"};
  for (int i = 0; i + 1 < n; ++i) header.push_back(n == 2 ? "x" : "x" + std::to_string(i + 1));
  for (const char* h : {"y", "dl1", "dl2", "face"}) header.push_back(h);
  CsvWriter w(header);
  for (std::size_t k = 0; k < rec.states.size(); ++k) {
    std::vector<std::string> row = {std::to_string(k), format_double(rec.times[k])};
    for (int i = 0; i < n; ++i) row.push_back(format_double(rec.states[k](i)));
    const bool first = k == 0;
    row.push_back(format_double(first ? 0.0 : rec.dl1[k - 1]));
    row.push_back(format_double(first ? 0.0 : rec.dl2[k - 1]));
    row.push_back(std::to_string(first ? 0 : rec.faces[k - 1]));
    w.row(row);
  }
  return w.str();
}

inline std::string solution_csv(const GridSolution& sol) {
  CsvWriter w({"x", "y", "u"});
  const MappedGrid& g = *sol.grid;
  for (int i = 0; i < g.n_x(); ++i)
    for (int j = 0; j < g.n_v(); ++j) {
      const Vec p = g.physical(i, j);
      w.add({p(0), p(1), sol.u[g.index(i, j)]});
    }
  return w.str();
}

inline std::string report_csv(const InequalityReport& r) {
  CsvWriter w({"inequality", "cell", "t", "lhs", "rhs", "stderr", "cell_constant", "usage", "fitted_constant"});
  for (const auto& row : r.rows)
    w.add({r.id, row.cell, row.t, row.lhs, row.rhs, row.stderr_, row.constant, row.usage, r.fitted_constant});
  return w.str();
}

inline Json report_json(const InequalityReport& r) {
  Json j;
  j["id"] = r.id;
  j["fitted_constant"] = num_json(r.fitted_constant);
  j["holds"] = r.holds;
  j["rows"] = r.rows.size();
  double min_slack = std::numeric_limits<double>::infinity();
  for (const auto& row : r.rows) min_slack = std::min(min_slack, row.slack());
  if (!r.rows.empty()) j["min_slack"] = num_json(min_slack);
  double max_usage = 0.0;
  for (const auto& row : r.rows) max_usage = std::max(max_usage, row.usage);
  if (max_usage > 0.0) j["max_usage"] = num_json(max_usage);
  if (!r.note.empty()) j["note"] = r.note;
  for (const auto& [k, v] : r.meta) j[k] = num_json(v);
  return j;
}

inline std::string moment_csv(const MomentCurve& c) {
  CsvWriter w({"weight", "lambda", "t", "log_moment", "stderr", "ess", "low_ess"});
  const char* name = c.weight == MomentWeight::Sigma ? "sigma" : "indicator";
  for (const auto& cell : c.cells)
    w.add({name, cell.lambda, cell.t, cell.log_moment, cell.stderr_, cell.ess, cell.low_ess ? 1 : 0});
  return w.str();
}

inline Json moment_json(const MomentCurve& c) {
  Json j;
  j["weight"] = c.weight == MomentWeight::Sigma ? "sigma" : "indicator";
  j["c_fit"] = num_json(c.c_fit);
  j["low_ess_cells"] = c.low_ess_cells;
  Json fits = Json::array();
  for (const auto& f : c.fits)
    fits.push_back({{"lambda", f.lambda}, {"a", f.a}, {"b", f.b}, {"r2", f.r2}, {"residual_rel", f.residual_rel}});
  j["fits"] = fits;
  return j;
}

inline Json gradient_json(const GradientEstimate& g, double t, const Vec& start) {
  Json j;
  j["kind"] = kind_name(g.kind);
  j["t"] = t;
  j["start"] = vec_json(start);
  j["value"] = vec_json(g.value);
  j["stderr"] = vec_json(g.stderr_);
  j["n_paths"] = g.n_paths;
  j["diagnostics"] = {{"mean_bound_exponent", g.mean_bound_exponent},
                      {"boundary_hit_fraction", g.boundary_hit_fraction},
                      {"flagged_fraction", g.flagged_fraction},
                      {"max_h_defect", g.max_h_defect},
                      {"hh_moment", g.hh_moment},
                      {"fallback_steps", g.fallback_steps}};
  return j;
}

inline Json conditions_json(const ConditionReport& r) {
  Json arr = Json::array();
  for (const auto& c : r.conditions) {
    Json j;
    j["id"] = c.id;
    j["quantity"] = c.quantity;
    j["value"] = num_json(c.value);
    j["refined_value"] = num_json(c.refined_value);
    j["witness"] = vec_json(c.witness);
    j["pass"] = c.pass;
    if (!c.note.empty()) j["note"] = c.note;
    arr.push_back(j);
  }
  return {{"conditions", arr}, {"all_pass", r.all_pass()}};
}

}  // namespace nstrip
