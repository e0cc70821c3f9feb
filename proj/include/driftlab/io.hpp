#pragma once

// CSV / JSON / two-column writers.  Every CSV row starts with geometry id,
// parameter hash and toolkit version; numbers use 17 significant digits.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "driftlab/bounds.hpp"
#include "driftlab/collapse.hpp"
#include "driftlab/eigensolve.hpp"
#include "driftlab/error.hpp"
#include "driftlab/heatkernel.hpp"
#include "driftlab/sobolev.hpp"
#include "driftlab/version.hpp"

namespace driftlab::io {

using Json = nlohmann::ordered_json;

inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// NaN and infinities have no JSON literal; they become null.
inline Json jnum(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json jvec(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(jnum(x));
  return a;
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex16(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct RowTag {
  std::string geometry_id;
  std::string params_hash;
};

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  void add(const RowTag& tag, const std::vector<std::string>& cells) {
    require_width(cells.size());
    std::vector<std::string> row{tag.geometry_id, tag.params_hash, std::string(kVersion)};
    row.insert(row.end(), cells.begin(), cells.end());
    rows_.push_back(std::move(row));
  }

  std::string str() const {
    std::ostringstream os;
    os << "geometry_id,params_hash,version";
    for (const auto& c : columns_) os << ',' << c;
    os << '\n';
    for (const auto& r : rows_) {
      for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << quote(r[i]);
      os << '\n';
    }
    return os.str();
  }

  std::size_t size() const { return rows_.size(); }

 private:
  void require_width(std::size_t n) const {
    if (n != columns_.size())
      throw InvalidArgument("csv: row has " + std::to_string(n) + " cells, header has " +
                            std::to_string(columns_.size()));
  }
  static std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
      if (c == '"') out += '"';
      out += c;
    }
    return out + "\"";
  }

  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path.string() + "' for writing");
  f << text;
  if (!f) throw Error("write failed for '" + path.string() + "'");
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  write_text(path, j.dump(2) + "\n");
}

// Plot-ready two-column data; header lines start with '#'.
inline std::string two_column(const std::string& xname, const std::string& yname,
                              const std::vector<double>& x, const std::vector<double>& y,
                              const RowTag& tag) {
  std::ostringstream os;
  os << "# geometry_id=" << tag.geometry_id << " params_hash=" << tag.params_hash
     << " version=" << kVersion << "\n# " << xname << ' ' << yname << '\n';
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) os << num(x[i]) << ' ' << num(y[i]) << '\n';
  return os.str();
}

inline Json header(const RowTag& tag) {
  Json j;
  j["geometry_id"] = tag.geometry_id;
  j["params_hash"] = tag.params_hash;
  j["version"] = kVersion;
  return j;
}

// ---------------------------------------------------------------------------
// Module tables

inline CsvTable spectrum_csv(const Spectrum& s, const RowTag& tag) {
  CsvTable t({"index", "eigenvalue", "residual", "extrapolated", "discretization_estimate",
              "azimuthal_mode", "azimuthal_parity"});
  for (std::size_t i = 0; i < s.size(); ++i) {
    const bool ex = i < s.extrapolated.size();
    t.add(tag, {std::to_string(i), num(s.eigenvalues[i]), num(s.residual_norms[i]),
                ex ? num(s.extrapolated[i]) : "", ex ? num(s.discretization_estimate[i]) : "",
                i < s.azimuthal_mode.size() ? std::to_string(s.azimuthal_mode[i]) : "0",
                i < s.azimuthal_parity.size() ? std::to_string(s.azimuthal_parity[i]) : "0"});
  }
  return t;
}

// Grid coordinate followed by one column per eigenfunction (theta profile on the sphere).
inline CsvTable eigenfunctions_csv(const Spectrum& s, const std::vector<double>& grid,
                                   const RowTag& tag) {
  std::vector<std::string> cols{"coordinate"};
  for (std::size_t i = 0; i < s.size(); ++i) cols.push_back("u" + std::to_string(i));
  CsvTable t(cols);
  for (std::size_t r = 0; r < s.dof_nodes.size(); ++r) {
    std::vector<std::string> cells{num(grid.at(static_cast<std::size_t>(s.dof_nodes[r])))};
    for (std::size_t i = 0; i < s.size(); ++i)
      cells.push_back(num(s.eigenvectors(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i))));
    t.add(tag, cells);
  }
  return t;
}

inline Json spectrum_json(const Spectrum& s, const RowTag& tag) {
  Json j = header(tag);
  j["kind"] = "spectrum";
  j["method"] = s.method;
  j["iterations"] = s.iterations;
  j["eigenvalues"] = jvec(s.eigenvalues);
  j["residual_norms"] = jvec(s.residual_norms);
  j["extrapolated"] = jvec(s.extrapolated);
  j["discretization_estimate"] = jvec(s.discretization_estimate);
  return j;
}

inline CsvTable bounds_csv(const std::vector<BoundReport>& reports, const RowTag& tag) {
  CsvTable t({"bound_name", "target_index", "direction", "bound_value", "computed", "tolerance",
              "margin", "verdict", "hypothesis", "note"});
  for (const auto& r : reports)
    t.add(tag, {r.bound_name, std::to_string(r.target_index), to_string(r.direction),
                num(r.bound_value), num(r.computed), num(r.tolerance), num(r.margin),
                to_string(r.verdict), r.hypothesis, r.note});
  return t;
}

inline Json bounds_json(const std::vector<BoundReport>& reports, const RowTag& tag) {
  Json j = header(tag);
  j["kind"] = "bounds";
  Json arr = Json::array();
  for (const auto& r : reports) {
    Json e;
    e["bound_name"] = r.bound_name;
    e["target_index"] = r.target_index;
    e["direction"] = to_string(r.direction);
    e["bound_value"] = jnum(r.bound_value);
    e["computed"] = jnum(r.computed);
    e["tolerance"] = jnum(r.tolerance);
    e["margin"] = jnum(r.margin);
    e["verdict"] = to_string(r.verdict);
    e["hypothesis"] = r.hypothesis;
    e["note"] = r.note;
    arr.push_back(e);
  }
  j["reports"] = arr;
  return j;
}

inline Json sobolev_json(const SobolevEstimate& e, const L1Report* l1, const RowTag& tag) {
  Json j = header(tag);
  j["kind"] = "sobolev";
  j["nu"] = jnum(e.nu);
  j["alpha"] = jnum(e.alpha);
  j["safety"] = jnum(e.safety);
  j["c_o_estimate"] = jnum(e.c_o_estimate);
  j["max_ratio"] = jnum(e.max_ratio);
  j["battery_max_ratio"] = jnum(e.battery_max_ratio);
  j["battery_size"] = e.battery_size;
  j["ascent_iterations"] = e.ascent_iterations;
  j["lambda1"] = jnum(e.lambda1);
  j["V_phi"] = jnum(e.V_phi);
  j["c1"] = jnum(e.c1_value);
  j["seed"] = e.seed;
  j["warning"] = e.warning;
  if (l1) {
    Json k;
    k["battery_size"] = l1->records.size();
    k["min_slack"] = jnum(l1->min_slack);
    k["min_relative_slack"] = jnum(l1->min_relative_slack);
    k["min_holder_relative_slack"] = jnum(l1->min_holder_relative_slack);
    k["min_l1e1_slack"] = jnum(l1->min_l1e1_slack);
    k["min_l1e2_slack"] = jnum(l1->min_l1e2_slack);
    k["max_mean_deviation"] = jnum(l1->max_mean_deviation);
    j["l1_check"] = k;
  }
  return j;
}

inline CsvTable extremal_csv(const SobolevEstimate& e, const RowTag& tag) {
  CsvTable t({"coordinate", "u"});
  for (std::size_t i = 0; i < e.extremal_function.size() && i < e.grid.size(); ++i)
    t.add(tag, {num(e.grid[i]), num(e.extremal_function[i])});
  return t;
}

inline CsvTable trace_csv(const TraceBoundReport& r, const RowTag& tag) {
  CsvTable t({"t", "trace", "trace_tail", "bound", "bound_robust", "diag_max", "diag_bound",
              "diffineq_slack"});
  for (const auto& row : r.rows)
    t.add(tag, {num(row.t), num(row.trace), num(row.trace_tail), num(row.bound),
                num(row.bound_robust), num(row.diag_max), num(row.diag_bound),
                num(row.diffineq_slack)});
  return t;
}

inline Json heat_json(const HeatKernelModel& m, const GKernelReport& g, const TraceBoundReport& tr,
                      const std::vector<Thm4Result>& thm4, const RowTag& tag) {
  Json j = header(tag);
  j["kind"] = "heat";
  j["points"] = m.points();
  j["modes"] = m.mode_cap();
  j["t_min"] = jnum(m.t_min);
  j["tol"] = jnum(m.tol);
  j["source"] = m.source == EigenvalueSource::Extrapolated ? "extrapolated" : "discrete";
  j["V_phi"] = jnum(m.V_phi);
  Json gk;
  gk["max_mean"] = jnum(g.max_mean);
  gk["max_l1"] = jnum(g.max_l1);
  gk["max_semigroup"] = jnum(g.max_semigroup);
  gk["min_diagonal"] = jnum(g.min_diagonal);
  gk["max_stochastic"] = jnum(g.max_stochastic);
  gk["samples"] = g.samples;
  j["g_kernel"] = gk;
  Json t;
  t["nu"] = jnum(tr.nu);
  t["c1"] = jnum(tr.c1);
  t["c1_robust"] = jnum(tr.c1_robust);
  t["trace_ok"] = tr.trace_ok;
  t["robust_ok"] = tr.robust_ok;
  t["pointwise_ok"] = tr.pointwise_ok;
  t["diffineq_ok"] = tr.diffineq_ok;
  t["min_diffineq_slack"] = jnum(tr.min_diffineq_slack);
  t["monotone"] = tr.monotone;
  t["convex"] = tr.convex;
  j["trace_bound"] = t;
  Json arr = Json::array();
  for (const auto& r : thm4) {
    Json e;
    e["k"] = r.k;
    e["bound"] = jnum(r.bound);
    e["computed"] = jnum(r.computed);
    e["tolerance"] = jnum(r.tolerance);
    e["verdict"] = r.satisfied ? "Satisfied" : "Violated";
    arr.push_back(e);
  }
  j["thm4"] = arr;
  return j;
}

inline CsvTable collapse_csv(const CollapseStudy& st, const RowTag& tag) {
  CsvTable t({"epsilon", "k", "nx", "mu_eps", "mu_limit", "diff", "ratio_to_eps2", "mu_base_h",
              "diff_estimate", "mu_eps_extrapolated"});
  for (std::size_t e = 0; e < st.epsilons.size(); ++e)
    for (std::size_t ki = 0; ki < st.k_indices.size(); ++ki) {
      const auto& r = st.at(e, ki);
      t.add(tag, {num(r.epsilon), std::to_string(r.k), std::to_string(r.nx), num(r.mu_eps),
                  num(st.mu_limit[ki]), num(r.diff), num(r.ratio_to_eps2), num(r.mu_base_h),
                  num(r.diff_estimate), num(r.mu_eps_extrapolated)});
    }
  return t;
}

inline Json collapse_json(const CollapseStudy& st, const RowTag& tag) {
  Json j = header(tag);
  j["kind"] = "collapse";
  j["nx_used"] = st.nx_used;
  j["exact"] = st.exact;
  Json arr = Json::array();
  for (std::size_t ki = 0; ki < st.k_indices.size(); ++ki) {
    Json e;
    e["k"] = st.k_indices[ki];
    e["fitted_order"] = jnum(st.fitted_order[ki]);
    e["mu_limit"] = jnum(st.mu_limit[ki]);
    e["mu_limit_estimate"] = jnum(st.mu_limit_estimate[ki]);
    e["eps_limit"] = jnum(st.eps_limit[ki]);
    e["eps2_ratio_spread"] = jnum(st.eps2_ratio_spread[ki]);
    arr.push_back(e);
  }
  j["modes"] = arr;
  return j;
}

}  // namespace driftlab::io
