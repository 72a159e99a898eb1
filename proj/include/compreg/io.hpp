#pragma once

// CSV ingestion with column roles, artifact writing, and JSON model persistence.

#include <Eigen/Dense>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "compreg/alpha_reg.hpp"
#include "compreg/error.hpp"
#include "compreg/pcr.hpp"
#include "compreg/simplex.hpp"

namespace compreg {

using json = nlohmann::json;

enum class Role { composition, response, covariate, log_covariate, factor, ignore };

/// Parsed "NAME=role,A..B=role" column-role specification.
struct RoleSpec {
  struct Entry {
    std::string first;
    std::string last;  // equal to first unless the entry is a range
    Role role;
  };
  std::vector<Entry> entries;

  static RoleSpec parse(std::string_view spec);
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline Role parse_role(const std::string& r) {
  if (r == "composition" || r == "composition-part") return Role::composition;
  if (r == "response") return Role::response;
  if (r == "covariate") return Role::covariate;
  if (r == "covariate:log") return Role::log_covariate;
  if (r == "factor") return Role::factor;
  if (r == "ignore") return Role::ignore;
  throw Error(Errc::InvalidArgument, "unknown role '" + r + "'");
}

/// One CSV record; double quotes group fields and "" escapes a quote.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (s.empty() || res.ec != std::errc() || res.ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

inline RoleSpec RoleSpec::parse(std::string_view spec) {
  RoleSpec out;
  for (const auto& item : detail::split(spec, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw Error(Errc::InvalidArgument, "role entry '" + item + "' lacks '='");
    const std::string cols = detail::trim(std::string_view(item).substr(0, eq));
    const Role role = detail::parse_role(detail::trim(std::string_view(item).substr(eq + 1)));
    const auto dots = cols.find("..");
    if (dots == std::string::npos) {
      out.entries.push_back({cols, cols, role});
    } else {
      out.entries.push_back({detail::trim(std::string_view(cols).substr(0, dots)), detail::trim(std::string_view(cols).substr(dots + 2)), role});
    }
  }
  if (out.entries.empty()) throw Error(Errc::InvalidArgument, "empty role specification");
  return out;
}

/// A loaded table with columns resolved to roles. Composition rows are closed.
struct Dataset {
  Eigen::Index n = 0;
  std::optional<CompositionBatch> composition;
  std::optional<Vector> response;
  std::string response_name;
  Matrix covariates;  // n x q, may have 0 columns
  std::vector<std::string> covariate_names;
  std::optional<FactorLabels> factor;
  std::string factor_name;

  const CompositionBatch& require_composition() const {
    if (!composition) throw Error(Errc::MissingColumn, "no composition columns in the role specification");
    return *composition;
  }
  const Vector& require_response() const {
    if (!response) throw Error(Errc::MissingColumn, "no response column in the role specification");
    return *response;
  }
  DesignMatrix design() const { return DesignMatrix::with_intercept(covariates, covariate_names); }
  const FactorLabels* factor_ptr() const { return factor ? &*factor : nullptr; }
};

inline Dataset parse_csv(std::istream& in, const RoleSpec& roles, const std::string& source = "<input>") {
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (!detail::trim(line).empty()) {
      header = detail::split_csv_line(line);
      break;
    }
  }
  if (header.empty()) throw Error(Errc::EmptyData, source + ": no header row");

  std::map<std::string, std::size_t> index;
  for (std::size_t j = 0; j < header.size(); ++j) index.emplace(header[j], j);
  auto col = [&](const std::string& name) {
    const auto it = index.find(name);
    if (it == index.end()) throw Error(Errc::MissingColumn, source + ": column '" + name + "' not found");
    return it->second;
  };

  std::vector<Role> role_of(header.size(), Role::ignore);
  for (const auto& e : roles.entries) {
    const std::size_t a = col(e.first), b = col(e.last);
    if (b < a) throw Error(Errc::InvalidArgument, "column range " + e.first + ".." + e.last + " runs backwards");
    for (std::size_t j = a; j <= b; ++j) role_of[j] = e.role;
  }

  std::vector<std::size_t> comp_cols, cov_cols;
  std::optional<std::size_t> resp_col, fac_col;
  for (std::size_t j = 0; j < header.size(); ++j) {
    switch (role_of[j]) {
      case Role::composition: comp_cols.push_back(j); break;
      case Role::covariate:
      case Role::log_covariate: cov_cols.push_back(j); break;
      case Role::response:
        if (resp_col) throw Error(Errc::InvalidArgument, "more than one response column");
        resp_col = j;
        break;
      case Role::factor:
        if (fac_col) throw Error(Errc::InvalidArgument, "more than one factor column");
        fac_col = j;
        break;
      case Role::ignore: break;
    }
  }
  if (comp_cols.size() == 1) throw Error(Errc::InvalidDimension, "a composition needs at least 2 part columns");

  std::vector<std::vector<double>> comp_rows, cov_rows;
  std::vector<double> resp;
  FactorLabels fac;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw Error(Errc::ParseError, source + ": line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                                        " fields, header has " + std::to_string(header.size()));
    auto num = [&](std::size_t j) {
      const auto v = detail::parse_double(cells[j]);
      if (!v)
        throw Error(Errc::ParseError, source + ": line " + std::to_string(line_no) + ", column '" + header[j] +
                                          "': cannot parse '" + cells[j] + "' as a number");
      return *v;
    };
    std::vector<double> c;
    for (auto j : comp_cols) c.push_back(num(j));
    comp_rows.push_back(std::move(c));
    std::vector<double> v;
    for (auto j : cov_cols) {
      double x = num(j);
      if (role_of[j] == Role::log_covariate) {
        if (!(x > 0.0))
          throw Error(Errc::ParseError, source + ": line " + std::to_string(line_no) + ", column '" + header[j] +
                                            "': log of a non-positive value");
        x = std::log(x);
      }
      v.push_back(x);
    }
    cov_rows.push_back(std::move(v));
    if (resp_col) resp.push_back(num(*resp_col));
    if (fac_col) {
      if (cells[*fac_col].empty())
        throw Error(Errc::ParseError, source + ": line " + std::to_string(line_no) + ", column '" + header[*fac_col] + "' is empty");
      fac.push_back(cells[*fac_col]);
    }
  }
  if (comp_rows.empty()) throw Error(Errc::EmptyData, source + ": header present but no data rows");

  Dataset ds;
  ds.n = static_cast<Eigen::Index>(comp_rows.size());
  if (!comp_cols.empty()) {
    Matrix m(ds.n, static_cast<Eigen::Index>(comp_cols.size()));
    for (Eigen::Index i = 0; i < ds.n; ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = comp_rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    Labels labels;
    for (auto j : comp_cols) labels.push_back(header[j]);
    try {
      ds.composition = CompositionBatch(std::move(m), std::move(labels));
    } catch (const Error& e) {
      throw Error(e.code(), source + ": " + e.what());
    }
  }
  ds.covariates.resize(ds.n, static_cast<Eigen::Index>(cov_cols.size()));
  for (Eigen::Index i = 0; i < ds.n; ++i)
    for (Eigen::Index j = 0; j < ds.covariates.cols(); ++j)
      ds.covariates(i, j) = cov_rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  for (auto j : cov_cols) ds.covariate_names.push_back(role_of[j] == Role::log_covariate ? "log(" + header[j] + ")" : header[j]);
  if (resp_col) {
    ds.response = Eigen::Map<const Vector>(resp.data(), ds.n);
    ds.response_name = header[*resp_col];
  }
  if (fac_col) {
    ds.factor = std::move(fac);
    ds.factor_name = header[*fac_col];
  }
  return ds;
}

inline Dataset load_csv(const std::filesystem::path& path, const RoleSpec& roles) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::MissingColumn, "cannot open '" + path.string() + "'");
  return parse_csv(in, roles, path.string());
}

// ---------------------------------------------------------------------------
// Output.

/// Shortest decimal that round-trips to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "NaN";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Writes `content` to a sibling temp file, then renames it over `path`.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::InvalidArgument, "cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error(Errc::InvalidArgument, "write failed for '" + path.string() + "'");
    }
  }
  std::filesystem::rename(tmp, path);
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header) { row_strings(header); }

  CsvWriter& row_strings(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << quote(cells[i]);
    }
    out_ << '\n';
    return *this;
  }

  std::string str() const { return out_.str(); }

  static std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += (c == '"') ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  }

 private:
  std::ostringstream out_;
};

// ---------------------------------------------------------------------------
// JSON persistence.

namespace detail {

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline json vector_to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Matrix matrix_from_json(const json& j, Eigen::Index cols_if_empty = 0) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows ? static_cast<Eigen::Index>(j.at(0).size()) : cols_if_empty;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j.at(static_cast<std::size_t>(i)).size()) != cols)
      throw Error(Errc::ParseError, "ragged matrix in model file");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = j.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

inline Vector vector_from_json(const json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace detail

inline json to_json(const AlphaRegModel& m) {
  return json{{"kind", "alpha_regression"},
              {"alpha", m.alpha.value()},
              {"log_ratio", m.log_ratio},
              {"divisor", m.divisor},
              {"component_labels", m.component_labels},
              {"covariate_names", m.covariate_names},
              {"coefficients", detail::matrix_to_json(m.coefficients)},
              {"sigma_hat", detail::matrix_to_json(m.sigma_hat)},
              {"objective_value", detail::number_or_null(m.objective_value)},
              {"log_jacobian", detail::number_or_null(m.log_jacobian)},
              {"converged", m.converged},
              {"iterations", m.iterations}};
}

inline json to_json(const AlphaSelection& s) {
  json values = json::array();
  for (double v : s.criterion_values) values.push_back(detail::number_or_null(v));
  return json{{"criterion", s.criterion_kind == AlphaSelection::Criterion::twice_kl ? "twice_kl" : "profile_objective"},
              {"grid", s.grid},
              {"values", values},
              {"chosen_alpha", s.chosen_alpha.value()},
              {"chosen_value", s.chosen_value}};
}

inline json to_json(const PcrModel& m) {
  json factor = nullptr;
  if (m.factor) factor = json{{"levels", m.factor->levels}, {"reference", m.factor->reference}};
  return json{{"kind", "pcr"},
              {"alpha", m.alpha.value()},
              {"component_labels", m.component_labels},
              {"standardizer", {{"means", detail::vector_to_json(m.basis.standardizer.means)},
                                {"sds", detail::vector_to_json(m.basis.standardizer.sds)}}},
              {"eigenvectors", detail::matrix_to_json(m.basis.eigenvectors)},
              {"eigenvalues", detail::vector_to_json(m.basis.eigenvalues)},
              {"k", m.k},
              {"coefficients", detail::vector_to_json(m.coefficients)},
              {"factor", factor},
              {"sigma2", m.sigma2},
              {"coefficient_covariance", detail::matrix_to_json(m.coefficient_covariance)}};
}

inline std::string model_kind(const json& j) {
  try {
    return j.at("kind").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("model file: ") + e.what());
  }
}

inline AlphaRegModel alpha_model_from_json(const json& j) {
  try {
    if (j.at("kind") != "alpha_regression") throw Error(Errc::ParseError, "not an alpha-regression model");
    AlphaRegModel m;
    m.alpha = AlphaParam(j.at("alpha").get<double>());
    m.log_ratio = j.at("log_ratio").get<bool>();
    m.divisor = j.at("divisor").get<Eigen::Index>();
    m.component_labels = j.at("component_labels").get<Labels>();
    m.covariate_names = j.at("covariate_names").get<std::vector<std::string>>();
    m.coefficients = detail::matrix_from_json(j.at("coefficients"));
    m.sigma_hat = detail::matrix_from_json(j.at("sigma_hat"));
    const auto& ov = j.at("objective_value");
    m.objective_value = ov.is_null() ? std::numeric_limits<double>::infinity() : ov.get<double>();
    const auto& lj = j.at("log_jacobian");
    m.log_jacobian = lj.is_null() ? std::numeric_limits<double>::quiet_NaN() : lj.get<double>();
    m.converged = j.at("converged").get<bool>();
    m.iterations = j.at("iterations").get<int>();
    if (m.coefficients.rows() + 1 != static_cast<Eigen::Index>(m.component_labels.size()))
      throw Error(Errc::ParseError, "coefficient rows do not match the component labels");
    return m;
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("model file: ") + e.what());
  }
}

inline PcrModel pcr_model_from_json(const json& j) {
  try {
    if (j.at("kind") != "pcr") throw Error(Errc::ParseError, "not a PCR model");
    PcrModel m;
    m.alpha = AlphaParam(j.at("alpha").get<double>());
    m.component_labels = j.at("component_labels").get<Labels>();
    m.basis.standardizer.means = detail::vector_from_json(j.at("standardizer").at("means"));
    m.basis.standardizer.sds = detail::vector_from_json(j.at("standardizer").at("sds"));
    m.basis.eigenvectors = detail::matrix_from_json(j.at("eigenvectors"));
    m.basis.eigenvalues = detail::vector_from_json(j.at("eigenvalues"));
    m.k = j.at("k").get<Eigen::Index>();
    m.coefficients = detail::vector_from_json(j.at("coefficients"));
    if (!j.at("factor").is_null())
      m.factor = FactorEncoding{j.at("factor").at("levels").get<std::vector<std::string>>(),
                                j.at("factor").at("reference").get<std::string>()};
    m.sigma2 = j.at("sigma2").get<double>();
    m.coefficient_covariance = detail::matrix_from_json(j.at("coefficient_covariance"));
    return m;
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("model file: ") + e.what());
  }
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::MissingColumn, "cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Report tables.

/// One row per (alpha, k, fold), then the mean row with fold = "mean".
inline std::string cv_report_csv(const CvReport& r) {
  CsvWriter w({"alpha", "k", "fold", "mspe", "status"});
  for (const auto& c : r.cells) {
    const std::string status = c.failure.empty() ? "ok" : c.failure;
    for (std::size_t f = 0; f < c.fold_mspe.size(); ++f)
      w.row_strings({format_double(c.alpha), std::to_string(c.k), std::to_string(f), format_double(c.fold_mspe[f]), status});
    w.row_strings({format_double(c.alpha), std::to_string(c.k), "mean", format_double(c.mean_mspe), status});
  }
  return w.str();
}

inline std::string selection_curve_csv(const AlphaSelection& s) {
  CsvWriter w({"alpha", s.criterion_kind == AlphaSelection::Criterion::twice_kl ? "twice_kl" : "profile_objective", "status"});
  for (std::size_t i = 0; i < s.grid.size(); ++i)
    w.row_strings({format_double(s.grid[i]), format_double(s.criterion_values[i]), s.failures[i].empty() ? "ok" : s.failures[i]});
  return w.str();
}

inline std::string composition_csv(const Matrix& m, const Labels& labels, const std::string& prefix = "") {
  std::vector<std::string> header;
  for (const auto& l : labels) header.push_back(prefix + l);
  CsvWriter w(header);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<std::string> cells;
    for (Eigen::Index j = 0; j < m.cols(); ++j) cells.push_back(format_double(m(i, j)));
    w.row_strings(cells);
  }
  return w.str();
}

}  // namespace compreg
