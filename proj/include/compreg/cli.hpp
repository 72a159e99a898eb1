#pragma once

// Subcommand dispatch shared by the command-line tool and the tests.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "compreg/alpha_reg.hpp"
#include "compreg/error.hpp"
#include "compreg/grid.hpp"
#include "compreg/io.hpp"
#include "compreg/pcr.hpp"
#include "compreg/zero_impute.hpp"

namespace compreg {

struct RunConfig {
  std::string subcommand;
  std::filesystem::path input;
  std::string roles;
  std::filesystem::path out_dir = ".";
  std::optional<double> alpha;
  std::optional<std::string> alpha_grid;  // "lo:hi:step"
  std::optional<Eigen::Index> k;
  std::optional<std::string> k_grid;  // "lo:hi"
  int folds = 10;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> divisor;
  std::optional<std::string> reference;
  bool impute = false;
  bool factor_as_strata_only = false;
  std::string criterion = "kl";
  std::filesystem::path model;
  ImputeConfig impute_config;
};

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"transform", "impute", "alrreg", "alphareg", "select-alpha", "pcr", "pcr-cv", "predict"};
  return names;
}

/// "lo:hi:step" or a single number.
inline std::vector<double> parse_alpha_grid(const std::string& spec) {
  const auto parts = detail::split(spec, ':');
  std::vector<double> v;
  for (const auto& p : parts) {
    const auto x = detail::parse_double(p);
    if (!x) throw Error(Errc::InvalidArgument, "bad alpha grid '" + spec + "'");
    v.push_back(*x);
  }
  if (v.size() == 1) return {v[0]};
  if (v.size() != 3) throw Error(Errc::InvalidArgument, "alpha grid must be lo:hi:step, got '" + spec + "'");
  return arithmetic_grid(v[0], v[1], v[2]);
}

/// "lo:hi" (inclusive) or a single integer.
inline std::vector<Eigen::Index> parse_k_grid(const std::string& spec) {
  const auto parts = detail::split(spec, ':');
  std::vector<long> v;
  for (const auto& p : parts) {
    long x = 0;
    const auto res = std::from_chars(p.data(), p.data() + p.size(), x);
    if (p.empty() || res.ec != std::errc() || res.ptr != p.data() + p.size())
      throw Error(Errc::InvalidArgument, "bad k grid '" + spec + "'");
    v.push_back(x);
  }
  if (v.size() == 1) v.push_back(v[0]);
  if (v.size() != 2 || v[0] < 1 || v[1] < v[0]) throw Error(Errc::InvalidArgument, "k grid must be lo:hi with 1 <= lo <= hi");
  std::vector<Eigen::Index> out;
  for (long k = v[0]; k <= v[1]; ++k) out.push_back(k);
  return out;
}

namespace detail {

inline Eigen::Index label_index(const Labels& labels, const std::string& name) {
  for (std::size_t j = 0; j < labels.size(); ++j)
    if (labels[j] == name) return static_cast<Eigen::Index>(j);
  throw Error(Errc::MissingColumn, "component '" + name + "' not found");
}

inline std::string observed_vs_fitted_csv(const Matrix& observed, const Matrix& fitted, const Labels& labels) {
  std::vector<std::string> header{"row"};
  for (const auto& l : labels) header.push_back("observed_" + l);
  for (const auto& l : labels) header.push_back("fitted_" + l);
  CsvWriter w(header);
  for (Eigen::Index i = 0; i < observed.rows(); ++i) {
    std::vector<std::string> cells{std::to_string(i)};
    for (Eigen::Index j = 0; j < observed.cols(); ++j) cells.push_back(format_double(observed(i, j)));
    for (Eigen::Index j = 0; j < fitted.cols(); ++j) cells.push_back(format_double(fitted(i, j)));
    w.row_strings(cells);
  }
  return w.str();
}

struct ResponseData {
  CompositionBatch observed;
  CompositionBatch fit_on;
};

inline ResponseData response_data(const Dataset& ds, const RunConfig& cfg) {
  const CompositionBatch& y = ds.require_composition();
  if (!cfg.impute) return {y, y};
  return {y, em_impute(y, cfg.impute_config).batch};
}

inline void write_alpha_outputs(const RunConfig& cfg, const AlphaRegModel& m, const ResponseData& data, const DesignMatrix& X,
                                const AlphaSelection* selection) {
  json j = to_json(m);
  if (selection) j["selection"] = to_json(*selection);
  write_file_atomic(cfg.out_dir / "model.json", j.dump(2) + "\n");
  const Matrix fitted = link_fitted(m.coefficients, X.values());
  write_file_atomic(cfg.out_dir / "fitted.csv", observed_vs_fitted_csv(data.observed.matrix(), fitted, m.component_labels));
  if (selection) write_file_atomic(cfg.out_dir / "curve.csv", selection_curve_csv(*selection));
}

inline std::string pcr_fitted_csv(const Vector& y, const StandardizedResiduals& r) {
  CsvWriter w({"row", "observed", "fitted", "standardized_residual", "outlier"});
  for (Eigen::Index i = 0; i < y.size(); ++i)
    w.row_strings({std::to_string(i), format_double(y[i]), format_double(r.fitted[i]), format_double(r.values[i]),
                   r.outlier[static_cast<std::size_t>(i)] ? "1" : "0"});
  return w.str();
}

inline CompositionBatch pcr_predictors(const Dataset& ds, const RunConfig& cfg) {
  const CompositionBatch& x = ds.require_composition();
  return cfg.impute ? em_impute(x, cfg.impute_config).batch : x;
}

inline std::string fmt(double v) { return format_double(v); }

}  // namespace detail

/// Executes one subcommand, writing artifacts under cfg.out_dir and a one-line
/// summary to `out`. Module errors propagate as compreg::Error.
inline void run_or_throw(const RunConfig& cfg, std::ostream& out) {
  const auto& names = subcommands();
  if (std::find(names.begin(), names.end(), cfg.subcommand) == names.end())
    throw Error(Errc::InvalidArgument, "unknown subcommand '" + cfg.subcommand + "'");
  if (cfg.alpha) (void)AlphaParam(*cfg.alpha);
  if (cfg.subcommand == "pcr-cv" && !cfg.seed) throw Error(Errc::InvalidArgument, "pcr-cv requires --seed");
  if (cfg.criterion != "kl" && cfg.criterion != "profile") throw Error(Errc::InvalidArgument, "criterion must be kl or profile");
  cfg.impute_config.validate();
  std::filesystem::create_directories(cfg.out_dir);

  const Dataset ds = load_csv(cfg.input, RoleSpec::parse(cfg.roles));

  if (cfg.subcommand == "transform") {
    const CompositionBatch& x = ds.require_composition();
    const AlphaParam a(cfg.alpha.value_or(0.0));
    const TransformedBatch t = alpha_or_ilr_transform(x, a);
    Labels names_z;
    for (Eigen::Index j = 0; j < t.coords.cols(); ++j) names_z.push_back("z" + std::to_string(j + 1));
    write_file_atomic(cfg.out_dir / "transformed.csv", composition_csv(t.coords, names_z));
    out << "transform: n=" << x.n() << " D=" << x.D() << " alpha=" << detail::fmt(a.value())
        << (a.is_zero() ? " (ilr)" : "") << "\n";
    return;
  }

  if (cfg.subcommand == "impute") {
    const CompositionBatch& x = ds.require_composition();
    const ImputeResult r = em_impute(x, cfg.impute_config);
    write_file_atomic(cfg.out_dir / "imputed.csv", composition_csv(r.batch.matrix(), r.batch.labels()));
    CsvWriter w({"row", "component", "old", "new"});
    for (const auto& c : r.changed_cells)
      w.row_strings({std::to_string(c.row), x.labels()[static_cast<std::size_t>(c.component)], detail::fmt(c.old_value),
                     detail::fmt(c.new_value)});
    write_file_atomic(cfg.out_dir / "changes.csv", w.str());
    out << "impute: cells=" << r.changed_cells.size() << " iterations=" << r.iterations
        << " converged=" << (r.converged ? "true" : "false") << "\n";
    return;
  }

  if (cfg.subcommand == "alrreg" || cfg.subcommand == "alphareg" || cfg.subcommand == "select-alpha") {
    const detail::ResponseData data = detail::response_data(ds, cfg);
    const DesignMatrix X = ds.design();
    if (cfg.subcommand == "alrreg") {
      const Eigen::Index div = cfg.divisor ? detail::label_index(data.fit_on.labels(), *cfg.divisor) : data.fit_on.D() - 1;
      const AlphaRegModel m = fit_alr_regression(data.fit_on, X, div);
      detail::write_alpha_outputs(cfg, m, data, X, nullptr);
      const double kl = kl_fit_divergence(data.observed.matrix(), link_fitted(m.coefficients, X.values()));
      out << "alrreg: twice_kl=" << detail::fmt(kl) << "\n";
      return;
    }
    if (cfg.subcommand == "alphareg") {
      if (!cfg.alpha) throw Error(Errc::InvalidArgument, "alphareg requires --alpha");
      const AlphaRegModel m = fit_alpha_regression(data.fit_on, X, AlphaParam(*cfg.alpha));
      detail::write_alpha_outputs(cfg, m, data, X, nullptr);
      const double kl = kl_fit_divergence(data.observed.matrix(), link_fitted(m.coefficients, X.values()));
      out << "alphareg: alpha=" << detail::fmt(m.alpha.value()) << " twice_kl=" << detail::fmt(kl)
          << " objective=" << detail::fmt(m.objective_value) << (m.converged ? "" : " (optimizer did not converge)") << "\n";
      return;
    }
    const std::vector<double> grid =
        cfg.alpha_grid ? parse_alpha_grid(*cfg.alpha_grid) : default_alpha_grid(data.fit_on.has_zero());
    const AlphaSelection sel = cfg.criterion == "kl" ? select_alpha_by_kl(data.fit_on, X, grid, &data.observed)
                                                     : select_alpha_by_profile(data.fit_on, X, grid);
    const AlphaRegModel m = fit_alpha_regression(data.fit_on, X, sel.chosen_alpha);
    detail::write_alpha_outputs(cfg, m, data, X, &sel);
    out << "select-alpha: chosen_alpha=" << detail::fmt(sel.chosen_alpha.value())
        << (cfg.criterion == "kl" ? " min_twice_kl=" : " max_profile_objective=") << detail::fmt(sel.chosen_value) << "\n";
    return;
  }

  if (cfg.subcommand == "pcr" || cfg.subcommand == "pcr-cv") {
    const Vector& y = ds.require_response();
    const CompositionBatch x = detail::pcr_predictors(ds, cfg);
    const FactorLabels* factor = cfg.factor_as_strata_only ? nullptr : ds.factor_ptr();
    PcrOptions popt{cfg.reference};
    PcrModel m;
    if (cfg.subcommand == "pcr") {
      const Eigen::Index k = cfg.k.value_or(x.D() - 1);
      m = pcr_fit(y, x, AlphaParam(cfg.alpha.value_or(1.0)), k, factor, popt);
    } else {
      const std::vector<double> agrid = cfg.alpha_grid ? parse_alpha_grid(*cfg.alpha_grid) : default_alpha_grid(x.has_zero());
      const std::vector<Eigen::Index> kgrid = cfg.k_grid ? parse_k_grid(*cfg.k_grid) : parse_k_grid("1:" + std::to_string(x.D() - 1));
      CvOptions copt;
      copt.folds = cfg.folds;
      copt.seed = *cfg.seed;
      copt.strata = ds.factor_ptr();
      copt.reference = cfg.reference;
      const CvReport report = cross_validate(y, x, agrid, kgrid, factor, copt);
      write_file_atomic(cfg.out_dir / "cv_report.csv", cv_report_csv(report));
      const CvCell& best = report.best();
      m = pcr_fit(y, x, AlphaParam(best.alpha), best.k, factor, popt);
      out << "pcr-cv: alpha=" << detail::fmt(best.alpha) << " k=" << best.k << " mspe=" << detail::fmt(best.mean_mspe)
          << " folds=" << report.folds << " seed=" << report.seed << "\n";
    }
    write_file_atomic(cfg.out_dir / "model.json", to_json(m).dump(2) + "\n");
    const StandardizedResiduals r = standardized_residuals(m, y, x, factor);
    write_file_atomic(cfg.out_dir / "fitted.csv", detail::pcr_fitted_csv(y, r));
    if (cfg.subcommand == "pcr") {
      const double adj = adjusted_r2(y, r.fitted, m.n_predictors());
      out << "pcr: alpha=" << detail::fmt(m.alpha.value()) << " k=" << m.k << " adjusted_r2=" << detail::fmt(adj)
          << " sigma2=" << detail::fmt(m.sigma2) << "\n";
    }
    return;
  }

  // predict
  const json j = read_json_file(cfg.model);
  const std::string kind = model_kind(j);
  if (kind == "alpha_regression") {
    const AlphaRegModel m = alpha_model_from_json(j);
    if (ds.covariate_names != m.covariate_names)
      throw Error(Errc::LabelMismatch, "covariates differ from those the model was trained on");
    const CompositionBatch pred = predict(m, ds.design());
    write_file_atomic(cfg.out_dir / "predictions.csv", composition_csv(pred.matrix(), pred.labels(), "predicted_"));
    out << "predict: kind=alpha_regression n=" << pred.n() << "\n";
    return;
  }
  if (kind == "pcr") {
    const PcrModel m = pcr_model_from_json(j);
    const CompositionBatch x = detail::pcr_predictors(ds, cfg);
    const Vector pred = pcr_predict(m, x, m.factor ? ds.factor_ptr() : nullptr);
    CsvWriter w({"row", "predicted"});
    for (Eigen::Index i = 0; i < pred.size(); ++i) w.row_strings({std::to_string(i), detail::fmt(pred[i])});
    write_file_atomic(cfg.out_dir / "predictions.csv", w.str());
    out << "predict: kind=pcr n=" << pred.size() << "\n";
    return;
  }
  throw Error(Errc::ParseError, "unknown model kind '" + kind + "'");
}

/// run_or_throw with errors mapped to one JSON line on `err` and an exit status.
inline int run(const RunConfig& cfg, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    run_or_throw(cfg, out);
    return 0;
  } catch (const Error& e) {
    err << json{{"error", std::string(errc_name(e.code()))}, {"message", e.what()}}.dump() << "\n";
    return exit_code(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    err << json{{"error", "FilesystemError"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  }
}

}  // namespace compreg
