#include <CLI11.hpp>

#include <iostream>

#include "compreg/cli.hpp"

int main(int argc, char** argv) {
  compreg::RunConfig cfg;
  CLI::App app{"Regression with compositional data via the alpha-transformation"};
  app.require_subcommand(1);

  std::optional<double> alpha;
  std::optional<std::string> alpha_grid, k_grid, divisor, reference;
  std::optional<long> k;
  std::optional<std::uint64_t> seed;

  for (const auto& name : compreg::subcommands()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--input", cfg.input, "CSV file with a header row")->required();
    sub->add_option("--roles", cfg.roles, "column roles, e.g. RI=response,Na..Fe=composition,type=factor")->required();
    sub->add_option("--out", cfg.out_dir, "output directory")->required();
    sub->add_option("--alpha", alpha, "alpha in [-1, 1]; 0 selects the log-ratio limit");
    sub->add_option("--alpha-grid", alpha_grid, "lo:hi:step");
    sub->add_option("--k", k, "number of principal components");
    sub->add_option("--k-grid", k_grid, "lo:hi");
    sub->add_option("--folds", cfg.folds, "cross-validation folds")->capture_default_str();
    sub->add_option("--seed", seed, "fold assignment seed");
    sub->add_option("--divisor", divisor, "alr divisor component (default: last)");
    sub->add_option("--reference", reference, "reference factor level");
    sub->add_flag("--impute", cfg.impute, "EM-impute zero parts before fitting");
    sub->add_flag("--factor-as-strata-only", cfg.factor_as_strata_only, "use the factor for fold stratification only");
    sub->add_option("--criterion", cfg.criterion, "alpha selection criterion: kl or profile")->capture_default_str();
    sub->add_option("--threshold-fraction", cfg.impute_config.threshold_fraction)->capture_default_str();
    sub->add_option("--em-tolerance", cfg.impute_config.em_tolerance)->capture_default_str();
    sub->add_option("--em-max-iterations", cfg.impute_config.max_iterations)->capture_default_str();
    if (name == "predict") sub->add_option("--model", cfg.model, "model JSON written by a fitting subcommand")->required();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  cfg.subcommand = app.get_subcommands().front()->get_name();
  cfg.alpha = alpha;
  cfg.alpha_grid = alpha_grid;
  cfg.k_grid = k_grid;
  if (k) cfg.k = static_cast<Eigen::Index>(*k);
  cfg.seed = seed;
  cfg.divisor = divisor;
  cfg.reference = reference;
  return compreg::run(cfg);
}
