#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hiersel/commands.hpp"

int main(int argc, char** argv) {
  using namespace hiersel;
  CLI::App app{"Bayesian selection of hierarchical polynomial regression models"};
  app.set_version_flag("--version", std::string(kVersion));
  app.set_config("--config", "", "flat key=value file; command-line flags take precedence");
  app.allow_config_extras(false);
  app.require_subcommand(1, 1);

  RunConfig cfg;
  double g = 0;
  app.add_option("--data", cfg.data, "training CSV with a header row");
  app.add_option("--response", cfg.response, "response column name")->capture_default_str();
  app.add_option("--p", cfg.p, "number of main effects (prior-table, count, dot)");
  app.add_option("--degree", cfg.degree, "degree of the full polynomial surface")->capture_default_str();
  app.add_option("--heredity", cfg.heredity, "strong or weak")->capture_default_str();
  app.add_option("--base", cfg.base, "base terms, e.g. 1,x1 (default: intercept)")->delimiter(',');
  app.add_option("--prior", cfg.prior, "EPP, HUP, HIP, HOP, HLP, HTP (prior-table also takes 'all')")
      ->capture_default_str();
  app.add_option("--scheme", cfg.scheme, "hyperparameter scheme: 11 or ch")->capture_default_str();
  app.add_flag("--whm-penalty", cfg.whm_penalty, "penalize missing parents (weak heredity HIP/HLP/HTP)");
  app.add_option("--iterations", cfg.iterations, "sampler iterations")->capture_default_str();
  app.add_option("--seed", cfg.seed, "random seed")->capture_default_str();
  app.add_option("--weights", cfg.weights, "local,intermediate,global kernel weights")->delimiter(',')->expected(3);
  app.add_option("--lambda", cfg.lambda, "posterior weight in local proposals")->capture_default_str();
  auto* g_opt = app.add_option("--g", g, "g-prior scale (default: n)");
  app.add_option("--top-k", cfg.top_k, "models reported, or averaged by predict")->capture_default_str();
  app.add_option("--cap", cfg.cap, "enumeration cap")->capture_default_str();
  app.add_flag("--center", cfg.center, "center mains before expansion");
  app.add_flag("--standardize", cfg.standardize, "scale mains to unit variance before expansion");
  app.add_option("--out", cfg.out, "output file (default: stdout)");
  app.add_option("--table", cfg.table, "posterior table artifact (written by select, read by predict)");
  app.add_option("--trace", cfg.trace, "NDJSON chain trace output");
  app.add_option("--dot", cfg.dot, "DOT file of the highest posterior model");
  app.add_option("--newdata", cfg.newdata, "CSV of new observations for predict");
  app.add_option("--design", cfg.design, "simulation design file");
  app.add_option("--model", cfg.model, "comma-separated terms for dot");
  app.add_option("--method", cfg.method, "count method: auto, closed, enumerate")->capture_default_str();

  auto* select = app.add_subcommand("select", "run the sampler on a dataset and write a JSON report");
  auto* prior_table = app.add_subcommand("prior-table", "prior probabilities of every model");
  auto* count = app.add_subcommand("count", "exact number of models in a space");
  auto* predict = app.add_subcommand("predict", "model-averaged predictions from a saved table");
  auto* simulate = app.add_subcommand("simulate", "run a simulation design");
  auto* dot = app.add_subcommand("dot", "Graphviz rendering of a model");
  for (auto* sub : {select, prior_table, count, predict, simulate, dot}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (g_opt->count() > 0) cfg.g = g;

  if (*select) return cmd_select(cfg, std::cout, std::cerr);
  if (*prior_table) return cmd_prior_table(cfg, std::cout, std::cerr);
  if (*count) return cmd_count(cfg, std::cout, std::cerr);
  if (*predict) return cmd_predict(cfg, std::cout, std::cerr);
  if (*simulate) return cmd_simulate(cfg, std::cout, std::cerr);
  if (*dot) return cmd_dot(cfg, std::cout, std::cerr);
  return kExitUsage;
}
