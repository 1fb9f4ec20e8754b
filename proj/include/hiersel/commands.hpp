#pragma once

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hiersel/csv.hpp"
#include "hiersel/marginals.hpp"
#include "hiersel/model_space.hpp"
#include "hiersel/posterior.hpp"
#include "hiersel/priors.hpp"
#include "hiersel/sampler.hpp"
#include "hiersel/simulation.hpp"

namespace hiersel {

inline constexpr const char* kVersion = "0.1.0";

/// Process exit codes shared by every command.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitInfeasible = 3,
  kExitUnsupported = 4,
};

/// Invalid or unsatisfiable run settings.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string data;
  std::string response = "y";
  std::size_t p = 0;  // number of mains when no data is given
  unsigned degree = 2;
  std::string heredity = "strong";
  std::vector<std::string> base;  // empty: intercept only
  std::string prior = "HIP";
  std::string scheme = "ch";
  bool whm_penalty = false;
  std::uint64_t iterations = 10'000;
  std::uint64_t seed = 1;
  std::vector<double> weights{0.5, 0.4, 0.1};
  double lambda = 0.5;
  std::optional<double> g;
  std::size_t top_k = 10;
  std::size_t cap = 1'000'000;
  bool center = false;
  bool standardize = false;
  std::string out;
  std::string table;
  std::string trace;
  std::string dot;
  std::string newdata;
  std::string design;
  std::string model;
  std::string method = "auto";

  Heredity heredity_value() const {
    try {
      return parse_heredity(heredity);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }

  PriorSpec prior_spec() const {
    try {
      PriorSpec s{parse_prior_family(prior), parse_scheme(scheme), whm_penalty};
      return s;
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }

  void validate_space() const {
    if (degree < 1) throw ConfigError("degree must be >= 1");
    heredity_value();
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["data"] = data;
    j["response"] = response;
    j["degree"] = degree;
    j["heredity"] = heredity;
    j["base"] = base;
    j["prior"] = prior;
    j["scheme"] = scheme;
    j["whm_penalty"] = whm_penalty;
    j["iterations"] = iterations;
    j["seed"] = seed;
    j["weights"] = weights;
    j["lambda"] = lambda;
    j["g"] = g ? nlohmann::json(*g) : nlohmann::json(nullptr);
    j["top_k"] = top_k;
    j["cap"] = cap;
    j["center"] = center;
    j["standardize"] = standardize;
    return j;
  }
};

inline ModelSpace build_space(std::size_t p, const RunConfig& cfg) {
  cfg.validate_space();
  if (p < 1) throw ConfigError("need at least one main effect");
  std::vector<Term> base;
  try {
    for (const auto& s : cfg.base) base.push_back(Term::parse(s, p));
    if (base.empty()) base.push_back(Term::intercept(p));
    return ModelSpace(base, generate_full_surface(p, cfg.degree), cfg.heredity_value());
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

inline Dataset load_dataset(const RunConfig& cfg) {
  if (cfg.data.empty()) throw ConfigError("--data is required");
  Dataset d = dataset_from_csv(read_csv_file(cfg.data), cfg.response);
  if (cfg.center || cfg.standardize) d = d.standardized(cfg.center, cfg.standardize);
  return d;
}

inline nlohmann::json run_metadata(const RunConfig& cfg, const Dataset* data = nullptr) {
  nlohmann::json m;
  m["tool"] = "hiersel";
  m["version"] = kVersion;
  m["seed"] = cfg.seed;
  m["config"] = cfg.to_json();
  m["marginal"] = {{"method", "g-prior"}, {"g", cfg.g ? nlohmann::json(*cfg.g) : nlohmann::json("n")}};
  if (data) {
    m["n"] = data->n();
    m["mains"] = data->names;
    m["standardization"] = {{"center", data->transform.center}, {"scale", data->transform.standardize}};
  }
  return m;
}

/// Writes to `path`, or to `fallback` when the path is empty.
template <class F>
void with_output(const std::string& path, std::ostream& fallback, F&& write) {
  if (path.empty()) {
    write(fallback);
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + path + "'");
  write(f);
}

/// Runs a command body and maps exceptions to exit codes.
template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const CapExceeded& e) {
    err << "error: " << e.what() << '\n';
    return kExitUnsupported;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const SaturatedModel& e) {
    err << "error: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInfeasible;
  }
}

inline nlohmann::json table_artifact(const PosteriorTable& table, const RunConfig& cfg, const Dataset& data) {
  nlohmann::json j;
  j["format"] = "hiersel-table/1";
  j["metadata"] = run_metadata(cfg, &data);
  j["entries"] = nlohmann::json::array();
  for (const auto& [m, e] : table.entries())
    j["entries"].push_back({{"model", table.space().term_strings(m)},
                            {"log_marginal", e.log_marginal},
                            {"log_prior", e.log_prior},
                            {"visits", e.visits}});
  return j;
}

/// Sampler run on a CSV dataset; writes the posterior summary as JSON.
inline int cmd_select(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (cfg.iterations < 1) throw ConfigError("iterations must be >= 1");
    if (cfg.weights.size() != 3) throw ConfigError("weights needs three values: local, intermediate, global");
    if (cfg.g && !(*cfg.g > 0)) throw ConfigError("g must be positive");
    const PriorSpec spec = cfg.prior_spec();
    const Dataset data = load_dataset(cfg);
    const ModelSpace space = build_space(data.p(), cfg);
    const std::size_t full_dim = space.base_terms().size() + space.size();
    if (static_cast<std::size_t>(data.n()) <= full_dim)
      throw ConfigError("n = " + std::to_string(data.n()) + " does not exceed the full model dimension " +
                        std::to_string(full_dim));

    const GPriorMarginal eval(data, space, cfg.g);
    SamplerConfig sc;
    sc.kernel_weights = {cfg.weights[0], cfg.weights[1], cfg.weights[2]};
    sc.lambda = cfg.lambda;
    sc.iterations = cfg.iterations;
    sc.seed = cfg.seed;
    sc.prior = spec;
    sc.global_proposal = default_global_proposal(space, spec, cfg.cap);
    sc.keep_trace = !cfg.trace.empty();
    try {
      sc.validate();
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
    ModelPrior::Options opts;
    opts.enumeration_cap = cfg.cap;
    Sampler sampler(eval, sc, opts);
    sampler.run();

    PosteriorSummary summary = summarize(sampler.table(), cfg.top_k);
    summary.acceptance_rate = sampler.stats().acceptance_rate();
    nlohmann::json report = to_json(summary, space);
    report["metadata"] = run_metadata(cfg, &data);
    report["metadata"]["prior"] = label(spec);
    if (sc.global_proposal) report["metadata"]["global_proposal"] = label(*sc.global_proposal);
    with_output(cfg.out, out, [&](std::ostream& o) { o << report.dump(2) << '\n'; });
    if (!cfg.table.empty())
      with_output(cfg.table, out, [&](std::ostream& o) { o << table_artifact(sampler.table(), cfg, data).dump() << '\n'; });
    if (!cfg.trace.empty()) with_output(cfg.trace, out, [&](std::ostream& o) { write_trace(o, sampler.trace()); });
    if (!cfg.dot.empty()) with_output(cfg.dot, out, [&](std::ostream& o) { o << export_dot(space, summary.hpm); });
    return static_cast<int>(kExitOk);
  });
}

inline std::string format_probability(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

/// Prior probability of every model of an enumerable space under each requested prior.
/// `prior` may be a family name or "all" (the eight hierarchical columns).
inline int cmd_prior_table(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (cfg.p < 1) throw ConfigError("--p is required");
    const ModelSpace space = build_space(cfg.p, cfg);
    std::vector<PriorSpec> specs;
    if (cfg.prior == "all") {
      specs = hierarchical_prior_grid();
    } else {
      specs.push_back(cfg.prior_spec());
    }
    const auto models = enumerate(space, cfg.cap);
    std::vector<ModelPrior> priors;
    for (const auto& s : specs) priors.emplace_back(space, s, ModelPrior::Options{std::nullopt, cfg.cap});
    with_output(cfg.out, out, [&](std::ostream& o) {
      std::vector<std::string> header{"model"};
      for (const auto& s : specs) header.push_back(label(s));
      write_csv_row(o, header);
      for (const auto& m : models) {
        std::vector<std::string> row{model_label(space, m)};
        for (const auto& pr : priors) row.push_back(format_probability(std::exp(pr.log_prior(m))));
        write_csv_row(o, row);
      }
    });
    return static_cast<int>(kExitOk);
  });
}

/// Exact model count: closed form for quadratic surfaces over an intercept
/// base, enumeration otherwise. `method` is auto, closed or enumerate.
inline int cmd_count(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (cfg.p < 1) throw ConfigError("--p is required");
    const ModelSpace space = build_space(cfg.p, cfg);
    const bool closed_ok = space.is_intercept_quadratic();
    BigCount count;
    if (cfg.method == "closed" || (cfg.method == "auto" && closed_ok)) {
      if (!closed_ok) {
        err << "error: closed-form counts cover degree-2 surfaces over an intercept-only base\n";
        return static_cast<int>(kExitUnsupported);
      }
      count = count_quadratic_space(space);
    } else if (cfg.method == "enumerate" || cfg.method == "auto") {
      try {
        count = count_by_enumeration(space, cfg.cap);
      } catch (const CapExceeded& e) {
        err << "error: " << e.what() << "; no closed form for this space (raise --cap)\n";
        return static_cast<int>(kExitUnsupported);
      }
    } else {
      throw ConfigError("unknown count method '" + cfg.method + "'");
    }
    out << count << '\n';
    return static_cast<int>(kExitOk);
  });
}

/// Graphviz file for a model given as comma-separated terms (--model).
inline int cmd_dot(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (cfg.p < 1) throw ConfigError("--p is required");
    const ModelSpace space = build_space(cfg.p, cfg);
    std::vector<std::string> terms;
    std::stringstream ss(cfg.model);
    for (std::string t; std::getline(ss, t, ',');)
      if (!t.empty()) terms.push_back(t);
    Model m;
    try {
      m = space.model_from_strings(terms);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
    if (!space.is_valid(m)) throw ConfigError("model violates the " + cfg.heredity + " heredity condition");
    with_output(cfg.out, out, [&](std::ostream& o) { o << export_dot(space, m); });
    return static_cast<int>(kExitOk);
  });
}

/// Model-averaged predictions from a saved table. Predictions go to --out
/// (or stdout); with a response column present, PRMSE for K=1 and K=top-k is
/// printed on stdout when --out is set and on stderr otherwise.
inline int cmd_predict(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (cfg.table.empty()) throw ConfigError("--table is required");
    if (cfg.newdata.empty()) throw ConfigError("--newdata is required");
    if (cfg.top_k < 1) throw ConfigError("top-k must be >= 1");
    std::ifstream in(cfg.table);
    if (!in) throw DataError("cannot open table '" + cfg.table + "'");
    nlohmann::json art;
    try {
      art = nlohmann::json::parse(in);
    } catch (const std::exception& e) {
      throw DataError(std::string("malformed table artifact: ") + e.what());
    }
    if (art.value("format", "") != "hiersel-table/1") throw DataError("not a table artifact");
    const auto& meta = art["metadata"];
    RunConfig train = cfg;
    const auto& c = meta["config"];
    train.response = c["response"];
    train.degree = c["degree"];
    train.heredity = c["heredity"];
    train.base = c["base"].get<std::vector<std::string>>();
    train.center = c["center"];
    train.standardize = c["standardize"];
    train.g = c["g"].is_null() ? std::nullopt : std::optional<double>(c["g"].get<double>());
    if (cfg.data.empty()) train.data = c["data"];

    const Dataset data = load_dataset(train);
    const auto names = meta["mains"].get<std::vector<std::string>>();
    if (data.names != names) throw DataError("training data columns do not match the table");
    const ModelSpace space = build_space(data.p(), train);
    const GPriorMarginal eval(data, space, train.g);

    PosteriorTable table(space);
    for (const auto& e : art["entries"]) {
      const Model m = space.model_from_strings(e["model"].get<std::vector<std::string>>());
      const double lm = e["log_marginal"];
      if (std::abs(eval.log_marginal(m) - lm) > 1e-6 * std::max(1.0, std::abs(lm)))
        throw DataError("training data does not reproduce the table's marginals");
      table.record(m, lm, e["log_prior"]);
      table.add_visits(m, e["visits"].get<std::uint64_t>());
    }
    if (table.empty()) throw DataError("table artifact has no entries");

    const CsvTable nd = read_csv_file(cfg.newdata);
    for (const auto& nm : names)
      if (!nd.has_column(nm)) throw DataError("new data lacks column '" + nm + "'");
    const MatrixXd newx = matrix_from_csv(nd, names);
    const VectorXd yhat = model_average_predict(table, eval, newx, cfg.top_k, data.transform);

    with_output(cfg.out, out, [&](std::ostream& o) {
      o << "prediction\n" << std::setprecision(17);
      for (Eigen::Index i = 0; i < yhat.size(); ++i) o << yhat(i) << '\n';
    });
    if (nd.has_column(train.response)) {
      VectorXd y(static_cast<Eigen::Index>(nd.rows.size()));
      const auto yc = nd.column(train.response);
      for (std::size_t r = 0; r < nd.rows.size(); ++r)
        y(static_cast<Eigen::Index>(r)) = parse_number(nd.rows[r][yc], nd.line_numbers[r], train.response);
      const VectorXd hpm = model_average_predict(table, eval, newx, 1, data.transform);
      const double n = static_cast<double>(y.size());
      std::ostream& o = cfg.out.empty() ? err : out;
      o << std::setprecision(10) << "prmse_hpm," << std::sqrt((y - hpm).squaredNorm() / n) << '\n'
        << "prmse_top" << cfg.top_k << ',' << std::sqrt((y - yhat).squaredNorm() / n) << '\n';
    }
    return static_cast<int>(kExitOk);
  });
}

/// Flat key=value text; '#' starts a comment.
inline std::map<std::string, std::string> read_key_values(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    s.erase(0, s.find_first_not_of(" \t\r"));
    s.erase(s.find_last_not_of(" \t\r") + 1);
    return s;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

inline std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string t; std::getline(ss, t, sep);) {
    t.erase(0, t.find_first_not_of(" \t"));
    t.erase(t.find_last_not_of(" \t") + 1);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

/// Simulation design read from a key=value file.
///
/// Keys: preset (quadratic5 | theorem1 | theorem2 | custom), p, degree,
/// heredity, true_model (';'-separated terms), n and snr (','-separated
/// lists), allocation, replications, seed, priors (e.g. HIP.ch,HOP.11),
/// iterations, coefficient, cap.
struct SimulationSpec {
  std::string preset = "custom";
  std::size_t p = 5;
  unsigned degree = 2;
  Heredity heredity = Heredity::Strong;
  std::vector<std::string> true_model;
  std::vector<std::size_t> ns{500};
  std::vector<double> snrs{1.0};
  Allocation allocation = Allocation::Equal;
  std::size_t replications = 20;
  std::uint64_t seed = 1;
  std::vector<PriorSpec> priors;
  std::uint64_t iterations = 10'000;
  double coefficient = 1.0;
  std::size_t cap = 1'000'000;

  static SimulationSpec from_key_values(const std::map<std::string, std::string>& kv) {
    SimulationSpec s;
    auto get = [&](const char* k) -> std::optional<std::string> {
      auto it = kv.find(k);
      return it == kv.end() ? std::nullopt : std::optional<std::string>(it->second);
    };
    static const std::vector<std::string> known{"preset", "p", "degree", "heredity", "true_model", "n", "snr",
                                                "allocation", "replications", "seed", "priors", "iterations",
                                                "coefficient", "cap"};
    for (const auto& [k, v] : kv)
      if (std::find(known.begin(), known.end(), k) == known.end()) throw ConfigError("unknown design key '" + k + "'");
    try {
      if (auto v = get("preset")) s.preset = *v;
      if (s.preset == "quadratic5") {
        s.p = 5;
        for (const auto& t : preset_quadratic_truth()) s.true_model.push_back(t.to_string());
        s.priors = {parse_prior_label("HIP.ch")};
      } else if (s.preset == "theorem1") {
        s.p = 3;
        s.true_model = {"x1", "x2", "x1^2", "x1*x2"};
        s.ns = {100, 500, 2500, 12500};
        s.coefficient = 0.3;
      } else if (s.preset == "theorem2") {
        s.p = 2;
        s.heredity = Heredity::Weak;
        s.ns = {10000};
      } else if (s.preset != "custom") {
        throw ConfigError("unknown preset '" + s.preset + "'");
      }
      if (auto v = get("p")) s.p = std::stoul(*v);
      if (auto v = get("degree")) s.degree = static_cast<unsigned>(std::stoul(*v));
      if (auto v = get("heredity")) s.heredity = parse_heredity(*v);
      if (auto v = get("true_model")) s.true_model = split_list(*v, ';');
      if (auto v = get("n")) {
        s.ns.clear();
        for (const auto& t : split_list(*v, ',')) s.ns.push_back(std::stoul(t));
      }
      if (auto v = get("snr")) {
        s.snrs.clear();
        for (const auto& t : split_list(*v, ',')) s.snrs.push_back(std::stod(t));
      }
      if (auto v = get("allocation")) s.allocation = parse_allocation(*v);
      if (auto v = get("replications")) s.replications = std::stoul(*v);
      if (auto v = get("seed")) s.seed = std::stoull(*v);
      if (auto v = get("priors")) {
        s.priors.clear();
        for (const auto& t : split_list(*v, ',')) s.priors.push_back(parse_prior_label(t));
      }
      if (auto v = get("iterations")) s.iterations = std::stoull(*v);
      if (auto v = get("coefficient")) s.coefficient = std::stod(*v);
      if (auto v = get("cap")) s.cap = std::stoul(*v);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(std::string("invalid design: ") + e.what());
    }
    if (s.priors.empty()) s.priors = {PriorSpec{PriorFamily::HIP, HyperScheme::AllOnes, false}};
    if (s.ns.empty() || s.replications < 1 || s.iterations < 1) throw ConfigError("invalid design: empty n grid or zero counts");
    for (double v : s.snrs)
      if (!(v > 0)) throw ConfigError("invalid design: snr must be positive");
    return s;
  }
};

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

/// Runs a simulation design and writes per-replication rows followed by
/// median rows (replication column "median").
inline int cmd_simulate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (cfg.design.empty()) throw ConfigError("--design is required");
    std::ifstream in(cfg.design);
    if (!in) throw DataError("cannot open design '" + cfg.design + "'");
    const auto spec = SimulationSpec::from_key_values(read_key_values(in));
    ModelSpace space = [&] {
      try {
        return ModelSpace::full_surface(spec.p, spec.degree, spec.heredity);
      } catch (const std::exception& e) {
        throw ConfigError(std::string("invalid design: ") + e.what());
      }
    }();
    std::vector<Term> truth;
    try {
      for (const auto& t : spec.true_model) truth.push_back(Term::parse(t, spec.p));
    } catch (const std::exception& e) {
      throw ConfigError(std::string("invalid design: ") + e.what());
    }

    std::ostringstream buf;
    if (spec.preset == "theorem1") {
      if (spec.heredity != Heredity::Strong) throw ConfigError("theorem1 preset needs strong heredity");
      const auto curve = theorem1_experiment(space, truth, spec.coefficient, spec.ns, spec.replications, spec.seed,
                                             spec.priors.front(), spec.cap);
      write_csv_row(buf, {"replication", "n", "closure_prob"});
      for (std::size_t k = 0; k < curve.ns.size(); ++k)
        for (std::size_t r = 0; r < curve.probs[k].size(); ++r)
          write_csv_row(buf, {std::to_string(r), std::to_string(curve.ns[k]), fmt(curve.probs[k][r])});
      for (std::size_t k = 0; k < curve.ns.size(); ++k)
        write_csv_row(buf, {"median", std::to_string(curve.ns[k]), fmt(curve.medians[k])});
    } else if (spec.preset == "theorem2") {
      write_csv_row(buf, {"replication", "n", "mass_first", "mass_second", "combined_mass", "share_first", "strong_mass"});
      for (auto n : spec.ns) {
        const auto split = theorem2_experiment(n, spec.replications, spec.seed, spec.coefficient, spec.priors.front());
        std::vector<double> comb, share, strong;
        for (std::size_t r = 0; r < split.size(); ++r) {
          const auto& s = split[r];
          write_csv_row(buf, {std::to_string(r), std::to_string(n), fmt(s.first), fmt(s.second), fmt(s.combined),
                              fmt(s.share), fmt(s.strong_mass)});
          comb.push_back(s.combined);
          share.push_back(s.share);
          strong.push_back(s.strong_mass);
        }
        write_csv_row(buf, {"median", std::to_string(n), "", "", fmt(median(comb)), fmt(median(share)), fmt(median(strong))});
        write_csv_row(buf, {"sd", std::to_string(n), "", "", fmt(sample_sd(comb)), fmt(sample_sd(share)), fmt(sample_sd(strong))});
      }
    } else {
      write_csv_row(buf, {"replication", "prior", "n", "snr", "allocation", "tp_rate", "fp_rate", "true_prob",
                          "true_rank", "found"});
      for (auto n : spec.ns)
        for (double snr : spec.snrs) {
          SimDesign d;
          d.n = n;
          d.snr = snr;
          d.allocation = spec.allocation;
          d.true_terms = truth;
          d.replications = spec.replications;
          d.seed = derive_seed(spec.seed, n * 1000003ull + static_cast<std::uint64_t>(snr * 1e6));
          try {
            d.validate(space);
          } catch (const std::exception& e) {
            throw ConfigError(std::string("invalid design: ") + e.what());
          }
          const auto rows = run_selection_experiment(space, d, spec.priors, spec.iterations, spec.cap);
          for (const auto& r : rows)
            write_csv_row(buf, {std::to_string(r.replication), label(r.prior), std::to_string(n), fmt(snr),
                                to_string(spec.allocation), fmt(r.score.tp_rate), fmt(r.score.fp_rate),
                                fmt(r.score.true_model_prob),
                                r.score.true_model_rank ? std::to_string(*r.score.true_model_rank) : "",
                                r.score.found ? "1" : "0"});
          for (const auto& pr : spec.priors) {
            std::vector<double> tp, fp, prob, found;
            for (const auto& r : rows)
              if (r.prior == pr) {
                tp.push_back(r.score.tp_rate);
                fp.push_back(r.score.fp_rate);
                prob.push_back(r.score.true_model_prob);
                found.push_back(r.score.found);
              }
            write_csv_row(buf, {"median", label(pr), std::to_string(n), fmt(snr), to_string(spec.allocation),
                                fmt(median(tp)), fmt(median(fp)), fmt(median(prob)), "", fmt(median(found))});
          }
        }
    }
    with_output(cfg.out, out, [&](std::ostream& o) { o << buf.str(); });
    return static_cast<int>(kExitOk);
  });
}

}  // namespace hiersel
