// bpms: Bayesian predictive model selection for conjugate Gaussian linear
// regression. Subcommands: simulate, select, replicate, size-sweep, evaluate.
// Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 partial results.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "bpms/config.hpp"
#include "bpms/harness.hpp"
#include "bpms/methods.hpp"
#include "bpms/projection.hpp"
#include "bpms/simgen.hpp"

namespace {

using bpms::ordered_json;

constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitPartial = 4;

struct UsageFailure {
  std::string message;
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw bpms::ParseError("cannot write " + path);
  out << text;
}

ordered_json truth_to_json(const bpms::SimConfig& cfg, const bpms::SimTruth& t) {
  ordered_json j;
  j["n"] = cfg.n;
  j["p"] = cfg.p;
  j["rho"] = t.rho;
  j["sigma2"] = t.sigma2;
  j["xi"] = t.xi;
  j["group_size"] = t.group_size;
  j["seed"] = cfg.seed;
  j["true_w"] = std::vector<double>(t.true_w.data(),
                                    t.true_w.data() + t.true_w.size());
  return j;
}

int cmd_simulate(int n, int p, double rho, std::uint64_t seed,
                 const std::string& out_dir) {
  if (rho < 0.0 || rho >= 1.0)
    throw UsageFailure{"--rho must lie in [0, 1)"};
  if (n < 1) throw UsageFailure{"--n must be positive"};
  bpms::SimConfig cfg;
  cfg.n = n;
  cfg.p = p;
  cfg.rho = rho;
  cfg.seed = seed;
  try {
    cfg.validate();
  } catch (const bpms::ConfigError& e) {
    throw UsageFailure{std::string("--p invalid: ") + e.what()};
  }
  const auto [data, truth] = bpms::generate(cfg);
  std::filesystem::create_directories(out_dir);
  bpms::write_dataset_csv(out_dir + "/data.csv", data);
  write_text(out_dir + "/truth.json", truth_to_json(cfg, truth).dump(2) + "\n");
  std::cout << "wrote " << out_dir << "/data.csv (" << data.n() << " x "
            << data.p() << " + y) and " << out_dir << "/truth.json\n";
  return 0;
}

ordered_json json_vec(const std::vector<double>& v) {
  ordered_json arr = ordered_json::array();
  for (double x : v) arr.push_back(bpms::json_num(x));
  return arr;
}

ordered_json json_vec(const Eigen::VectorXd& v) {
  ordered_json arr = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    arr.push_back(bpms::json_num(v[i]));
  return arr;
}

struct SelectFlags {
  std::string data_path;
  std::string method = "bma_proj";
  std::string external_draws;
  std::uint64_t seed = 1;
  int folds = 10;
  int draws = 1000;
  std::uint64_t iters = 200000;
  int chains = 4;
  int max_size = -1;
  bool exact = false;
  double power_threshold = 0.95;
  double prior_a = 1.0, prior_b = 10.0;
  double alpha_tau = 0.5, beta_tau = 0.5, alpha_sigma = 0.5, beta_sigma = 0.5;
  int grid_points = 64;
  int quad_points = 201;
  std::string out_path;
  std::string models_out;
};

ordered_json posterior_models_json(const bpms::ModelPosterior& post,
                                   std::size_t limit) {
  ordered_json arr = ordered_json::array();
  const std::size_t count = std::min(limit, post.models.size());
  for (std::size_t i = 0; i < count; ++i) {
    ordered_json m;
    m["indicator"] = post.models[i].subset.bits();
    m["probability"] = post.prob(i);
    if (post.source == bpms::ModelPosterior::Source::chain)
      m["visits"] = post.models[i].visits;
    arr.push_back(m);
  }
  return arr;
}

int cmd_select(const SelectFlags& f) {
  if (!bpms::is_method_tag(f.method))
    throw UsageFailure{"--method must be one of the Table battery tags"};
  const bpms::Dataset raw = bpms::load_dataset_csv(f.data_path);
  const bpms::Dataset train = bpms::standardize(raw);

  bpms::MethodSettings st;
  st.folds = f.folds;
  st.draws = f.draws;
  st.iters = f.iters;
  st.chains = f.chains;
  st.max_size = f.max_size;
  st.exact = f.exact;
  st.power_threshold = f.power_threshold;
  st.quad.points = f.quad_points;

  ordered_json j;
  j["method"] = f.method;
  j["data"] = f.data_path;
  j["n"] = train.n();
  j["p"] = train.p();
  j["seed"] = f.seed;

  bpms::MethodResult res;
  bpms::GaussPrior gp = bpms::make_gauss_prior(
      f.alpha_tau, f.beta_tau, f.alpha_sigma, f.beta_sigma, f.grid_points);
  if (!f.external_draws.empty()) {
    if (f.method != "bma_proj")
      throw UsageFailure{"--external-draws requires --method bma_proj"};
    const bpms::PosteriorDraws draws =
        bpms::read_draws_csv(f.external_draws, train.p());
    res = bpms::run_projection_method(train, draws, st);
    j["draws_source"] = f.external_draws;
  } else {
    bpms::ReferenceWorkspace ws(train, gp, bpms::ModelSpacePrior{f.prior_a, f.prior_b},
                                st, f.seed);
    res = bpms::run_method(ws, f.method);
    if (bpms::method_needs_reference(f.method)) {
      const bpms::ModelPosterior& post = ws.posterior();
      j["inclusion"] = json_vec(post.inclusion);
      if (post.source == bpms::ModelPosterior::Source::chain) {
        ordered_json diag;
        diag["acceptance_rate"] = post.acceptance_rate;
        diag["chains"] = post.chains;
        diag["distinct_models"] = post.models.size();
        // chain spread of the inclusion probabilities (min/max across chains)
        diag["inclusion_chain_min"] =
            json_vec(post.per_chain_inclusion.colwise().minCoeff().transpose().eval());
        diag["inclusion_chain_max"] =
            json_vec(post.per_chain_inclusion.colwise().maxCoeff().transpose().eval());
        j["chain"] = diag;
      }
      j["top_models"] = posterior_models_json(post, 20);
      if (!f.models_out.empty()) {
        ordered_json dump;
        dump["inclusion"] = json_vec(post.inclusion);
        dump["models"] = posterior_models_json(post, post.models.size());
        write_text(f.models_out, dump.dump(2) + "\n");
      }
    }
  }

  ordered_json sel;
  sel["size"] = res.selected_size;
  sel["indicator"] = res.selected.bits();
  j["selected"] = sel;
  if (!res.path.order.empty() || !res.path.criterion_values.empty()) {
    ordered_json pj;
    pj["order"] = res.path.order;
    pj["criterion_values"] = json_vec(res.path.criterion_values);
    if (!res.path.discrepancies.empty()) {
      pj["discrepancies"] = json_vec(res.path.discrepancies);
      std::vector<double> phi;
      const double d0 = res.path.discrepancies.front();
      for (double d : res.path.discrepancies)
        phi.push_back(d0 > 0 ? 1.0 - d / d0
                             : std::numeric_limits<double>::quiet_NaN());
      pj["explanatory_power"] = json_vec(phi);
    }
    j["path"] = pj;
  }

  const std::string text = j.dump(2) + "\n";
  if (f.out_path.empty())
    std::cout << text;
  else
    write_text(f.out_path, text);
  return 0;
}

struct EvaluateFlags {
  std::string train_path, test_path;
  std::string method = "bma";
  std::string indicator;
  std::uint64_t seed = 1;
  int draws = 1000;
  std::uint64_t iters = 200000;
  int chains = 4;
  bool exact = false;
  double prior_a = 1.0, prior_b = 10.0;
  std::string out_path;
};

int cmd_evaluate(const EvaluateFlags& f) {
  const bpms::Dataset train = bpms::standardize(bpms::load_dataset_csv(f.train_path));
  const bpms::Dataset test = bpms::apply_standardization(
      bpms::load_dataset_csv(f.test_path), train.column_means, train.column_sds);
  bpms::MethodSettings st;
  st.draws = f.draws;
  st.iters = f.iters;
  st.chains = f.chains;
  st.exact = f.exact;
  bpms::ReferenceWorkspace ws(train, bpms::make_gauss_prior(),
                              bpms::ModelSpacePrior{f.prior_a, f.prior_b}, st,
                              f.seed);
  const bpms::UtilityEstimate bma_u =
      bpms::mlpd(ws.bma_predictive_source(), test);
  ordered_json j;
  j["train"] = f.train_path;
  j["test"] = f.test_path;
  j["n_test"] = test.n();
  j["bma_mlpd"] = bpms::json_num(bma_u.value);
  if (f.method == "bma") {
    j["method"] = "bma";
    j["mlpd"] = bpms::json_num(bma_u.value);
    j["delta_mlpd"] = 0.0;
  } else {
    if (f.indicator.empty())
      throw UsageFailure{"--indicator is required unless --method bma"};
    if (static_cast<int>(f.indicator.size()) != train.p())
      throw UsageFailure{"--indicator length must equal p"};
    const bpms::SubmodelIndicator s =
        bpms::SubmodelIndicator::from_bits(f.indicator);
    const std::string tag = f.method == "proj" ? "bma_proj" : f.method;
    const bpms::UtilityEstimate u =
        bpms::mlpd(bpms::method_predictive(ws, tag, s), test);
    j["method"] = f.method;
    j["indicator"] = f.indicator;
    j["mlpd"] = bpms::json_num(u.value);
    j["delta_mlpd"] = bpms::json_num(u.value - bma_u.value);
  }
  const std::string text = j.dump(2) + "\n";
  if (f.out_path.empty())
    std::cout << text;
  else
    write_text(f.out_path, text);
  return 0;
}

bpms::ExperimentConfig load_config(const std::string& path,
                                   const std::string& out_override,
                                   std::int64_t seed_override,
                                   std::int64_t reps_override) {
  bpms::ExperimentConfig cfg =
      path.empty() ? bpms::ExperimentConfig{}
                   : bpms::ExperimentConfig::from_ini(bpms::IniFile::parse_file(path));
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
  if (reps_override >= 0) cfg.replications = static_cast<int>(reps_override);
  cfg.validate();
  return cfg;
}

int cmd_replicate(const bpms::ExperimentConfig& cfg) {
  const bpms::ReplicateSummary summary = bpms::run_replicate(cfg);
  std::cout << "replications: " << summary.outputs.size() << " ok";
  if (!summary.failed_replications.empty()) {
    std::cout << ", failed ids:";
    for (int id : summary.failed_replications) std::cout << ' ' << id;
  }
  std::cout << "\nwrote " << cfg.out_dir << "/records.jsonl, curves.csv, methods.csv\n";
  return summary.failed_replications.empty() ? 0 : kExitPartial;
}

int cmd_size_sweep(const bpms::ExperimentConfig& cfg) {
  const bpms::SizeSweepSummary summary = bpms::run_size_sweep(cfg);
  std::cout << "sweep rows: " << summary.rows.size() << '\n';
  for (double alpha : cfg.alphas)
    std::cout << "alpha=" << alpha
              << " safety fraction=" << summary.safety_fraction(alpha) << '\n';
  std::cout << "wrote " << cfg.out_dir << "/sweep.csv, sweep.jsonl\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian predictive model selection for Gaussian linear regression"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a simulated dataset");
  int sim_n = 100, sim_p = 100;
  double sim_rho = 0.0;
  std::uint64_t sim_seed = 1;
  std::string sim_out = "simdata";
  sim->add_option("--n", sim_n, "rows");
  sim->add_option("--p", sim_p, "predictors (multiple of 5, >= 15)");
  sim->add_option("--rho", sim_rho, "in-group correlation in [0,1)");
  sim->add_option("--seed", sim_seed, "rng seed");
  sim->add_option("--out", sim_out, "output directory");

  // select
  auto* sel = app.add_subcommand("select", "run one selection method");
  SelectFlags sf;
  sel->add_option("--data", sf.data_path, "dataset csv")->required();
  sel->add_option("--method", sf.method, "method tag");
  sel->add_option("--external-draws", sf.external_draws,
                  "csv of full-model posterior draws (sigma2, w0..wp)");
  sel->add_option("--seed", sf.seed, "rng seed");
  sel->add_option("--folds", sf.folds, "cv folds");
  sel->add_option("--draws", sf.draws, "posterior draws S");
  sel->add_option("--iters", sf.iters, "sampler iterations per chain");
  sel->add_option("--chains", sf.chains, "sampler chains");
  sel->add_option("--max-size", sf.max_size, "search depth (-1: full)");
  sel->add_flag("--exact", sf.exact, "enumerate the model space (p <= 20)");
  sel->add_option("--power-threshold", sf.power_threshold,
                  "explanatory-power stop for reference methods");
  sel->add_option("--prior-a", sf.prior_a, "model-space Beta a");
  sel->add_option("--prior-b", sf.prior_b, "model-space Beta b");
  sel->add_option("--alpha-tau", sf.alpha_tau, "tau2 prior shape");
  sel->add_option("--beta-tau", sf.beta_tau, "tau2 prior scale");
  sel->add_option("--alpha-sigma", sf.alpha_sigma, "sigma2 prior shape");
  sel->add_option("--beta-sigma", sf.beta_sigma, "sigma2 prior scale");
  sel->add_option("--grid-points", sf.grid_points, "tau2 grid size");
  sel->add_option("--quad-points", sf.quad_points, "reference quadrature points");
  sel->add_option("--out", sf.out_path, "result json path (default stdout)");
  sel->add_option("--models-out", sf.models_out,
                  "write the full model-space posterior summary as json");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "score a model on held-out data");
  EvaluateFlags ef;
  ev->add_option("--train", ef.train_path, "training csv")->required();
  ev->add_option("--test", ef.test_path, "test csv")->required();
  ev->add_option("--method", ef.method, "bma | refit | proj");
  ev->add_option("--indicator", ef.indicator, "variable bits, e.g. 01101");
  ev->add_option("--seed", ef.seed, "rng seed");
  ev->add_option("--draws", ef.draws, "posterior draws S");
  ev->add_option("--iters", ef.iters, "sampler iterations per chain");
  ev->add_option("--chains", ef.chains, "sampler chains");
  ev->add_flag("--exact", ef.exact, "enumerate the model space (p <= 20)");
  ev->add_option("--prior-a", ef.prior_a, "model-space Beta a");
  ev->add_option("--prior-b", ef.prior_b, "model-space Beta b");
  ev->add_option("--out", ef.out_path, "result json path (default stdout)");

  // replicate / size-sweep
  auto* rep = app.add_subcommand("replicate", "replication study over methods");
  auto* sweep = app.add_subcommand("size-sweep", "(U, alpha) size-rule sweep");
  std::string rep_config, sweep_config, rep_out, sweep_out;
  std::int64_t rep_seed = -1, sweep_seed = -1, rep_n = -1, sweep_n = -1;
  bool rep_print = false, sweep_print = false;
  std::vector<double> sweep_alphas, sweep_us;
  rep->add_option("--config", rep_config, "ini config file");
  rep->add_flag("--print-config", rep_print, "print effective config and exit");
  rep->add_option("--out", rep_out, "output directory override");
  rep->add_option("--seed", rep_seed, "seed override");
  rep->add_option("--replications", rep_n, "replication count override");
  sweep->add_option("--config", sweep_config, "ini config file");
  sweep->add_flag("--print-config", sweep_print, "print effective config and exit");
  sweep->add_option("--out", sweep_out, "output directory override");
  sweep->add_option("--seed", sweep_seed, "seed override");
  sweep->add_option("--replications", sweep_n, "replication count override");
  sweep->add_option("--alpha", sweep_alphas, "size-rule alpha values");
  sweep->add_option("--utility-threshold", sweep_us,
                    "size-rule U values as fractions of the reference-empty gap");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (sim->parsed()) return cmd_simulate(sim_n, sim_p, sim_rho, sim_seed, sim_out);
    if (sel->parsed()) return cmd_select(sf);
    if (ev->parsed()) return cmd_evaluate(ef);
    if (rep->parsed()) {
      const bpms::ExperimentConfig cfg =
          load_config(rep_config, rep_out, rep_seed, rep_n);
      if (rep_print) {
        std::cout << cfg.to_ini();
        return 0;
      }
      return cmd_replicate(cfg);
    }
    if (sweep->parsed()) {
      bpms::ExperimentConfig cfg =
          load_config(sweep_config, sweep_out, sweep_seed, sweep_n);
      if (!sweep_alphas.empty()) cfg.alphas = sweep_alphas;
      if (!sweep_us.empty()) cfg.u_fracs = sweep_us;
      if (sweep_print) {
        std::cout << cfg.to_ini();
        return 0;
      }
      return cmd_size_sweep(cfg);
    }
  } catch (const UsageFailure& e) {
    std::cerr << "error: " << e.message << '\n';
    return kExitUsage;
  } catch (const bpms::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const bpms::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const bpms::Error& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return kExitNumerical;
  }
  return 0;
}
