// Experiment configuration: flat key = value pairs under [section] headers,
// '#' comments. Every key has a default; --print-config emits the full set.
#ifndef BPMS_CONFIG_HPP
#define BPMS_CONFIG_HPP

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "bpms/errors.hpp"
#include "bpms/methods.hpp"
#include "bpms/simgen.hpp"

namespace bpms {

class IniFile {
 public:
  static IniFile parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
  }

  static IniFile parse(const std::string& text, const std::string& origin = "") {
    IniFile ini;
    std::string section = "";
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw ConfigError(origin + ": unterminated section at line " +
                            std::to_string(line_no));
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ": expected key = value at line " +
                          std::to_string(line_no));
      ini.values_[section + "." + trim(line.substr(0, eq))] =
          trim(line.substr(eq + 1));
    }
    return ini;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      return std::stod(it->second);
    } catch (const std::exception&) {
      throw ConfigError("key " + key + ": cannot parse number '" + it->second + "'");
    }
  }

  std::int64_t get(const std::string& key, std::int64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      return std::stoll(it->second);
    } catch (const std::exception&) {
      throw ConfigError("key " + key + ": cannot parse integer '" + it->second + "'");
    }
  }

  bool get(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigError("key " + key + ": expected true/false");
  }

  std::vector<std::string> get_list(const std::string& key,
                                    const std::string& fallback) const {
    std::vector<std::string> out;
    std::istringstream ss(get(key, fallback));
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cell = trim(cell);
      if (!cell.empty()) out.push_back(cell);
    }
    return out;
  }

  std::vector<double> get_double_list(const std::string& key,
                                      const std::string& fallback) const {
    std::vector<double> out;
    for (const auto& cell : get_list(key, fallback)) {
      try {
        out.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError("key " + key + ": cannot parse number '" + cell + "'");
      }
    }
    return out;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
};

struct ExperimentConfig {
  // data source: simulated unless a dataset path is given
  SimConfig sim;
  std::string data_path;
  std::string test_path;
  int test_n = 1000;
  int split_train_n = 0;  // with data_path: random split size per replication

  std::vector<std::string> methods = method_tags();
  int replications = 50;
  std::uint64_t seed = 1;
  std::string out_dir = "out";

  double alpha_tau = 0.5, beta_tau = 0.5, alpha_sigma = 0.5, beta_sigma = 0.5;
  int grid_points = 64;
  ModelSpacePrior mprior{1.0, 10.0};

  MethodSettings settings;

  // size rule
  std::vector<double> alphas{0.95};
  std::vector<double> u_fracs{-0.05};
  int k_outer = 10;
  std::string sweep_method = "bma_proj";
  bool sweep_draw_reference = true;

  GaussPrior gprior() const {
    return make_gauss_prior(alpha_tau, beta_tau, alpha_sigma, beta_sigma,
                            grid_points);
  }

  void validate() const {
    if (replications < 1) throw ConfigError("replications must be >= 1");
    for (const auto& m : methods)
      if (!is_method_tag(m)) throw ConfigError("unknown method tag: " + m);
    if (data_path.empty()) sim.validate();
    if (!is_method_tag(sweep_method) || sweep_method == "map")
      throw ConfigError("sweep method must be a search method");
  }

  static ExperimentConfig from_ini(const IniFile& ini) {
    ExperimentConfig c;
    c.sim.n = static_cast<int>(ini.get("sim.n", std::int64_t{100}));
    c.sim.p = static_cast<int>(ini.get("sim.p", std::int64_t{100}));
    c.sim.rho = ini.get("sim.rho", c.sim.rho);
    c.data_path = ini.get("data.path", std::string{});
    c.test_path = ini.get("data.test_path", std::string{});
    c.test_n = static_cast<int>(ini.get("data.test_n", std::int64_t{1000}));
    c.split_train_n =
        static_cast<int>(ini.get("data.split_train_n", std::int64_t{0}));
    c.methods = ini.get_list("run.methods",
                             "cv10,waic,dic,l2,l2cv,l2k,map,mpp_median,"
                             "bma_ref,bma_proj");
    c.replications = static_cast<int>(ini.get("run.replications", std::int64_t{50}));
    c.seed = static_cast<std::uint64_t>(ini.get("run.seed", std::int64_t{1}));
    c.out_dir = ini.get("run.out", std::string{"out"});
    c.alpha_tau = ini.get("model.alpha_tau", 0.5);
    c.beta_tau = ini.get("model.beta_tau", 0.5);
    c.alpha_sigma = ini.get("model.alpha_sigma", 0.5);
    c.beta_sigma = ini.get("model.beta_sigma", 0.5);
    c.grid_points = static_cast<int>(ini.get("model.grid_points", std::int64_t{64}));
    c.mprior.a = ini.get("model.prior_a", 1.0);
    c.mprior.b = ini.get("model.prior_b", 10.0);
    c.settings.folds = static_cast<int>(ini.get("selection.folds", std::int64_t{10}));
    c.settings.draws = static_cast<int>(ini.get("selection.draws", std::int64_t{1000}));
    c.settings.iters =
        static_cast<std::uint64_t>(ini.get("selection.iters", std::int64_t{200000}));
    c.settings.chains = static_cast<int>(ini.get("selection.chains", std::int64_t{4}));
    c.settings.max_size =
        static_cast<int>(ini.get("selection.max_size", std::int64_t{-1}));
    c.settings.power_threshold = ini.get("selection.power_threshold", 0.95);
    c.settings.quad.points =
        static_cast<int>(ini.get("selection.quad_points", std::int64_t{201}));
    c.settings.quad.half_width_scales = ini.get("selection.quad_scales", 10.0);
    c.settings.bma_mass = ini.get("selection.bma_mass", 0.9999);
    c.settings.l2k_k = ini.get("selection.l2k_k", 1.0);
    c.settings.exact = ini.get("selection.exact", false);
    c.settings.bootstrap_draws =
        static_cast<int>(ini.get("size_rule.bootstrap_draws", std::int64_t{4000}));
    c.alphas = ini.get_double_list("size_rule.alpha", "0.95");
    c.u_fracs = ini.get_double_list("size_rule.u_frac", "-0.05");
    c.k_outer = static_cast<int>(ini.get("size_rule.k_outer", std::int64_t{10}));
    c.sweep_method = ini.get("size_rule.method", std::string{"bma_proj"});
    c.sweep_draw_reference = ini.get("size_rule.draw_based_reference", true);
    c.validate();
    return c;
  }

  std::string to_ini() const {
    std::ostringstream out;
    out << "[sim]\n"
        << "n = " << sim.n << "\np = " << sim.p << "\nrho = " << sim.rho
        << "\n\n[data]\npath = " << data_path << "\ntest_path = " << test_path
        << "\ntest_n = " << test_n << "\nsplit_train_n = " << split_train_n
        << "\n\n[run]\nmethods = ";
    for (std::size_t i = 0; i < methods.size(); ++i)
      out << (i ? "," : "") << methods[i];
    out << "\nreplications = " << replications << "\nseed = " << seed
        << "\nout = " << out_dir << "\n\n[model]\nalpha_tau = " << alpha_tau
        << "\nbeta_tau = " << beta_tau << "\nalpha_sigma = " << alpha_sigma
        << "\nbeta_sigma = " << beta_sigma << "\ngrid_points = " << grid_points
        << "\nprior_a = " << mprior.a << "\nprior_b = " << mprior.b
        << "\n\n[selection]\nfolds = " << settings.folds
        << "\ndraws = " << settings.draws << "\niters = " << settings.iters
        << "\nchains = " << settings.chains
        << "\nmax_size = " << settings.max_size
        << "\npower_threshold = " << settings.power_threshold
        << "\nquad_points = " << settings.quad.points
        << "\nquad_scales = " << settings.quad.half_width_scales
        << "\nbma_mass = " << settings.bma_mass
        << "\nl2k_k = " << settings.l2k_k
        << "\nexact = " << (settings.exact ? "true" : "false")
        << "\n\n[size_rule]\nbootstrap_draws = " << settings.bootstrap_draws
        << "\nalpha = ";
    for (std::size_t i = 0; i < alphas.size(); ++i)
      out << (i ? "," : "") << alphas[i];
    out << "\nu_frac = ";
    for (std::size_t i = 0; i < u_fracs.size(); ++i)
      out << (i ? "," : "") << u_fracs[i];
    out << "\nk_outer = " << k_outer << "\nmethod = " << sweep_method
        << "\ndraw_based_reference = " << (sweep_draw_reference ? "true" : "false")
        << "\n";
    return out.str();
  }
};

}  // namespace bpms

#endif
