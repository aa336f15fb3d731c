// Experiment harness: replication studies over the method battery and the
// (U, alpha) size-selection sweep, with JSON-lines records and tidy CSV
// aggregates. Work is split across replications; each task derives its own
// seed stream, so results are identical for any worker count.
#ifndef BPMS_HARNESS_HPP
#define BPMS_HARNESS_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "bpms/config.hpp"
#include "bpms/core.hpp"
#include "bpms/criteria.hpp"
#include "bpms/errors.hpp"
#include "bpms/methods.hpp"
#include "bpms/search.hpp"
#include "bpms/simgen.hpp"

namespace bpms {

using ordered_json = nlohmann::ordered_json;

// -inf log densities must survive JSON round trips; encode non-finite values
// as strings.
inline ordered_json json_num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline double num_from_json(const ordered_json& j) {
  if (j.is_number()) return j.get<double>();
  const std::string s = j.get<std::string>();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  return std::numeric_limits<double>::quiet_NaN();
}

struct ResultRecord {
  int replication = 0;
  std::string method;
  int selected_size = 0;
  std::string indicator;
  double test_mlpd = 0.0;
  double delta_mlpd = 0.0;
  double insel_value = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> bias_gap;
  double wall_time_s = 0.0;

  ordered_json to_json() const {
    ordered_json j;
    j["replication"] = replication;
    j["method"] = method;
    j["selected_size"] = selected_size;
    j["indicator"] = indicator;
    j["test_mlpd"] = json_num(test_mlpd);
    j["delta_mlpd"] = json_num(delta_mlpd);
    j["insel_value"] = json_num(insel_value);
    j["bias_gap"] = bias_gap ? json_num(*bias_gap) : ordered_json(nullptr);
    j["wall_time_s"] = wall_time_s;
    return j;
  }

  static ResultRecord from_json(const ordered_json& j) {
    ResultRecord r;
    r.replication = j.at("replication").get<int>();
    r.method = j.at("method").get<std::string>();
    r.selected_size = j.at("selected_size").get<int>();
    r.indicator = j.at("indicator").get<std::string>();
    r.test_mlpd = num_from_json(j.at("test_mlpd"));
    r.delta_mlpd = num_from_json(j.at("delta_mlpd"));
    r.insel_value = num_from_json(j.at("insel_value"));
    if (!j.at("bias_gap").is_null()) r.bias_gap = num_from_json(j.at("bias_gap"));
    r.wall_time_s = j.at("wall_time_s").get<double>();
    return r;
  }
};

struct ReplicationOutput {
  int replication = 0;
  double bma_test_mlpd = 0.0;
  std::vector<ResultRecord> records;
  // per-size test utility relative to the BMA along each method's path
  std::map<std::string, std::vector<double>> test_delta_curves;
  std::map<std::string, std::vector<double>> insel_curves;
};

// ---------------------------------------------------------------------------
// Data preparation per replication.

struct PreparedData {
  Dataset train;  // standardized
  Dataset test;   // on the training transform
};

inline PreparedData prepare_data(const ExperimentConfig& cfg, int rep) {
  if (cfg.data_path.empty()) {
    SimConfig sim = cfg.sim;
    sim.seed = seed_stream(cfg.seed, 2 * static_cast<std::uint64_t>(rep));
    auto [train_raw, truth] = generate(sim);
    SimConfig test_sim = cfg.sim;
    test_sim.n = cfg.test_n;
    test_sim.seed = seed_stream(cfg.seed, 2 * static_cast<std::uint64_t>(rep) + 1);
    auto [test_raw, truth2] = generate(test_sim);
    Dataset train = standardize(train_raw);
    Dataset test =
        apply_standardization(test_raw, train.column_means, train.column_sds);
    return {std::move(train), std::move(test)};
  }
  const Dataset full = load_dataset_csv(cfg.data_path);
  if (!cfg.test_path.empty()) {
    Dataset train = standardize(full);
    Dataset test = apply_standardization(load_dataset_csv(cfg.test_path),
                                         train.column_means, train.column_sds);
    return {std::move(train), std::move(test)};
  }
  // random train/test split per replication
  const int train_n = cfg.split_train_n > 0
                          ? cfg.split_train_n
                          : std::max(1, full.n() - cfg.test_n);
  if (train_n >= full.n())
    throw ConfigError("split_train_n leaves no test rows");
  std::vector<int> perm(static_cast<std::size_t>(full.n()));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed_stream(cfg.seed, 900000 + static_cast<std::uint64_t>(rep)));
  rng.shuffle(perm);
  const std::vector<int> train_rows(perm.begin(), perm.begin() + train_n);
  const std::vector<int> test_rows(perm.begin() + train_n, perm.end());
  Dataset train = standardize(subset_rows(full, train_rows));
  Dataset test = apply_standardization(subset_rows(full, test_rows),
                                       train.column_means, train.column_sds);
  return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// One replication of the full battery.

inline ReplicationOutput run_replication(const ExperimentConfig& cfg, int rep) {
  using clock = std::chrono::steady_clock;
  PreparedData data = prepare_data(cfg, rep);
  ReferenceWorkspace ws(std::move(data.train), cfg.gprior(), cfg.mprior,
                        cfg.settings, seed_stream(cfg.seed, 1000000 +
                                                  static_cast<std::uint64_t>(rep)));
  ReplicationOutput out;
  out.replication = rep;

  // the BMA is the Delta MLPD baseline for every method
  const UtilityEstimate bma_u = mlpd(ws.bma_predictive_source(), data.test);
  out.bma_test_mlpd = bma_u.value;

  const int p = ws.train().p();
  for (const std::string& tag : cfg.methods) {
    const auto t0 = clock::now();
    const MethodResult res = run_method(ws, tag);
    ResultRecord rec;
    rec.replication = rep;
    rec.method = tag;
    rec.selected_size = res.selected_size;
    rec.indicator = res.selected.bits();

    const UtilityEstimate sel_u =
        mlpd(method_predictive(ws, tag, res.selected), data.test);
    rec.test_mlpd = sel_u.value;
    rec.delta_mlpd = sel_u.value - bma_u.value;

    if (!res.path.criterion_values.empty() &&
        res.selected_size < static_cast<int>(res.path.criterion_values.size())) {
      rec.insel_value =
          res.path.criterion_values[static_cast<std::size_t>(res.selected_size)];
      if (res.insel_is_mlpd) rec.bias_gap = rec.insel_value - rec.test_mlpd;
    }

    if (!res.path.order.empty()) {
      std::vector<double> curve;
      curve.reserve(res.path.criterion_values.size());
      for (int m = 0; m <= res.path.max_size(); ++m) {
        const UtilityEstimate u =
            mlpd(method_predictive(ws, tag, res.path.prefix(m, p)), data.test);
        curve.push_back(u.value - bma_u.value);
      }
      out.test_delta_curves[tag] = std::move(curve);
      out.insel_curves[tag] = res.path.criterion_values;
    }

    rec.wall_time_s =
        std::chrono::duration<double>(clock::now() - t0).count();
    out.records.push_back(std::move(rec));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Worker pool: tasks indexed 0..count-1, outputs stored by index.

inline int worker_count_from_env() {
  const char* env = std::getenv("BPMS_WORKERS");
  if (!env) return 1;
  const int w = std::atoi(env);
  return w < 1 ? 1 : w;
}

template <typename Fn>
void parallel_tasks(int count, int workers, Fn&& fn) {
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  const int n_threads = std::min(workers, count);
  pool.reserve(static_cast<std::size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t)
    pool.emplace_back([&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= count) return;
        fn(i);
      }
    });
  for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------------------
// Replicate runner with file outputs.

struct ReplicateSummary {
  std::vector<ReplicationOutput> outputs;
  std::vector<int> failed_replications;

  double mean_delta(const std::string& method) const {
    double acc = 0.0;
    int n = 0;
    for (const auto& o : outputs)
      for (const auto& r : o.records)
        if (r.method == method) {
          acc += r.delta_mlpd;
          ++n;
        }
    return n ? acc / n : std::numeric_limits<double>::quiet_NaN();
  }

  double mean_bias_gap(const std::string& method) const {
    double acc = 0.0;
    int n = 0;
    for (const auto& o : outputs)
      for (const auto& r : o.records)
        if (r.method == method && r.bias_gap) {
          acc += *r.bias_gap;
          ++n;
        }
    return n ? acc / n : std::numeric_limits<double>::quiet_NaN();
  }
};

inline void write_records_jsonl(const std::string& path,
                                const ReplicateSummary& summary) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  for (const auto& o : summary.outputs)
    for (const auto& r : o.records) out << r.to_json().dump() << '\n';
}

inline void write_curve_aggregates_csv(const std::string& path,
                                       const ReplicateSummary& summary) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out << "method,size,mean_delta_mlpd,lo95,hi95,mean_insel,replications\n";
  std::map<std::string, std::size_t> max_len;
  for (const auto& o : summary.outputs)
    for (const auto& [tag, curve] : o.test_delta_curves)
      max_len[tag] = std::max(max_len[tag], curve.size());
  for (const auto& [tag, len] : max_len) {
    for (std::size_t m = 0; m < len; ++m) {
      std::vector<double> deltas, insels;
      for (const auto& o : summary.outputs) {
        auto it = o.test_delta_curves.find(tag);
        if (it != o.test_delta_curves.end() && m < it->second.size())
          deltas.push_back(it->second[m]);
        auto it2 = o.insel_curves.find(tag);
        if (it2 != o.insel_curves.end() && m < it2->second.size())
          insels.push_back(it2->second[m]);
      }
      if (deltas.empty()) continue;
      std::sort(deltas.begin(), deltas.end());
      const double mean =
          std::accumulate(deltas.begin(), deltas.end(), 0.0) / deltas.size();
      auto quantile = [&](double q) {
        const double pos = q * (deltas.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, deltas.size() - 1);
        return deltas[lo] + (pos - lo) * (deltas[hi] - deltas[lo]);
      };
      const double mean_insel =
          insels.empty() ? std::numeric_limits<double>::quiet_NaN()
                         : std::accumulate(insels.begin(), insels.end(), 0.0) /
                               insels.size();
      out << tag << ',' << m << ',' << format_double(mean) << ','
          << format_double(quantile(0.025)) << ','
          << format_double(quantile(0.975)) << ','
          << format_double(mean_insel) << ',' << deltas.size() << '\n';
    }
  }
}

inline void write_method_summary_csv(const std::string& path,
                                     const ReplicateSummary& summary,
                                     const std::vector<std::string>& methods) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out << "method,replications,mean_selected_size,mean_delta_mlpd,"
         "mean_bias_gap,mean_wall_time_s\n";
  for (const auto& tag : methods) {
    double size_acc = 0.0, wall_acc = 0.0;
    int n = 0;
    for (const auto& o : summary.outputs)
      for (const auto& r : o.records)
        if (r.method == tag) {
          size_acc += r.selected_size;
          wall_acc += r.wall_time_s;
          ++n;
        }
    if (n == 0) continue;
    out << tag << ',' << n << ',' << format_double(size_acc / n) << ','
        << format_double(summary.mean_delta(tag)) << ','
        << format_double(summary.mean_bias_gap(tag)) << ','
        << format_double(wall_acc / n) << '\n';
  }
}

inline ReplicateSummary run_replicate(const ExperimentConfig& cfg,
                                      bool write_files = true,
                                      int workers = worker_count_from_env()) {
  cfg.validate();
  ReplicateSummary summary;
  summary.outputs.resize(static_cast<std::size_t>(cfg.replications));
  std::vector<char> failed(static_cast<std::size_t>(cfg.replications), 0);
  parallel_tasks(cfg.replications, workers, [&](int rep) {
    try {
      summary.outputs[static_cast<std::size_t>(rep)] = run_replication(cfg, rep);
    } catch (const std::exception&) {
      failed[static_cast<std::size_t>(rep)] = 1;
    }
  });
  for (int rep = 0; rep < cfg.replications; ++rep)
    if (failed[static_cast<std::size_t>(rep)])
      summary.failed_replications.push_back(rep);
  // drop failed slots but keep ordering for the rest
  if (!summary.failed_replications.empty()) {
    std::vector<ReplicationOutput> kept;
    for (auto& o : summary.outputs)
      if (!o.records.empty()) kept.push_back(std::move(o));
    summary.outputs = std::move(kept);
  }
  if (write_files) {
    std::filesystem::create_directories(cfg.out_dir);
    write_records_jsonl(cfg.out_dir + "/records.jsonl", summary);
    write_curve_aggregates_csv(cfg.out_dir + "/curves.csv", summary);
    write_method_summary_csv(cfg.out_dir + "/methods.csv", summary, cfg.methods);
  }
  return summary;
}

// ---------------------------------------------------------------------------
// Size-selection sweep over the (U, alpha) grid.

struct SizeSweepRow {
  int replication = 0;
  double u_frac = 0.0;
  double U = 0.0;
  double alpha = 0.0;
  int selected_m = 0;
  bool satisfied = false;
  double final_delta_mlpd = 0.0;
  double final_se = 0.0;   // standard error of the final-delta estimate
  double inner_gap = 0.0;  // reference-minus-empty utility gap in the inner CV
  Eigen::VectorXd probabilities;  // per size, Pr(weighted mean diff >= U)

  ordered_json to_json() const {
    ordered_json j;
    j["replication"] = replication;
    j["u_frac"] = u_frac;
    j["U"] = json_num(U);
    j["alpha"] = alpha;
    j["selected_m"] = selected_m;
    j["satisfied"] = satisfied;
    j["final_delta_mlpd"] = json_num(final_delta_mlpd);
    j["final_se"] = json_num(final_se);
    j["inner_gap"] = json_num(inner_gap);
    ordered_json probs = ordered_json::array();
    for (Eigen::Index i = 0; i < probabilities.size(); ++i)
      probs.push_back(probabilities[i]);
    j["probabilities"] = probs;
    return j;
  }
};

struct SizeSweepSummary {
  std::vector<SizeSweepRow> rows;

  // fraction of rows at the given alpha whose final utility stayed above U;
  // se_band widens the comparison by that many standard errors of the final
  // estimate (0 gives the strict comparison of point estimates)
  double safety_fraction(double alpha, double se_band = 0.0) const {
    int hits = 0, total = 0;
    for (const auto& r : rows) {
      if (r.alpha != alpha) continue;
      ++total;
      if (r.final_delta_mlpd >= r.U - se_band * r.final_se) ++hits;
    }
    return total ? static_cast<double>(hits) / total
                 : std::numeric_limits<double>::quiet_NaN();
  }
};

inline std::vector<SizeSweepRow> run_size_sweep_replication(
    const ExperimentConfig& cfg, int rep) {
  PreparedData data = prepare_data(cfg, rep);
  const GaussPrior gp = cfg.gprior();
  MethodSettings settings = cfg.settings;
  settings.draw_based_reference = cfg.sweep_draw_reference;

  // inner CV outside the search: per-size held-out utilities
  const SizeSelectionInput input =
      cv_search(data.train, cfg.sweep_method, gp, cfg.mprior, settings,
                cfg.k_outer, seed_stream(cfg.seed, 5000000 +
                                         static_cast<std::uint64_t>(rep)));
  const double ref_util = input.reference_pointwise.mean();
  const double empty_util = input.per_size_pointwise.row(0).mean();
  const double gap = ref_util - empty_util;

  // final model from the search on the full training data
  ReferenceWorkspace ws(data.train, gp, cfg.mprior, settings,
                        seed_stream(cfg.seed, 1000000 +
                                    static_cast<std::uint64_t>(rep)));
  const MethodResult res = run_method(ws, cfg.sweep_method);
  const UtilityEstimate bma_u = mlpd(ws.reference_predictive_source(), data.test);
  const int n_test = data.test.n();

  std::vector<SizeSweepRow> rows;
  for (double u_frac : cfg.u_fracs) {
    const double U = u_frac * gap;
    for (double alpha : cfg.alphas) {
      const SizeDecision dec =
          select_size(input, U, alpha, cfg.settings.bootstrap_draws,
                      seed_stream(cfg.seed, 6000000 +
                                  static_cast<std::uint64_t>(rep)));
      const int m = std::min(dec.m, res.path.max_size());
      const UtilityEstimate u = mlpd(
          method_predictive(ws, cfg.sweep_method,
                            res.path.prefix(m, data.train.p())),
          data.test);
      const Eigen::VectorXd pt_diff = u.pointwise - bma_u.pointwise;
      SizeSweepRow row;
      row.replication = rep;
      row.u_frac = u_frac;
      row.U = U;
      row.alpha = alpha;
      row.selected_m = m;
      row.satisfied = dec.satisfied;
      row.final_delta_mlpd = u.value - bma_u.value;
      row.final_se = sample_sd(pt_diff) / std::sqrt(double(n_test));
      row.inner_gap = gap;
      row.probabilities = dec.probabilities;
      rows.push_back(row);
    }
  }
  return rows;
}

inline void write_sweep_csv(const std::string& path,
                            const SizeSweepSummary& summary) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out << "replication,u_frac,U,alpha,selected_m,satisfied,final_delta_mlpd,"
         "final_se,inner_gap\n";
  for (const auto& r : summary.rows)
    out << r.replication << ',' << format_double(r.u_frac) << ','
        << format_double(r.U) << ',' << format_double(r.alpha) << ','
        << r.selected_m << ',' << (r.satisfied ? 1 : 0) << ','
        << format_double(r.final_delta_mlpd) << ','
        << format_double(r.final_se) << ','
        << format_double(r.inner_gap) << '\n';
}

inline SizeSweepSummary run_size_sweep(const ExperimentConfig& cfg,
                                       bool write_files = true,
                                       int workers = worker_count_from_env()) {
  cfg.validate();
  std::vector<std::vector<SizeSweepRow>> per_rep(
      static_cast<std::size_t>(cfg.replications));
  parallel_tasks(cfg.replications, workers, [&](int rep) {
    per_rep[static_cast<std::size_t>(rep)] = run_size_sweep_replication(cfg, rep);
  });
  SizeSweepSummary summary;
  for (auto& rows : per_rep)
    for (auto& r : rows) summary.rows.push_back(std::move(r));
  if (write_files) {
    std::filesystem::create_directories(cfg.out_dir);
    write_sweep_csv(cfg.out_dir + "/sweep.csv", summary);
    std::ofstream jl(cfg.out_dir + "/sweep.jsonl");
    for (const auto& r : summary.rows) jl << r.to_json().dump() << '\n';
  }
  return summary;
}

}  // namespace bpms

#endif
