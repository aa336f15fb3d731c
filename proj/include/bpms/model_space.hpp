// Model-space prior, exact enumeration, the collapsed Metropolis sampler over
// inclusion indicators (the RJMCMC role for conjugate models), inclusion
// probabilities, MAP and Median models, and the BMA predictive.
#ifndef BPMS_MODEL_SPACE_HPP
#define BPMS_MODEL_SPACE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "bpms/core.hpp"
#include "bpms/criteria.hpp"
#include "bpms/errors.hpp"
#include "bpms/gauss_linear.hpp"
#include "bpms/rng.hpp"
#include "bpms/special.hpp"

namespace bpms {

struct ModelSpacePrior {
  double a = 1.0;
  double b = 1.0;

  void validate() const {
    if (a <= 0.0 || b <= 0.0)
      throw ConfigError("model-space Beta hyperparameters must be positive");
  }
};

// Marginal prior of an indicator with pi integrated out:
// log B(a+k, b+p-k) - log B(a, b), k excluding the intercept.
inline double log_prior_indicator(const SubmodelIndicator& gamma,
                                  const ModelSpacePrior& prior) {
  const double k = gamma.size();
  const double p = gamma.p();
  return lbeta(prior.a + k, prior.b + p - k) - lbeta(prior.a, prior.b);
}

// ---------------------------------------------------------------------------
// Memoizing fitter: marginal likelihoods and fits keyed by indicator bits.

class ModelFitter {
 public:
  ModelFitter(const Dataset& data, GaussPrior prior)
      : cache_(make_design_cache(data)), prior_(std::move(prior)) {}

  ModelFitter(DesignCache cache, GaussPrior prior)
      : cache_(std::move(cache)), prior_(std::move(prior)) {}

  const FittedModel& fit_for(const SubmodelIndicator& subset) {
    const std::string key = subset.bits();
    auto it = fits_.find(key);
    if (it == fits_.end())
      it = fits_.emplace(key, std::make_unique<FittedModel>(
                                  fit(cache_, subset, prior_))).first;
    return *it->second;
  }

  // Marginal likelihood only; caches a double instead of the whole fit, which
  // keeps long sampler runs at bounded memory.
  double log_ml(const SubmodelIndicator& subset) {
    const std::string key = subset.bits();
    if (auto it = fits_.find(key); it != fits_.end()) return it->second->log_ml;
    if (auto it = log_mls_.find(key); it != log_mls_.end()) return it->second;
    const double value = fit(cache_, subset, prior_).log_ml;
    log_mls_.emplace(std::move(key), value);
    return value;
  }

  int p() const { return cache_.p; }
  const GaussPrior& prior() const { return prior_; }
  const DesignCache& design() const { return cache_; }

 private:
  DesignCache cache_;
  GaussPrior prior_;
  std::unordered_map<std::string, std::unique_ptr<FittedModel>> fits_;
  std::unordered_map<std::string, double> log_mls_;
};

// ---------------------------------------------------------------------------
// ModelPosterior

struct ModelEntry {
  SubmodelIndicator subset;
  double log_prob;
  std::uint64_t visits;  // chain source only
};

struct ModelPosterior {
  enum class Source { enumeration, chain };
  Source source = Source::enumeration;
  std::vector<ModelEntry> models;  // sorted by probability, tie rule applied
  Eigen::VectorXd inclusion;       // length p
  double acceptance_rate = 0.0;
  int chains = 0;
  Eigen::MatrixXd per_chain_inclusion;  // chains x p, chain source only

  double prob(std::size_t i) const { return std::exp(models[i].log_prob); }

  // Keep the most probable models covering `mass`, renormalized. Used to keep
  // BMA mixture evaluation affordable; pass 1.0 for the exact posterior.
  ModelPosterior truncated(double mass) const {
    if (mass >= 1.0 || models.size() <= 1) return *this;
    ModelPosterior out = *this;
    out.models.clear();
    double acc = 0.0;
    for (const auto& m : models) {
      out.models.push_back(m);
      acc += std::exp(m.log_prob);
      if (acc >= mass) break;
    }
    const double log_acc = std::log(acc);
    for (auto& m : out.models) m.log_prob -= log_acc;
    return out;
  }
};

namespace detail {
inline void sort_models(std::vector<ModelEntry>& models) {
  std::sort(models.begin(), models.end(),
            [](const ModelEntry& a, const ModelEntry& b) {
              if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
              return a.subset.tie_before(b.subset);
            });
}

inline Eigen::VectorXd inclusion_from_models(const std::vector<ModelEntry>& models,
                                             int p) {
  Eigen::VectorXd pi = Eigen::VectorXd::Zero(p);
  for (const auto& m : models) {
    const double w = std::exp(m.log_prob);
    for (int j = 1; j <= p; ++j)
      if (m.subset.includes(j)) pi[j - 1] += w;
  }
  return pi.cwiseMin(1.0);
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Exact enumeration of all 2^p indicators.

inline ModelPosterior enumerate_posterior(ModelFitter& fitter,
                                          const ModelSpacePrior& mprior,
                                          int max_p = 20) {
  mprior.validate();
  const int p = fitter.p();
  if (max_p > 20) max_p = 20;
  if (p > max_p) throw TooManyVariables(p, max_p);
  const std::uint64_t count = 1ULL << p;
  std::vector<ModelEntry> models;
  models.reserve(count);
  Eigen::VectorXd log_joint(static_cast<Eigen::Index>(count));
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    SubmodelIndicator s(p);
    for (int j = 0; j < p; ++j)
      if (mask & (1ULL << j)) s.gamma[static_cast<std::size_t>(j + 1)] = 1;
    const double lj = fitter.log_ml(s) + log_prior_indicator(s, mprior);
    log_joint[static_cast<Eigen::Index>(mask)] = lj;
    models.push_back({std::move(s), lj, 0});
  }
  const double norm = log_sum_exp(log_joint);
  for (auto& m : models) m.log_prob -= norm;
  detail::sort_models(models);
  ModelPosterior post;
  post.source = ModelPosterior::Source::enumeration;
  post.inclusion = detail::inclusion_from_models(models, p);
  post.models = std::move(models);
  return post;
}

inline ModelPosterior enumerate_posterior(const Dataset& data,
                                          const GaussPrior& gprior,
                                          const ModelSpacePrior& mprior,
                                          int max_p = 20) {
  ModelFitter fitter(data, gprior);
  return enumerate_posterior(fitter, mprior, max_p);
}

// ---------------------------------------------------------------------------
// Collapsed Metropolis sampler over indicators. Parameters are marginalized
// analytically, so the chain targets p(M|D) exactly. Proposals: flip one
// variable (prob 0.9) or swap an included with an excluded one (prob 0.1);
// both are symmetric. First half of each chain is discarded as warm-up.

struct SamplerSettings {
  std::uint64_t iters = 200000;  // per chain
  int chains = 4;
  double p_swap = 0.1;
};

inline ModelPosterior sample_model_space(ModelFitter& fitter,
                                         const ModelSpacePrior& mprior,
                                         std::uint64_t iters, int chains,
                                         std::uint64_t seed,
                                         double p_swap = 0.1) {
  mprior.validate();
  if (iters < 1) throw ConfigError("sampler needs iters >= 1");
  if (chains < 1) throw ConfigError("sampler needs chains >= 1");
  const int p = fitter.p();

  std::unordered_map<std::string, std::uint64_t> visits;
  std::unordered_map<std::string, SubmodelIndicator> reps;
  Eigen::MatrixXd chain_incl = Eigen::MatrixXd::Zero(chains, p);
  std::uint64_t accepted = 0, proposals = 0;
  const std::uint64_t warmup = iters / 2;
  std::uint64_t recorded_total = 0;

  for (int c = 0; c < chains; ++c) {
    Rng rng(seed_stream(seed, static_cast<std::uint64_t>(c)));
    SubmodelIndicator state = SubmodelIndicator::empty_model(p);
    double state_lp = fitter.log_ml(state) + log_prior_indicator(state, mprior);
    std::uint64_t chain_recorded = 0;
    for (std::uint64_t t = 0; t < iters; ++t) {
      ++proposals;
      SubmodelIndicator prop = state;
      bool have_proposal = true;
      if (rng.u01() < p_swap) {
        const int k = state.size();
        if (k == 0 || k == p) {
          have_proposal = false;  // swap infeasible; stay put
        } else {
          int in_pick = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
          int out_pick =
              static_cast<int>(rng.below(static_cast<std::uint64_t>(p - k)));
          for (int j = 1; j <= p; ++j) {
            if (state.includes(j)) {
              if (in_pick-- == 0) prop.gamma[static_cast<std::size_t>(j)] = 0;
            } else {
              if (out_pick-- == 0) prop.gamma[static_cast<std::size_t>(j)] = 1;
            }
          }
        }
      } else {
        const int j = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(p)));
        prop.gamma[static_cast<std::size_t>(j)] ^= 1;
      }
      if (have_proposal) {
        const double prop_lp =
            fitter.log_ml(prop) + log_prior_indicator(prop, mprior);
        if (std::log(rng.u01_pos()) < prop_lp - state_lp) {
          state = std::move(prop);
          state_lp = prop_lp;
          ++accepted;
        }
      }
      if (t >= warmup) {
        const std::string key = state.bits();
        auto [it, inserted] = visits.try_emplace(key, 0);
        it->second += 1;
        if (inserted) reps.emplace(key, state);
        for (int j = 1; j <= p; ++j)
          if (state.includes(j)) chain_incl(c, j - 1) += 1.0;
        ++chain_recorded;
        ++recorded_total;
      }
    }
    if (chain_recorded > 0)
      chain_incl.row(c) /= static_cast<double>(chain_recorded);
  }

  ModelPosterior post;
  post.source = ModelPosterior::Source::chain;
  post.chains = chains;
  post.acceptance_rate =
      proposals > 0 ? static_cast<double>(accepted) / proposals : 0.0;
  post.per_chain_inclusion = chain_incl;
  post.models.reserve(visits.size());
  const double log_total = std::log(static_cast<double>(recorded_total));
  for (const auto& [key, count] : visits)
    post.models.push_back({reps.at(key),
                           std::log(static_cast<double>(count)) - log_total,
                           count});
  detail::sort_models(post.models);
  post.inclusion = detail::inclusion_from_models(post.models, p);
  return post;
}

inline ModelPosterior sample_model_space(const Dataset& data,
                                         const GaussPrior& gprior,
                                         const ModelSpacePrior& mprior,
                                         std::uint64_t iters, int chains,
                                         std::uint64_t seed) {
  ModelFitter fitter(data, gprior);
  return sample_model_space(fitter, mprior, iters, chains, seed);
}

// ---------------------------------------------------------------------------
// Selections from the posterior.

inline SubmodelIndicator map_model(const ModelPosterior& post) {
  if (post.models.empty()) throw ConfigError("empty model posterior");
  return post.models.front().subset;  // sort order encodes the tie rule
}

inline SubmodelIndicator median_model(const Eigen::VectorXd& inclusion) {
  SubmodelIndicator s(static_cast<int>(inclusion.size()));
  for (int j = 0; j < inclusion.size(); ++j) {
    if (inclusion[j] < 0.0 || inclusion[j] > 1.0)
      throw ConfigError("inclusion probabilities must lie in [0,1]");
    if (inclusion[j] >= 0.5) s.gamma[static_cast<std::size_t>(j + 1)] = 1;
  }
  return s;
}

// Probability-weighted mixture of the per-model predictives.
inline PredictiveMixture bma_predictive(
    const ModelPosterior& post, ModelFitter& fitter,
    const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  PredictiveMixture mix;
  for (const auto& entry : post.models) {
    const FittedModel& fm = fitter.fit_for(entry.subset);
    PredictiveMixture part = predictive_at_row(fm, x);
    for (auto& c : part.components) {
      c.log_weight += entry.log_prob;
      mix.components.push_back(c);
    }
  }
  return mix;
}

// Draws from the BMA posterior: model by posterior probability, then one
// conditional draw, embedded in the full p+1 coefficient space with exact
// zeros for excluded variables.
inline PosteriorDraws sample_bma_posterior(const ModelPosterior& post,
                                           ModelFitter& fitter, int S,
                                           std::uint64_t seed) {
  if (S < 1) throw DimensionMismatch("S >= 1 draws required");
  if (post.models.empty()) throw ConfigError("empty model posterior");
  const int p = fitter.p();
  Eigen::VectorXd cum(post.models.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < post.models.size(); ++i) {
    acc += std::exp(post.models[i].log_prob);
    cum[static_cast<Eigen::Index>(i)] = acc;
  }
  PosteriorDraws d;
  d.subset = SubmodelIndicator::full_model(p);
  d.seed = seed;
  d.w = Eigen::MatrixXd::Zero(S, p + 1);
  d.sigma2.resize(S);
  Rng rng(seed);
  std::unordered_map<const FittedModel*, Eigen::VectorXd> cum_weights;
  Eigen::VectorXd w_local;
  for (int s = 0; s < S; ++s) {
    const int mi = rng.categorical_from_cumulative(cum);
    const auto& entry = post.models[static_cast<std::size_t>(mi)];
    const FittedModel& fm = fitter.fit_for(entry.subset);
    auto it = cum_weights.find(&fm);
    if (it == cum_weights.end())
      it = cum_weights.emplace(&fm, cumulative_grid_weights(fm)).first;
    w_local.resize(fm.q());
    sample_one(fm, it->second, rng, w_local, d.sigma2[s]);
    const auto cols = entry.subset.design_columns();
    for (std::size_t a = 0; a < cols.size(); ++a)
      d.w(s, cols[a]) = w_local[static_cast<Eigen::Index>(a)];
  }
  return d;
}

}  // namespace bpms

#endif
