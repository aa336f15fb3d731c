// The selection-method battery: each tag wires a criterion or reference
// discrepancy into the forward search (or reads the model-space posterior
// directly) and yields a selected submodel plus per-size diagnostics.
//
//   cv10        K-fold CV optimization
//   waic        WAIC optimization
//   dic         DIC optimization
//   l2          L2 criterion optimization (minimized)
//   l2cv        cross-validated L2 (minimized)
//   l2k         L2_k with k = 1 (minimized)
//   map         maximum a posteriori model from the model-space posterior
//   mpp_median  variables ordered by marginal posterior probability,
//               Median model selected
//   bma_ref     reference discrepancy from the BMA, 95% explanatory power
//   bma_proj    projection of BMA draws onto submodels, 95% explanatory power
#ifndef BPMS_METHODS_HPP
#define BPMS_METHODS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "bpms/core.hpp"
#include "bpms/criteria.hpp"
#include "bpms/errors.hpp"
#include "bpms/gauss_linear.hpp"
#include "bpms/model_space.hpp"
#include "bpms/projection.hpp"
#include "bpms/reference.hpp"
#include "bpms/rng.hpp"
#include "bpms/search.hpp"

namespace bpms {

inline const std::vector<std::string>& method_tags() {
  static const std::vector<std::string> tags{
      "cv10", "waic", "dic", "l2", "l2cv", "l2k",
      "map",  "mpp_median", "bma_ref", "bma_proj"};
  return tags;
}

inline bool is_method_tag(const std::string& tag) {
  const auto& tags = method_tags();
  return std::find(tags.begin(), tags.end(), tag) != tags.end();
}

inline bool method_needs_reference(const std::string& tag) {
  return tag == "map" || tag == "mpp_median" || tag == "bma_ref" ||
         tag == "bma_proj";
}

struct MethodSettings {
  int folds = 10;
  int draws = 1000;             // S for WAIC/DIC and the projection
  std::uint64_t iters = 200000; // collapsed-sampler iterations per chain
  int chains = 4;
  double l2k_k = 1.0;
  int max_size = -1;            // -1 searches the full path
  double tie_tol = 1e-10;
  double power_threshold = 0.95;
  QuadratureSpec quad{201, 10.0};
  double bma_mass = 0.9999;     // posterior mass kept for BMA prediction
  int bootstrap_draws = 4000;
  bool exact = false;           // enumerate instead of sampling (p <= 20)
  // Score against the draw-based BMA predictive (the mixture over the same S
  // posterior draws the projection consumes) instead of the exact grid
  // mixture. The size-selection workflow uses this so that a full-size
  // projection reproduces its reference exactly.
  bool draw_based_reference = false;
};

namespace detail {
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : s) {
    h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
    h *= 1099511628211ULL;
  }
  return h;
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Shared per-dataset state: design cache, folds, model-space posterior and the
// BMA pieces, all built lazily so cheap methods stay cheap.

class ReferenceWorkspace {
 public:
  ReferenceWorkspace(Dataset train, GaussPrior gprior, ModelSpacePrior mprior,
                     MethodSettings settings, std::uint64_t seed)
      : train_(std::move(train)),
        gprior_(std::move(gprior)),
        mprior_(mprior),
        settings_(settings),
        seed_(seed),
        fitter_(train_, gprior_) {}

  const Dataset& train() const { return train_; }
  const GaussPrior& gprior() const { return gprior_; }
  const ModelSpacePrior& mprior() const { return mprior_; }
  const MethodSettings& settings() const { return settings_; }
  std::uint64_t seed() const { return seed_; }
  ModelFitter& fitter() { return fitter_; }

  const FoldedDesign& folded() {
    if (!folded_)
      folded_ = std::make_unique<FoldedDesign>(
          make_folded_design(train_, settings_.folds, seed_stream(seed_, 1)));
    return *folded_;
  }

  // Untruncated model-space posterior (chain or enumeration).
  const ModelPosterior& posterior() {
    if (!posterior_) {
      if (settings_.exact)
        posterior_ = std::make_unique<ModelPosterior>(
            enumerate_posterior(fitter_, mprior_));
      else
        posterior_ = std::make_unique<ModelPosterior>(
            sample_model_space(fitter_, mprior_, settings_.iters,
                               settings_.chains, seed_stream(seed_, 2)));
    }
    return *posterior_;
  }

  // Truncated posterior used for BMA prediction and draws.
  const ModelPosterior& bma() {
    if (!bma_) {
      bma_ = std::make_unique<ModelPosterior>(
          posterior().truncated(settings_.bma_mass));
    }
    return *bma_;
  }

  const PosteriorDraws& bma_draws() {
    if (!bma_draws_)
      bma_draws_ = std::make_unique<PosteriorDraws>(sample_bma_posterior(
          bma(), fitter_, settings_.draws, seed_stream(seed_, 3)));
    return *bma_draws_;
  }

  PredictiveSource bma_predictive_source() {
    bma();
    return [this](const Eigen::Ref<const Eigen::RowVectorXd>& x) {
      return bma_predictive(*bma_, fitter_, x);
    };
  }

  // Equal-weight gaussian mixture over the BMA draws; the draw-level twin of
  // bma_predictive_source.
  PredictiveSource bma_draw_predictive_source() {
    const PosteriorDraws& draws = bma_draws();
    return [&draws](const Eigen::Ref<const Eigen::RowVectorXd>& x) {
      const Eigen::VectorXd xa = draws.subset.gather_row(x);
      const Eigen::VectorXd locs = draws.w * xa;
      PredictiveMixture mix;
      const int S = draws.count();
      const double lw = -std::log(static_cast<double>(S));
      mix.components.reserve(static_cast<std::size_t>(S));
      for (int s = 0; s < S; ++s)
        mix.components.push_back({lw, Family::gaussian, locs[s],
                                  std::sqrt(draws.sigma2[s]), 0.0});
      return mix;
    };
  }

  PredictiveSource reference_predictive_source() {
    return settings_.draw_based_reference ? bma_draw_predictive_source()
                                          : bma_predictive_source();
  }

  std::uint64_t subset_seed(int stream, const SubmodelIndicator& s) const {
    return seed_stream(seed_stream(seed_, static_cast<std::uint64_t>(stream)),
                       detail::fnv1a(s.bits()));
  }

 private:
  Dataset train_;
  GaussPrior gprior_;
  ModelSpacePrior mprior_;
  MethodSettings settings_;
  std::uint64_t seed_;
  ModelFitter fitter_;
  std::unique_ptr<FoldedDesign> folded_;
  std::unique_ptr<ModelPosterior> posterior_;
  std::unique_ptr<ModelPosterior> bma_;
  std::unique_ptr<PosteriorDraws> bma_draws_;
};

struct MethodResult {
  std::string method;
  SearchPath path;             // empty for map
  SubmodelIndicator selected;
  int selected_size = 0;
  bool insel_is_mlpd = false;  // criterion values on the nats/obs scale
};

// ---------------------------------------------------------------------------
// Predictive access for a chosen subset: the projection method predicts with
// projected draws, every other method refits the submodel to the data.

inline PredictiveSource subset_predictive_refit(ReferenceWorkspace& ws,
                                                const SubmodelIndicator& s) {
  auto fm = std::make_shared<FittedModel>(
      fit(ws.fitter().design(), s, ws.gprior()));
  return [fm](const Eigen::Ref<const Eigen::RowVectorXd>& x) {
    return predictive_at_row(*fm, x);
  };
}

inline PredictiveSource subset_predictive_projected(ReferenceWorkspace& ws,
                                                    const SubmodelIndicator& s) {
  auto [proj, disc] = project_draws(ws.bma_draws(), ws.train().X, s);
  auto shared = std::make_shared<ProjectedDraws>(std::move(proj));
  return [shared](const Eigen::Ref<const Eigen::RowVectorXd>& x) {
    return projected_predictive(*shared, shared->subset.gather_row(x));
  };
}

inline PredictiveSource method_predictive(ReferenceWorkspace& ws,
                                          const std::string& tag,
                                          const SubmodelIndicator& s) {
  return tag == "bma_proj" ? subset_predictive_projected(ws, s)
                           : subset_predictive_refit(ws, s);
}

// ---------------------------------------------------------------------------
// Search drivers.

namespace detail {

// Precomputed pieces for the bma_proj search: the fit matrix F = A W' and the
// per-draw norms, shared across every candidate subset.
struct ProjectionSearchState {
  Eigen::MatrixXd F;            // n x S reference fit vectors
  Eigen::VectorXd sigma2;       // S
};

inline double projection_discrepancy(const ProjectionSearchState& st,
                                     const Eigen::Ref<const Eigen::MatrixXd>& X,
                                     const SubmodelIndicator& s) {
  const SubsetProjector proj(X, s);
  const int S = static_cast<int>(st.F.cols());
  const double inv_n = 1.0 / static_cast<double>(X.rows());
  double acc = 0.0;
  for (int col = 0; col < S; ++col) {
    const auto [w, rss] = proj.project(st.F.col(col));
    acc += 0.5 * std::log1p(rss * inv_n / st.sigma2[col]);
  }
  return acc / S;
}

}  // namespace detail

inline MethodResult run_method(ReferenceWorkspace& ws, const std::string& tag) {
  if (!is_method_tag(tag)) throw ConfigError("unknown method tag: " + tag);
  const Dataset& train = ws.train();
  const GaussPrior& gp = ws.gprior();
  const MethodSettings& st = ws.settings();
  const int p = train.p();
  const int max_size = st.max_size < 0 ? p : std::min(st.max_size, p);

  MethodResult res;
  res.method = tag;

  if (tag == "map") {
    res.selected = map_model(ws.posterior());
    res.selected_size = res.selected.size();
    return res;
  }

  if (tag == "mpp_median") {
    const Eigen::VectorXd& pi = ws.posterior().inclusion;
    std::vector<int> order(static_cast<std::size_t>(p));
    std::iota(order.begin(), order.end(), 1);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return pi[a - 1] > pi[b - 1];
    });
    order.resize(static_cast<std::size_t>(max_size));
    res.path.method = tag;
    res.path.order = order;
    res.path.criterion_values.push_back(1.0);  // intercept always in
    for (int v : order) res.path.criterion_values.push_back(pi[v - 1]);
    res.selected = median_model(pi);
    res.selected_size = res.selected.size();
    return res;
  }

  SubsetCriterion criterion;
  if (tag == "cv10") {
    const FoldedDesign& fd = ws.folded();
    criterion = [&fd, &gp](const SubmodelIndicator& s) {
      return kfold_cv(fd, s, gp).value;
    };
    res.insel_is_mlpd = true;
  } else if (tag == "waic") {
    criterion = [&ws, &train, &gp, &st](const SubmodelIndicator& s) {
      const FittedModel fm = fit(ws.fitter().design(), s, gp);
      const PosteriorDraws draws =
          sample_posterior(fm, st.draws, ws.subset_seed(4, s));
      return waic(train, s, draws).value;
    };
    res.insel_is_mlpd = true;
  } else if (tag == "dic") {
    criterion = [&ws, &train, &gp, &st](const SubmodelIndicator& s) {
      const FittedModel fm = fit(ws.fitter().design(), s, gp);
      const PosteriorDraws draws =
          sample_posterior(fm, st.draws, ws.subset_seed(5, s));
      return dic(train, s, draws).value;
    };
    res.insel_is_mlpd = true;
  } else if (tag == "l2") {
    criterion = [&ws, &train, &gp](const SubmodelIndicator& s) {
      return -l2(train, fit(ws.fitter().design(), s, gp));
    };
  } else if (tag == "l2cv") {
    const FoldedDesign& fd = ws.folded();
    criterion = [&fd, &gp](const SubmodelIndicator& s) {
      return -l2_cv(fd, s, gp);
    };
  } else if (tag == "l2k") {
    criterion = [&ws, &train, &gp, &st](const SubmodelIndicator& s) {
      return -l2_k(train, fit(ws.fitter().design(), s, gp), st.l2k_k);
    };
  } else if (tag == "bma_ref") {
    // reference grids once per training point, then candidates refit to data
    auto grids = std::make_shared<std::vector<ReferenceGrid>>();
    grids->reserve(static_cast<std::size_t>(train.n()));
    {
      auto bma_src = ws.bma_predictive_source();
      for (int i = 0; i < train.n(); ++i)
        grids->push_back(make_reference_grid(bma_src(train.X.row(i)), st.quad));
    }
    criterion = [&ws, &train, &gp, grids](const SubmodelIndicator& s) {
      const FittedModel fm = fit(ws.fitter().design(), s, gp);
      double delta = 0.0;
      for (int i = 0; i < train.n(); ++i) {
        const auto& grid = (*grids)[static_cast<std::size_t>(i)];
        const double cross =
            cross_utility(grid, predictive_at_row(fm, train.X.row(i)));
        if (cross == kNegInf)
          return -std::numeric_limits<double>::infinity();
        delta += grid.self_utility - cross;
      }
      return -delta / train.n();
    };
  } else if (tag == "bma_proj") {
    auto state = std::make_shared<detail::ProjectionSearchState>();
    const PosteriorDraws& draws = ws.bma_draws();
    state->F = SubmodelIndicator::full_model(p).design(train.X) *
               draws.w.transpose();
    state->sigma2 = draws.sigma2;
    criterion = [state, &train](const SubmodelIndicator& s) {
      return -detail::projection_discrepancy(*state, train.X, s);
    };
  }

  res.path = forward_search(p, criterion, max_size, st.tie_tol);
  res.path.method = tag;

  if (tag == "bma_ref" || tag == "bma_proj") {
    res.path.discrepancies.resize(res.path.criterion_values.size());
    for (std::size_t m = 0; m < res.path.criterion_values.size(); ++m)
      res.path.discrepancies[m] = std::max(0.0, -res.path.criterion_values[m]);
    res.selected_size =
        select_size_by_explanatory_power(res.path.discrepancies,
                                         st.power_threshold);
  } else {
    res.selected_size = select_size_by_criterion(res.path.criterion_values);
  }
  res.selected = res.path.prefix(res.selected_size, p);
  return res;
}

// Projection search driven by externally supplied full-model draws (for
// reference models fitted outside this library: only (w, sigma2) pairs and the
// design are needed).
inline MethodResult run_projection_method(const Dataset& train,
                                          const PosteriorDraws& draws,
                                          const MethodSettings& st) {
  draws.validate();
  const int p = train.p();
  if (draws.subset.size() != p)
    throw DimensionMismatch("external draws must cover the full model");
  const int max_size = st.max_size < 0 ? p : std::min(st.max_size, p);
  detail::ProjectionSearchState state;
  state.F = SubmodelIndicator::full_model(p).design(train.X) *
            draws.w.transpose();
  state.sigma2 = draws.sigma2;
  const SubsetCriterion criterion = [&state, &train](const SubmodelIndicator& s) {
    return -detail::projection_discrepancy(state, train.X, s);
  };
  MethodResult res;
  res.method = "bma_proj";
  res.path = forward_search(p, criterion, max_size, st.tie_tol);
  res.path.method = "bma_proj";
  res.path.discrepancies.resize(res.path.criterion_values.size());
  for (std::size_t m = 0; m < res.path.criterion_values.size(); ++m)
    res.path.discrepancies[m] = std::max(0.0, -res.path.criterion_values[m]);
  res.selected_size = select_size_by_explanatory_power(res.path.discrepancies,
                                                       st.power_threshold);
  res.selected = res.path.prefix(res.selected_size, p);
  return res;
}

// ---------------------------------------------------------------------------
// Cross-validation outside the search: repeat the whole pipeline per outer
// fold, score every size on the held-out points, and assemble the size
// selection input in original observation order.

inline Dataset subset_rows(const Dataset& d, const std::vector<int>& rows) {
  Eigen::MatrixXd X(rows.size(), d.p());
  Eigen::VectorXd y(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    X.row(static_cast<Eigen::Index>(r)) = d.X.row(rows[r]);
    y[static_cast<Eigen::Index>(r)] = d.y[rows[r]];
  }
  Dataset out = make_dataset(std::move(X), std::move(y));
  out.names = d.names;
  return out;
}

inline SizeSelectionInput cv_search(const Dataset& data, const std::string& tag,
                                    const GaussPrior& gprior,
                                    const ModelSpacePrior& mprior,
                                    const MethodSettings& settings, int K_outer,
                                    std::uint64_t seed) {
  if (!is_method_tag(tag) || tag == "map")
    throw ConfigError("cv_search does not support method: " + tag);
  if (K_outer < 2) throw BadFoldCount(K_outer, data.n());
  const int p = data.p();
  const int max_size = settings.max_size < 0 ? p : std::min(settings.max_size, p);

  const FoldAssignment folds = make_folds(data.n(), K_outer, seed_stream(seed, 0));
  SizeSelectionInput input;
  input.per_size_pointwise.resize(max_size + 1, data.n());
  input.reference_pointwise.resize(data.n());

  for (int k = 0; k < K_outer; ++k) {
    std::vector<int> train_rows, heldout_rows;
    for (int i = 0; i < data.n(); ++i)
      (folds.fold_of[static_cast<std::size_t>(i)] == k ? heldout_rows
                                                       : train_rows)
          .push_back(i);
    const Dataset fold_train = standardize(subset_rows(data, train_rows));
    const Dataset fold_test = apply_standardization(
        subset_rows(data, heldout_rows), fold_train.column_means,
        fold_train.column_sds);

    ReferenceWorkspace ws(fold_train, gprior, mprior, settings,
                          seed_stream(seed, 100 + static_cast<std::uint64_t>(k)));
    const MethodResult res = run_method(ws, tag);

    // reference (BMA) pointwise on the held-out data
    auto bma_src = ws.reference_predictive_source();
    for (std::size_t r = 0; r < heldout_rows.size(); ++r)
      input.reference_pointwise[heldout_rows[r]] = mixture_log_density(
          bma_src(fold_test.X.row(static_cast<Eigen::Index>(r))),
          fold_test.y[static_cast<Eigen::Index>(r)]);

    const int fold_max = std::min<int>(max_size, res.path.max_size());
    for (int m = 0; m <= max_size; ++m) {
      const int mm = std::min(m, fold_max);
      const PredictiveSource src =
          method_predictive(ws, tag, res.path.prefix(mm, p));
      for (std::size_t r = 0; r < heldout_rows.size(); ++r)
        input.per_size_pointwise(m, heldout_rows[r]) = mixture_log_density(
            src(fold_test.X.row(static_cast<Eigen::Index>(r))),
            fold_test.y[static_cast<Eigen::Index>(r)]);
    }
  }
  input.validate();
  return input;
}

}  // namespace bpms

#endif
