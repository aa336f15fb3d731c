// Closed-form projection of full-model posterior draws onto submodels:
//
//   w_perp      = argmin_w || X w_full - X_sub w ||    (least squares)
//   sigma2_perp = sigma2 + ||X w_full - X_sub w_perp||^2 / n
//   kl          = 0.5 log(sigma2_perp / sigma2)
//
// plus the pooled discrepancy (mean per-draw KL), the projected predictive,
// and relative explanatory power.
#ifndef BPMS_PROJECTION_HPP
#define BPMS_PROJECTION_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/QR>

#include "bpms/core.hpp"
#include "bpms/errors.hpp"
#include "bpms/special.hpp"

namespace bpms {

struct ProjectedDraws {
  SubmodelIndicator subset;
  Eigen::MatrixXd w_perp;       // S x (size+1)
  Eigen::VectorXd sigma2_perp;  // S
  Eigen::VectorXd kl;           // S, each >= 0
  std::uint64_t source_hash = 0;

  int count() const { return static_cast<int>(w_perp.rows()); }
};

// QR factorization of a submodel design, computed once and reused across all
// draws projected onto the same subset; that reuse dominates forward-search
// cost.
class SubsetProjector {
 public:
  SubsetProjector(const Eigen::Ref<const Eigen::MatrixXd>& X,
                  const SubmodelIndicator& subset)
      : subset_(subset), design_(subset.design(X)), qr_(design_) {
    qr_.setThreshold(1e-10);
    if (qr_.rank() < design_.cols())
      throw RankDeficientSubmodel("subset " + subset.bits() + " has rank " +
                                  std::to_string(qr_.rank()) + " < " +
                                  std::to_string(design_.cols()));
  }

  int n() const { return static_cast<int>(design_.rows()); }
  int q() const { return static_cast<int>(design_.cols()); }
  const SubmodelIndicator& subset() const { return subset_; }

  // Least-squares coefficients and residual sum of squares for one fit vector.
  std::pair<Eigen::VectorXd, double> project(
      const Eigen::Ref<const Eigen::VectorXd>& f) const {
    Eigen::VectorXd w = qr_.solve(f);
    const double rss = (f - design_ * w).squaredNorm();
    return {std::move(w), std::max(0.0, rss)};
  }

 private:
  SubmodelIndicator subset_;
  Eigen::MatrixXd design_;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
};

// Single-draw projection. w is a full-length coefficient vector (intercept
// first), X the raw n x p predictor matrix.
inline std::tuple<Eigen::VectorXd, double, double> project_draw(
    const Eigen::Ref<const Eigen::VectorXd>& w, double sigma2,
    const Eigen::Ref<const Eigen::MatrixXd>& X,
    const SubmodelIndicator& subset) {
  if (w.size() != X.cols() + 1)
    throw DimensionMismatch("full draw length != p + 1");
  if (sigma2 <= 0.0) throw DimensionMismatch("sigma2 must be positive");
  const SubmodelIndicator full = SubmodelIndicator::full_model(
      static_cast<int>(X.cols()));
  const Eigen::VectorXd f = full.design(X) * w;
  const SubsetProjector proj(X, subset);
  auto [w_perp, rss] = proj.project(f);
  const double sigma2_perp = sigma2 + rss / static_cast<double>(X.rows());
  const double kl = 0.5 * std::log(sigma2_perp / sigma2);
  return {std::move(w_perp), sigma2_perp, kl};
}

// Project every draw; discrepancy is the mean per-draw KL.
inline std::pair<ProjectedDraws, double> project_draws(
    const PosteriorDraws& draws, const Eigen::Ref<const Eigen::MatrixXd>& X,
    const SubmodelIndicator& subset) {
  draws.validate();
  const int p = static_cast<int>(X.cols());
  if (draws.subset.size() != p)
    throw DimensionMismatch("projection source must be full-model draws");
  const int S = draws.count();
  const SubmodelIndicator full = SubmodelIndicator::full_model(p);
  const Eigen::MatrixXd F = full.design(X) * draws.w.transpose();  // n x S
  const SubsetProjector proj(X, subset);

  ProjectedDraws out;
  out.subset = subset;
  out.source_hash = draws.content_hash();
  out.w_perp.resize(S, proj.q());
  out.sigma2_perp.resize(S);
  out.kl.resize(S);
  const double inv_n = 1.0 / static_cast<double>(X.rows());
  for (int s = 0; s < S; ++s) {
    auto [w, rss] = proj.project(F.col(s));
    out.w_perp.row(s) = w.transpose();
    out.sigma2_perp[s] = draws.sigma2[s] + rss * inv_n;
    out.kl[s] = 0.5 * std::log(out.sigma2_perp[s] / draws.sigma2[s]);
  }
  return {std::move(out), out.kl.mean()};
}

// Equal-weight gaussian mixture over the projected draws.
inline PredictiveMixture projected_predictive(
    const ProjectedDraws& proj, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != proj.w_perp.cols())
    throw DimensionMismatch("projected predictive input length " +
                            std::to_string(x.size()) + " != q=" +
                            std::to_string(proj.w_perp.cols()));
  const int S = proj.count();
  const double lw = -std::log(static_cast<double>(S));
  PredictiveMixture mix;
  mix.components.reserve(static_cast<std::size_t>(S));
  const Eigen::VectorXd locs = proj.w_perp * x;
  for (int s = 0; s < S; ++s)
    mix.components.push_back({lw, Family::gaussian, locs[s],
                              std::sqrt(proj.sigma2_perp[s]), 0.0});
  return mix;
}

// Relative explanatory power phi = 1 - delta_m / delta_null.
inline double explanatory_power(double delta_m, double delta_null,
                                double tol = 1e-12) {
  if (delta_m < 0.0) throw ConfigError("discrepancy must be nonnegative");
  if (delta_null <= tol) throw NullModelZeroDiscrepancy();
  return 1.0 - delta_m / delta_null;
}

// CSV import for externally supplied full-model draws: one row per draw,
// sigma2 first, then the p+1 coefficients (intercept first). A non-numeric
// first line is treated as a header.
inline PosteriorDraws read_draws_csv(const std::string& path, int p) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open draws file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    std::vector<double> row;
    row.reserve(cells.size());
    bool numeric = true;
    for (const auto& cell : cells) {
      try {
        std::size_t pos = 0;
        row.push_back(std::stod(cell, &pos));
        if (pos != cell.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;  // header
      }
      throw ParseError("draws row " + std::to_string(line_no) +
                       " is not numeric");
    }
    first = false;
    if (static_cast<int>(row.size()) != p + 2)
      throw ParseError("draws row " + std::to_string(line_no) + " has " +
                       std::to_string(row.size()) + " cells, expected " +
                       std::to_string(p + 2));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("draws file has no rows: " + path);
  PosteriorDraws d;
  d.subset = SubmodelIndicator::full_model(p);
  d.w.resize(static_cast<Eigen::Index>(rows.size()), p + 1);
  d.sigma2.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t s = 0; s < rows.size(); ++s) {
    d.sigma2[static_cast<Eigen::Index>(s)] = rows[s][0];
    for (int j = 0; j <= p; ++j)
      d.w(static_cast<Eigen::Index>(s), j) = rows[s][static_cast<std::size_t>(j + 1)];
  }
  d.validate();
  return d;
}

inline void write_draws_csv(const std::string& path, const PosteriorDraws& d) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write draws file: " + path);
  out << "sigma2";
  for (int j = 0; j < d.w.cols(); ++j) out << ",w" << j;
  out << '\n';
  for (int s = 0; s < d.count(); ++s) {
    out << format_double(d.sigma2[s]);
    for (int j = 0; j < d.w.cols(); ++j) out << ',' << format_double(d.w(s, j));
    out << '\n';
  }
}

}  // namespace bpms

#endif
