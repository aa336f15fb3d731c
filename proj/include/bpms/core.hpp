// Shared domain types: datasets, inclusion indicators, posterior draws and
// predictive mixtures, plus the CSV dataset format.
#ifndef BPMS_CORE_HPP
#define BPMS_CORE_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bpms/errors.hpp"
#include "bpms/special.hpp"

namespace bpms {

// ---------------------------------------------------------------------------
// Dataset

struct Dataset {
  Eigen::MatrixXd X;  // n x p predictors
  Eigen::VectorXd y;  // n responses
  Eigen::VectorXd column_means;
  Eigen::VectorXd column_sds;
  bool standardized = false;
  std::vector<std::string> names;  // predictor names, file order

  int n() const { return static_cast<int>(X.rows()); }
  int p() const { return static_cast<int>(X.cols()); }

  void validate() const {
    if (n() < 1) throw DimensionMismatch("dataset needs n >= 1 rows");
    if (y.size() != X.rows())
      throw DimensionMismatch("y length does not match X rows");
    if (!X.allFinite() || !y.allFinite())
      throw ParseError("dataset contains non-finite entries");
  }
};

inline Dataset make_dataset(Eigen::MatrixXd X, Eigen::VectorXd y) {
  Dataset d;
  d.X = std::move(X);
  d.y = std::move(y);
  d.column_means = Eigen::VectorXd::Zero(d.p());
  d.column_sds = Eigen::VectorXd::Ones(d.p());
  d.names.reserve(d.p());
  for (int j = 0; j < d.p(); ++j) d.names.push_back("x" + std::to_string(j + 1));
  d.validate();
  return d;
}

// Sample sd with divisor n-1; the convention everywhere in this library.
inline double sample_sd(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const Eigen::Index n = v.size();
  if (n < 2) return 0.0;
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() /
                   static_cast<double>(n - 1));
}

inline Dataset standardize(const Dataset& in) {
  if (in.standardized) return in;
  Dataset out = in;
  out.column_means.resize(in.p());
  out.column_sds.resize(in.p());
  for (int j = 0; j < in.p(); ++j) {
    const double mean = in.X.col(j).mean();
    const double sd = sample_sd(in.X.col(j));
    if (sd < 1e-13 * (1.0 + std::abs(mean))) throw ConstantColumn(j);
    out.column_means[j] = mean;
    out.column_sds[j] = sd;
    out.X.col(j) = (in.X.col(j).array() - mean) / sd;
  }
  out.standardized = true;
  return out;
}

// Apply a training-set transform to new data (test folds, held-out sets).
inline Dataset apply_standardization(const Dataset& in,
                                     const Eigen::VectorXd& means,
                                     const Eigen::VectorXd& sds) {
  if (means.size() != in.p() || sds.size() != in.p())
    throw DimensionMismatch("standardization metadata does not match p");
  Dataset out = in;
  for (int j = 0; j < in.p(); ++j)
    out.X.col(j) = (in.X.col(j).array() - means[j]) / sds[j];
  out.column_means = means;
  out.column_sds = sds;
  out.standardized = true;
  return out;
}

// ---------------------------------------------------------------------------
// SubmodelIndicator
//
// gamma has length p+1; position 0 is the intercept and is always 1.
// Position j (1-based) corresponds to predictor column j-1 of the dataset.

struct SubmodelIndicator {
  std::vector<std::uint8_t> gamma;

  SubmodelIndicator() = default;
  explicit SubmodelIndicator(int p) : gamma(static_cast<std::size_t>(p) + 1, 0) {
    gamma[0] = 1;
  }

  static SubmodelIndicator empty_model(int p) { return SubmodelIndicator(p); }

  static SubmodelIndicator full_model(int p) {
    SubmodelIndicator s(p);
    std::fill(s.gamma.begin(), s.gamma.end(), std::uint8_t{1});
    return s;
  }

  static SubmodelIndicator from_variables(int p, const std::vector<int>& vars) {
    SubmodelIndicator s(p);
    for (int v : vars) {
      if (v < 1 || v > p)
        throw DimensionMismatch("variable index outside [1, p]");
      s.gamma[static_cast<std::size_t>(v)] = 1;
    }
    return s;
  }

  // Bits over the variables only, e.g. "01101" for p=5.
  static SubmodelIndicator from_bits(const std::string& bits) {
    SubmodelIndicator s(static_cast<int>(bits.size()));
    for (std::size_t j = 0; j < bits.size(); ++j) {
      if (bits[j] != '0' && bits[j] != '1')
        throw ParseError("indicator bitstring must be 0/1");
      s.gamma[j + 1] = bits[j] == '1';
    }
    return s;
  }

  int p() const { return static_cast<int>(gamma.size()) - 1; }

  // Count of included variables, intercept excluded.
  int size() const {
    int k = 0;
    for (std::size_t j = 1; j < gamma.size(); ++j) k += gamma[j];
    return k;
  }

  bool includes(int var) const {
    return gamma[static_cast<std::size_t>(var)] != 0;
  }

  SubmodelIndicator with(int var) const {
    SubmodelIndicator s = *this;
    s.gamma[static_cast<std::size_t>(var)] = 1;
    return s;
  }

  SubmodelIndicator without(int var) const {
    SubmodelIndicator s = *this;
    s.gamma[static_cast<std::size_t>(var)] = 0;
    return s;
  }

  // Design-column indices: 0 for the intercept, then j for variable j.
  std::vector<int> design_columns() const {
    std::vector<int> cols;
    cols.reserve(static_cast<std::size_t>(size()) + 1);
    cols.push_back(0);
    for (int j = 1; j <= p(); ++j)
      if (gamma[static_cast<std::size_t>(j)]) cols.push_back(j);
    return cols;
  }

  std::string bits() const {
    std::string s(static_cast<std::size_t>(p()), '0');
    for (int j = 1; j <= p(); ++j)
      if (gamma[static_cast<std::size_t>(j)]) s[static_cast<std::size_t>(j - 1)] = '1';
    return s;
  }

  // [1, x_j1, ..., x_jk] for a raw predictor row.
  Eigen::VectorXd gather_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    if (x.size() != p()) throw DimensionMismatch("row length != p");
    Eigen::VectorXd out(size() + 1);
    out[0] = 1.0;
    int k = 1;
    for (int j = 1; j <= p(); ++j)
      if (gamma[static_cast<std::size_t>(j)]) out[k++] = x[j - 1];
    return out;
  }

  // n x (size+1) design with leading intercept column.
  Eigen::MatrixXd design(const Eigen::Ref<const Eigen::MatrixXd>& X) const {
    if (X.cols() != p()) throw DimensionMismatch("X columns != p");
    Eigen::MatrixXd M(X.rows(), size() + 1);
    M.col(0).setOnes();
    int k = 1;
    for (int j = 1; j <= p(); ++j)
      if (gamma[static_cast<std::size_t>(j)]) M.col(k++) = X.col(j - 1);
    return M;
  }

  bool operator==(const SubmodelIndicator& o) const { return gamma == o.gamma; }
  bool operator!=(const SubmodelIndicator& o) const { return !(*this == o); }

  // Tie order used by MAP selection: smaller size first, then lexicographic
  // over the variable bits.
  bool tie_before(const SubmodelIndicator& o) const {
    if (size() != o.size()) return size() < o.size();
    return gamma < o.gamma;
  }
};

struct SubmodelKeyHash {
  std::size_t operator()(const std::string& s) const noexcept {
    return std::hash<std::string>{}(s);
  }
};

// ---------------------------------------------------------------------------
// PosteriorDraws

struct PosteriorDraws {
  SubmodelIndicator subset;
  Eigen::MatrixXd w;       // S x (size+1), row per draw
  Eigen::VectorXd sigma2;  // S
  std::uint64_t seed = 0;

  int count() const { return static_cast<int>(w.rows()); }

  void validate() const {
    if (count() < 1) throw DimensionMismatch("draw count S >= 1 required");
    if (sigma2.size() != w.rows())
      throw DimensionMismatch("sigma2 length != draw count");
    if (w.cols() != subset.size() + 1)
      throw DimensionMismatch("draw width != subset size + 1");
    if ((sigma2.array() <= 0.0).any())
      throw DimensionMismatch("sigma2 draws must be positive");
  }

  // Content identifier used to tag projections with their source.
  std::uint64_t content_hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](std::uint64_t v) {
      h ^= v;
      h *= 1099511628211ULL;
    };
    mix(seed);
    mix(static_cast<std::uint64_t>(w.rows()));
    mix(static_cast<std::uint64_t>(w.cols()));
    for (std::uint8_t g : subset.gamma) mix(g);
    return h;
  }
};

// ---------------------------------------------------------------------------
// PredictiveMixture

enum class Family { gaussian, student_t };

struct MixtureComponent {
  double log_weight;
  Family family;
  double location;
  double scale;  // sd for gaussian, scale for student-t
  double dof;    // ignored for gaussian

  double log_pdf(double y) const {
    return family == Family::gaussian
               ? normal_log_pdf(y, location, scale * scale)
               : student_t_log_pdf(y, location, scale, dof);
  }

  double variance() const {
    if (family == Family::gaussian) return scale * scale;
    if (dof <= 2.0)
      throw InfiniteVariance("component dof " + std::to_string(dof) + " <= 2");
    return scale * scale * dof / (dof - 2.0);
  }
};

struct PredictiveMixture {
  std::vector<MixtureComponent> components;

  void validate() const {
    Eigen::VectorXd lw(components.size());
    for (std::size_t i = 0; i < components.size(); ++i)
      lw[static_cast<Eigen::Index>(i)] = components[i].log_weight;
    if (std::abs(log_sum_exp(lw)) > 1e-8)
      throw DimensionMismatch("mixture log-weights do not normalize");
  }

  double mean() const {
    double m = 0.0;
    for (const auto& c : components) m += std::exp(c.log_weight) * c.location;
    return m;
  }

  // Law of total variance across components.
  double variance() const {
    const double m = mean();
    double v = 0.0;
    for (const auto& c : components) {
      const double w = std::exp(c.log_weight);
      v += w * (c.variance() + (c.location - m) * (c.location - m));
    }
    return v;
  }

  double sd() const { return std::sqrt(variance()); }
};

inline double mixture_log_density(const PredictiveMixture& m, double y) {
  Eigen::VectorXd terms(m.components.size());
  for (std::size_t i = 0; i < m.components.size(); ++i)
    terms[static_cast<Eigen::Index>(i)] =
        m.components[i].log_weight + m.components[i].log_pdf(y);
  return log_sum_exp(terms);
}

// ---------------------------------------------------------------------------
// CSV dataset format: header row, response column named "y", remaining
// columns are predictors in file order, '.' decimal separator.

namespace detail {
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}
}  // namespace detail

inline Dataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty dataset file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv_line(line);
  int y_col = -1;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == "y") {
      if (y_col >= 0) throw ParseError("duplicate response column 'y'");
      y_col = static_cast<int>(j);
    } else {
      names.push_back(header[j]);
    }
  }
  if (y_col < 0) throw ParseError("no response column named 'y' in " + path);

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw ParseError("row " + std::to_string(line_no) + " has " +
                       std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(header.size()));
    std::vector<double> row(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) {
      try {
        std::size_t pos = 0;
        row[j] = std::stod(cells[j], &pos);
        if (pos != cells[j].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ParseError("row " + std::to_string(line_no) +
                         ": cannot parse number '" + cells[j] + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("dataset has no data rows: " + path);

  const int n = static_cast<int>(rows.size());
  const int p = static_cast<int>(header.size()) - 1;
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    int k = 0;
    for (int j = 0; j < static_cast<int>(header.size()); ++j) {
      if (j == y_col)
        y[i] = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      else
        X(i, k++) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  Dataset d = make_dataset(std::move(X), std::move(y));
  d.names = names;
  return d;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_dataset_csv(const std::string& path, const Dataset& d) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write dataset file: " + path);
  for (int j = 0; j < d.p(); ++j) out << d.names[static_cast<std::size_t>(j)] << ',';
  out << "y\n";
  for (int i = 0; i < d.n(); ++i) {
    for (int j = 0; j < d.p(); ++j) out << format_double(d.X(i, j)) << ',';
    out << format_double(d.y[i]) << '\n';
  }
}

}  // namespace bpms

#endif
