#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mvcal/errors.hpp"
#include "mvcal/rng.hpp"

namespace mvcal {

/// Grid dimensions of a spatial field. The first index ("horizontal" for lag
/// semantics) varies slowest in the flattened row-major vector.
struct GridShape {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
};

/// One forecast instance: observation plus M ensemble members sharing a
/// dimension layout. Members are the columns of a d x M matrix.
struct EnsembleCase {
  Eigen::VectorXd observation;
  Eigen::MatrixXd members;
  std::optional<GridShape> grid;

  Eigen::Index dim() const { return observation.size(); }
  Eigen::Index member_count() const { return members.cols(); }

  void validate() const {
    if (dim() < 1 || member_count() < 1)
      throw std::invalid_argument("EnsembleCase: d >= 1 and M >= 1 required");
    if (members.rows() != dim())
      throw std::invalid_argument("EnsembleCase: member dimension mismatch");
    if (grid && grid->rows * grid->cols != dim())
      throw std::invalid_argument("EnsembleCase: grid shape does not match d");
    if (!observation.allFinite() || !members.allFinite())
      throw std::invalid_argument("EnsembleCase: non-finite values");
  }
};

enum class PreRankKind {
  multivariate,
  average,
  band_depth,
  energy_score,
  location,
  scale,
  dependence,
  fte,
  isotropy,
};

enum class Standardize { none, pooled, climatological };

/// Per-dimension reference statistics for climatological standardization.
struct Climatology {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;  // entries must be > 0
};

/// A pre-rank function plus its hyperparameters. Standardization is part of
/// the pre-rank, not a hidden preprocessing pass.
struct PreRankSpec {
  PreRankKind kind = PreRankKind::location;
  int lag = 1;             // dependence, isotropy
  double threshold = 1.0;  // fte
  Standardize standardize = Standardize::none;
  std::shared_ptr<const Climatology> climatology;

  /// Canonical identifier, e.g. "dependence(h=2)" or "location|std=pooled".
  std::string canonical() const;

  /// Stable 64-bit key for random substream derivation (FNV-1a of canonical()).
  std::uint64_t stream_key() const;

  /// Parses the CLI form: kind[:key=value[:key=value]], keys h, t, std.
  static PreRankSpec parse(const std::string& text);

  /// Throws ConfigError when the spec cannot be applied to the case layout.
  void validate_for(const EnsembleCase& ensemble) const;
};

/// Pre-rank values of the observation and each member, in member order.
struct PreRankVector {
  double obs = 0.0;
  Eigen::VectorXd members;
  bool informative = true;  // false => rank carries no information, skip case
};

// ---------------------------------------------------------------------------
// Simple pre-rank functions of a single vector.

/// Mean of the components.
template <typename Derived>
double location_prerank(const Eigen::DenseBase<Derived>& v) {
  if (v.size() < 1) throw std::invalid_argument("location_prerank: empty vector");
  return v.derived().mean();
}

/// Population variance (1/d normalization) of the components.
template <typename Derived>
double scale_prerank(const Eigen::DenseBase<Derived>& v) {
  if (v.size() < 1) throw std::invalid_argument("scale_prerank: empty vector");
  const auto a = v.derived().array();
  const double mean = a.mean();
  return (a - mean).square().sum() / static_cast<double>(v.size());
}

/// Lag-h empirical variogram of a vector: (1/(2(d-h))) sum |v_j - v_{j+h}|^2.
template <typename Derived>
double vector_variogram(const Eigen::DenseBase<Derived>& v, int h) {
  const auto d = v.size();
  if (h < 1 || h >= d) throw std::invalid_argument("vector_variogram: 1 <= h <= d-1 required");
  const auto& vec = v.derived();
  const auto n = d - h;
  const double ss = (vec.tail(n).array() - vec.head(n).array()).square().sum();
  return ss / (2.0 * static_cast<double>(n));
}

/// Negative variogram-to-variance ratio -gamma(h)/s^2; larger means stronger
/// dependence. A constant vector (s^2 = 0) shows no variation at any lag and
/// maps to 0.
template <typename Derived>
double dependence_prerank(const Eigen::DenseBase<Derived>& v, int h) {
  const double s2 = scale_prerank(v);
  const double gamma = vector_variogram(v, h);
  if (s2 == 0.0) return 0.0;
  return -gamma / s2;
}

// ---------------------------------------------------------------------------
// Ensemble-dependent pre-rank functions. Each treats every vector of the
// observation/member pool in turn as x_0 with the remaining M as context, so
// the outputs are exchangeable under permutation of the pool.

/// Count of pool vectors weakly dominated componentwise, per vector.
PreRankVector multivariate_rank(const EnsembleCase& ensemble);

/// Mean over dimensions of the randomized univariate rank, one shared
/// randomization per dimension across the whole pool.
PreRankVector average_rank(const EnsembleCase& ensemble, Rng& rng);

/// Mean over dimensions of (M+1-r)(r-1); larger = more central.
PreRankVector band_depth(const EnsembleCase& ensemble, Rng& rng);

/// Energy score of the leave-one-out ensemble against each pool vector.
PreRankVector energy_score_prerank(const EnsembleCase& ensemble);

/// Dispatch on spec.kind with standardization applied first when requested.
PreRankVector apply_prerank(const EnsembleCase& ensemble, const PreRankSpec& spec, Rng& rng);

/// Largest attainable band-depth summand max_r (M+1-r)(r-1).
inline double band_depth_upper_bound(int m) {
  double best = 0.0;
  for (int r = 1; r <= m + 1; ++r)
    best = std::max(best, static_cast<double>(m + 1 - r) * static_cast<double>(r - 1));
  return best;
}

}  // namespace mvcal
