#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "mvcal/preranks.hpp"

namespace mvcal {

/// Directional lag on a grid with unit spacing: di steps along the first
/// index, dj along the second. Negative components reflect the pair set.
struct MultiLag {
  int di = 0;
  int dj = 0;
};

/// Fraction of components strictly exceeding t.
template <typename Derived>
double fte_prerank(const Eigen::DenseBase<Derived>& x, double t) {
  if (x.size() < 1) throw std::invalid_argument("fte_prerank: empty input");
  return static_cast<double>((x.derived().array() > t).count()) /
         static_cast<double>(x.size());
}

/// Directional empirical variogram gamma_x(h) = (1/(2|I(h)|)) sum |x_j - x_{j+h}|^2
/// over all grid pairs separated by exactly h.
template <typename Derived>
double spatial_variogram(const Eigen::MatrixBase<Derived>& field, MultiLag h) {
  const Eigen::Index p = field.rows(), q = field.cols();
  const Eigen::Index r0 = std::max(0, -h.di), c0 = std::max(0, -h.dj);
  const Eigen::Index nr = p - std::abs(h.di), nc = q - std::abs(h.dj);
  if (nr <= 0 || nc <= 0)
    throw std::invalid_argument("spatial_variogram: empty pair set for this lag");
  const auto a = field.block(r0, c0, nr, nc);
  const auto b = field.block(r0 + h.di, c0 + h.dj, nr, nc);
  const double ss = (a - b).squaredNorm();
  return ss / (2.0 * static_cast<double>(nr * nc));
}

/// Spatial analog of the dependence pre-rank: -gamma_x(h)/s^2 with s^2 the
/// population variance over all grid values; constant fields map to 0.
template <typename Derived>
double dependence_prerank_spatial(const Eigen::MatrixBase<Derived>& field, MultiLag h) {
  const double gamma = spatial_variogram(field, h);
  const double s2 = scale_prerank(field.reshaped());
  if (s2 == 0.0) return 0.0;
  return -gamma / s2;
}

/// Directional contrast of the variogram between the two axis directions and
/// the two diagonals; 0 = direction-balanced, lower = more anisotropic.
/// Terms with a vanishing denominator contribute 0.
template <typename Derived>
double isotropy_prerank(const Eigen::MatrixBase<Derived>& field, int h) {
  if (h < 1 || h >= std::min(field.rows(), field.cols()))
    throw std::invalid_argument("isotropy_prerank: h < min(p, q) required");
  const auto contrast = [](double ga, double gb) {
    const double denom = ga + gb;
    if (denom == 0.0) return 0.0;
    const double ratio = (ga - gb) / denom;
    return ratio * ratio;
  };
  const double axis = contrast(spatial_variogram(field, {h, 0}),
                               spatial_variogram(field, {0, h}));
  const double diagonal = contrast(spatial_variogram(field, {h, h}),
                                   spatial_variogram(field, {-h, h}));
  return -(axis + diagonal);
}

/// Row-major view of one flattened field (first grid index varies slowest).
using FieldView = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

inline FieldView field_view(const Eigen::VectorXd& flat, const GridShape& shape) {
  if (shape.rows * shape.cols != flat.size())
    throw std::invalid_argument("field_view: shape does not match vector length");
  return FieldView(flat.data(), shape.rows, shape.cols);
}

}  // namespace mvcal
