#include "mvcal/reorder.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "mvcal/errors.hpp"

namespace mvcal {

Eigen::VectorXd evenly_spaced_levels(int m) {
  if (m < 1) throw std::invalid_argument("evenly_spaced_levels: M >= 1 required");
  Eigen::VectorXd levels(m);
  for (int i = 0; i < m; ++i) levels(i) = (i + 0.5) / m;
  return levels;
}

QuantileEnsemble sort_members_per_dimension(const Eigen::MatrixXd& members) {
  QuantileEnsemble out{members};
  std::vector<double> buffer(static_cast<std::size_t>(members.cols()));
  for (Eigen::Index j = 0; j < out.values.rows(); ++j) {
    for (Eigen::Index i = 0; i < out.values.cols(); ++i)
      buffer[static_cast<std::size_t>(i)] = out.values(j, i);
    std::sort(buffer.begin(), buffer.end());
    for (Eigen::Index i = 0; i < out.values.cols(); ++i)
      out.values(j, i) = buffer[static_cast<std::size_t>(i)];
  }
  return out;
}

Eigen::MatrixXd reorder(const QuantileEnsemble& quantiles, const DependenceTemplate& dependence,
                        Rng& rng) {
  const Eigen::Index d = quantiles.values.rows(), m = quantiles.values.cols();
  if (dependence.values.rows() != d || dependence.values.cols() != m)
    throw ConfigError("reorder: template shape does not match quantiles");
  if (!dependence.values.allFinite())
    throw std::invalid_argument("reorder: template contains non-finite values");
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 1; i < m; ++i)
      if (quantiles.values(j, i) < quantiles.values(j, i - 1))
        throw std::invalid_argument("reorder: quantile rows must be nondecreasing");

  Eigen::MatrixXd out(d, m);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  for (Eigen::Index j = 0; j < d; ++j) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return dependence.values(j, a) < dependence.values(j, b);
    });
    // randomize within tie groups so ranks are a measurable function of
    // (inputs, seed)
    std::size_t i = 0;
    while (i < order.size()) {
      std::size_t k = i;
      while (k + 1 < order.size() &&
             dependence.values(j, order[k + 1]) == dependence.values(j, order[i]))
        ++k;
      for (std::size_t a = i; a < k; ++a) {
        const std::size_t b = a + static_cast<std::size_t>(rng.below(k - a + 1));
        std::swap(order[a], order[b]);
      }
      i = k + 1;
    }
    for (Eigen::Index pos = 0; pos < m; ++pos)
      out(j, order[static_cast<std::size_t>(pos)]) = quantiles.values(j, pos);
  }
  return out;
}

DependenceTemplate schaake_template(const std::vector<Eigen::VectorXd>& archive, int m, Rng& rng) {
  if (m < 1) throw std::invalid_argument("schaake_template: M >= 1 required");
  if (static_cast<int>(archive.size()) < m)
    throw std::invalid_argument("schaake_template: archive smaller than M");
  const Eigen::Index d = archive.front().size();
  for (const auto& v : archive)
    if (v.size() != d) throw std::invalid_argument("schaake_template: archive dimension mismatch");

  std::vector<std::size_t> index(archive.size());
  std::iota(index.begin(), index.end(), std::size_t{0});
  for (int i = 0; i < m; ++i) {
    const auto j = static_cast<std::size_t>(i) + rng.below(index.size() - static_cast<std::size_t>(i));
    std::swap(index[static_cast<std::size_t>(i)], index[j]);
  }

  DependenceTemplate out;
  out.source = DependenceTemplate::Source::historical_observations;
  out.values.resize(d, m);
  for (int i = 0; i < m; ++i) out.values.col(i) = archive[index[static_cast<std::size_t>(i)]];
  return out;
}

}  // namespace mvcal
