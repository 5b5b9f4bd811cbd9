#pragma once

#include <Eigen/Core>
#include <vector>

#include "mvcal/rng.hpp"

namespace mvcal {

/// Per-dimension sorted predictive quantiles, one row per dimension and one
/// column per quantile level (m - 0.5)/M for m = 1..M.
struct QuantileEnsemble {
  Eigen::MatrixXd values;  // d x M, rows nondecreasing
};

/// Multivariate rank template used to arrange quantiles into members.
struct DependenceTemplate {
  enum class Source { raw_ensemble, historical_observations };
  Eigen::MatrixXd values;  // d x M
  Source source = Source::raw_ensemble;
};

/// Evenly spaced quantile levels (m - 0.5)/M, m = 1..M.
Eigen::VectorXd evenly_spaced_levels(int m);

/// Sorts each row; turns raw members into the matching quantile ensemble.
QuantileEnsemble sort_members_per_dimension(const Eigen::MatrixXd& members);

/// Copula reordering: in each dimension, output member m receives the
/// quantile whose order statistic index equals the rank of template value
/// (j, m) within that dimension's template row. Template ties are broken by
/// the shared seeded randomization. Output marginals equal the input
/// quantiles exactly as multisets. Using the raw ensemble as template gives
/// ECC; historical observations give the Schaake shuffle.
Eigen::MatrixXd reorder(const QuantileEnsemble& quantiles, const DependenceTemplate& dependence,
                        Rng& rng);

/// Uniform random selection (without replacement, order randomized) of M
/// archive vectors as a Schaake shuffle template.
DependenceTemplate schaake_template(const std::vector<Eigen::VectorXd>& archive, int m, Rng& rng);

}  // namespace mvcal
