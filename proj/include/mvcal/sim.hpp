#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>

#include "mvcal/pipeline.hpp"
#include "mvcal/preranks.hpp"
#include "mvcal/rng.hpp"

namespace mvcal {

/// Gaussian process parameters for one side of a scenario. The calibrated
/// reference is mean_shift = 0, sigma2 = 1, tau = 1, anisotropy = 1.
struct GaussianParams {
  double mean_shift = 0.0;
  double sigma2 = 1.0;
  double tau = 1.0;
  double anisotropy = 1.0;  // vertical (second grid coordinate) rescale, grids only
};

/// A simulation scenario: either a d-dimensional Gaussian vector with
/// exponential covariance sigma^2 exp(-|i-j|/tau), or a Gaussian random field
/// on a rows x cols unit grid with sigma^2 exp(-dist(i,j)/tau). Geometric
/// anisotropy multiplies the second grid coordinate before taking distances.
struct ScenarioConfig {
  enum class Family { mvn, grf };
  Family family = Family::mvn;
  int d = 10;
  int rows = 30, cols = 30;
  GaussianParams truth{};
  GaussianParams forecast{};
  int members = 20;
  long n_cases = 10000;
  std::uint64_t seed = 0;

  Eigen::Index dim() const {
    return family == Family::mvn ? d : static_cast<Eigen::Index>(rows) * cols;
  }
  std::optional<GridShape> grid() const {
    if (family == Family::grf) return GridShape{rows, cols};
    return std::nullopt;
  }
  void validate() const;
};

enum class Side { truth, forecast };

/// Lower-triangular square root of the scenario covariance for one side.
/// Retries the factorization with a small diagonal jitter if needed.
Eigen::MatrixXd build_covariance(const ScenarioConfig& config, Side side);

/// Draws one case: observation from the truth process, M independent members
/// from the forecast process (forecast mean shift added to every coordinate).
EnsembleCase sample_case(const ScenarioConfig& config, const Eigen::MatrixXd& truth_factor,
                         const Eigen::MatrixXd& forecast_factor, Rng& rng);

/// Generates n_cases cases and evaluates them against the given specs.
/// Fully deterministic given config.seed; cases use per-index substreams so
/// the result does not depend on the number of threads.
EvaluationRun run_scenario(const ScenarioConfig& config, const std::vector<PreRankSpec>& specs,
                           const RunOptions& options = {});

}  // namespace mvcal
