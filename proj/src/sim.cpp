#include "mvcal/sim.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "mvcal/errors.hpp"

namespace mvcal {

void ScenarioConfig::validate() const {
  if (family == Family::mvn) {
    if (d < 2) throw ConfigError("mvn scenario needs d >= 2");
  } else {
    if (rows < 2 || cols < 2) throw ConfigError("grf scenario needs rows, cols >= 2");
  }
  for (const auto* params : {&truth, &forecast}) {
    if (!(params->sigma2 > 0.0)) throw ConfigError("sigma2 must be positive");
    if (!(params->tau > 0.0)) throw ConfigError("tau must be positive");
    if (!(params->anisotropy > 0.0)) throw ConfigError("anisotropy factor must be positive");
  }
  if (members < 1) throw ConfigError("at least one ensemble member is required");
  if (n_cases < 1) throw ConfigError("at least one case is required");
}

namespace {

Eigen::MatrixXd covariance_matrix(const ScenarioConfig& config, const GaussianParams& params) {
  const Eigen::Index n = config.dim();
  Eigen::MatrixXd cov(n, n);
  if (config.family == ScenarioConfig::Family::mvn) {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j <= i; ++j) {
        const double value = params.sigma2 * std::exp(-std::abs(double(i - j)) / params.tau);
        cov(i, j) = cov(j, i) = value;
      }
  } else {
    // flat index i*cols + j; the second coordinate is scaled by the
    // anisotropy factor before taking Euclidean distances
    const Eigen::Index cols = config.cols;
    for (Eigen::Index a = 0; a < n; ++a) {
      const double ai = static_cast<double>(a / cols);
      const double aj = static_cast<double>(a % cols) * params.anisotropy;
      for (Eigen::Index b = 0; b <= a; ++b) {
        const double bi = static_cast<double>(b / cols);
        const double bj = static_cast<double>(b % cols) * params.anisotropy;
        const double dist = std::hypot(ai - bi, aj - bj);
        const double value = params.sigma2 * std::exp(-dist / params.tau);
        cov(a, b) = cov(b, a) = value;
      }
    }
  }
  return cov;
}

}  // namespace

Eigen::MatrixXd build_covariance(const ScenarioConfig& config, Side side) {
  config.validate();
  const GaussianParams& params = side == Side::truth ? config.truth : config.forecast;
  Eigen::MatrixXd cov = covariance_matrix(config, params);
  const double jitter = 1e-10 * cov.diagonal().maxCoeff();
  for (int attempt = 0; attempt <= 3; ++attempt) {
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    cov.diagonal().array() += jitter;
  }
  throw DataError("covariance factorization failed after jitter retries");
}

EnsembleCase sample_case(const ScenarioConfig& config, const Eigen::MatrixXd& truth_factor,
                         const Eigen::MatrixXd& forecast_factor, Rng& rng) {
  const Eigen::Index dim = config.dim();
  if (truth_factor.rows() != dim || forecast_factor.rows() != dim)
    throw ConfigError("sample_case: factor dimension mismatch");

  EnsembleCase ensemble;
  ensemble.grid = config.grid();

  Eigen::VectorXd z(dim);
  for (Eigen::Index i = 0; i < dim; ++i) z(i) = rng.normal();
  ensemble.observation = truth_factor.triangularView<Eigen::Lower>() * z;
  if (config.truth.mean_shift != 0.0)
    ensemble.observation.array() += config.truth.mean_shift;

  ensemble.members.resize(dim, config.members);
  for (int member = 0; member < config.members; ++member) {
    for (Eigen::Index i = 0; i < dim; ++i) z(i) = rng.normal();
    ensemble.members.col(member) = forecast_factor.triangularView<Eigen::Lower>() * z;
  }
  if (config.forecast.mean_shift != 0.0)
    ensemble.members.array() += config.forecast.mean_shift;
  return ensemble;
}

EvaluationRun run_scenario(const ScenarioConfig& config, const std::vector<PreRankSpec>& specs,
                           const RunOptions& options) {
  config.validate();
  const Eigen::MatrixXd truth_factor = build_covariance(config, Side::truth);
  const Eigen::MatrixXd forecast_factor = build_covariance(config, Side::forecast);
  const Eigen::Index dim = config.dim();
  const int m = config.members;

  // Chunked generation: per-case streams fill the draw columns, one batched
  // triangular product per chunk keeps the factor hot in cache.
  const ChunkGenerator generator = [&](long begin, long end, std::vector<EnsembleCase>& out) {
    const long count = end - begin;
    Eigen::MatrixXd truth_draws(dim, count);
    Eigen::MatrixXd member_draws(dim, count * m);
    for (long c = 0; c < count; ++c) {
      Rng rng = Rng::derive(config.seed, stream::kCase, static_cast<std::uint64_t>(begin + c));
      double* obs_col = truth_draws.col(c).data();
      for (Eigen::Index i = 0; i < dim; ++i) obs_col[i] = rng.normal();
      double* member_cols = member_draws.col(c * m).data();
      for (Eigen::Index i = 0; i < dim * m; ++i) member_cols[i] = rng.normal();
    }
    truth_draws = truth_factor.triangularView<Eigen::Lower>() * truth_draws;
    member_draws = forecast_factor.triangularView<Eigen::Lower>() * member_draws;
    if (config.truth.mean_shift != 0.0) truth_draws.array() += config.truth.mean_shift;
    if (config.forecast.mean_shift != 0.0) member_draws.array() += config.forecast.mean_shift;

    for (long c = 0; c < count; ++c) {
      EnsembleCase& ensemble = out[static_cast<std::size_t>(c)];
      ensemble.observation = truth_draws.col(c);
      ensemble.members = member_draws.middleCols(c * m, m);
      ensemble.grid = config.grid();
    }
  };

  return evaluate_generated(config.n_cases, generator, specs, config.seed, options);
}

}  // namespace mvcal
