#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <vector>

#include "mvcal/evalues.hpp"
#include "mvcal/preranks.hpp"
#include "mvcal/ranks.hpp"

namespace mvcal {

struct RunOptions {
  int lag_k = 1;
  double alpha = 0.05;
  int burn_in = 100;
  AlternativeModel::Kind alternative = AlternativeModel::Kind::beta_binomial;
  bool with_eprocesses = true;
  int threads = 0;  // 0 = hardware concurrency
};

/// Everything produced by evaluating a case stream against a spec list.
/// Decisions apply the Bonferroni factor ell = specs.size().
struct EvaluationRun {
  std::vector<PreRankSpec> specs;
  int m = 0;
  long n_cases = 0;
  int lag_k = 1;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  std::vector<RankHistogram> histograms;
  std::vector<EProcess> processes;    // empty when e-processes are disabled
  std::vector<TestDecision> decisions;
  /// Observation ranks, n_cases x specs.size(); 0 marks a skipped case.
  Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic> rank_matrix;
};

/// Fills cases[begin..end) into `out` (pre-sized to end - begin). Must be a
/// pure function of the index range so evaluation order can be parallel.
using ChunkGenerator = std::function<void(long begin, long end, std::vector<EnsembleCase>& out)>;

/// Core evaluation driver. Pre-rank application and ranking use one random
/// substream per (spec, case), keyed by the spec's canonical form, so adding
/// or removing a spec never perturbs the others. Histograms and e-processes
/// are accumulated sequentially in case order after the parallel phase.
EvaluationRun evaluate_generated(long n_cases, const ChunkGenerator& generator,
                                 const std::vector<PreRankSpec>& specs, std::uint64_t seed,
                                 const RunOptions& options = {});

/// Evaluates an in-memory, time-ordered case stream.
EvaluationRun evaluate_stream(const std::vector<EnsembleCase>& cases,
                              const std::vector<PreRankSpec>& specs, std::uint64_t seed,
                              const RunOptions& options = {});

/// Pairwise Pearson correlation of observation ranks across cases
/// (pairwise-complete over skips). Unit diagonal; entries with fewer than two
/// complete pairs or no variation are NaN.
Eigen::MatrixXd rank_correlations(const EvaluationRun& run);

}  // namespace mvcal
