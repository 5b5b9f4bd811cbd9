#include "mvcal/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mvcal/math.hpp"
#include "parallel.hpp"

namespace mvcal {

namespace {

constexpr long kChunk = 32;

struct LayoutRef {
  Eigen::Index dim = 0;
  Eigen::Index members = 0;
  std::optional<GridShape> grid;

  void check(const EnsembleCase& ensemble) const {
    const bool same_grid =
        ensemble.grid.has_value() == grid.has_value() &&
        (!grid || (grid->rows == ensemble.grid->rows && grid->cols == ensemble.grid->cols));
    if (ensemble.dim() != dim || ensemble.member_count() != members || !same_grid)
      throw ConfigError("case layout drifts mid-stream");
  }
};

}  // namespace

EvaluationRun evaluate_generated(long n_cases, const ChunkGenerator& generator,
                                 const std::vector<PreRankSpec>& specs, std::uint64_t seed,
                                 const RunOptions& options) {
  if (specs.empty()) throw ConfigError("at least one pre-rank spec is required");
  if (n_cases < 1) throw ConfigError("at least one case is required");

  const auto n_specs = static_cast<Eigen::Index>(specs.size());

  // Reference layout from the first case; every case must match it.
  LayoutRef layout;
  {
    std::vector<EnsembleCase> probe(1);
    generator(0, 1, probe);
    probe[0].validate();
    layout.dim = probe[0].dim();
    layout.members = probe[0].member_count();
    layout.grid = probe[0].grid;
    for (const auto& spec : specs) spec.validate_for(probe[0]);
  }

  EvaluationRun run;
  run.specs = specs;
  run.m = static_cast<int>(layout.members);
  run.n_cases = n_cases;
  run.lag_k = options.lag_k;
  run.alpha = options.alpha;
  run.seed = seed;
  run.rank_matrix.setZero(n_cases, n_specs);

  // Parallel phase: per-(spec, case) substreams make rank rows order-free.
  detail::parallel_chunks(n_cases, kChunk, options.threads, [&](long begin, long end) {
    std::vector<EnsembleCase> chunk(static_cast<std::size_t>(end - begin));
    generator(begin, end, chunk);
    for (long index = begin; index < end; ++index) {
      const EnsembleCase& ensemble = chunk[static_cast<std::size_t>(index - begin)];
      ensemble.validate();
      layout.check(ensemble);
      for (Eigen::Index s = 0; s < n_specs; ++s) {
        Rng rng = Rng::derive(seed, stream::kSpec, specs[static_cast<std::size_t>(s)].stream_key(),
                              static_cast<std::uint64_t>(index));
        const PreRankVector pre =
            apply_prerank(ensemble, specs[static_cast<std::size_t>(s)], rng);
        if (!pre.informative) continue;  // row stays 0 = skipped
        const RankOutcome outcome = randomized_rank(pre.obs, pre.members, rng);
        run.rank_matrix(index, s) = outcome.rank;
      }
    }
  });

  // Sequential phase: histograms and e-processes in case order.
  run.histograms.reserve(static_cast<std::size_t>(n_specs));
  EProcessOptions process_options;
  process_options.lag_k = options.lag_k;
  process_options.burn_in = options.burn_in;
  process_options.alternative = options.alternative;
  for (Eigen::Index s = 0; s < n_specs; ++s) {
    run.histograms.emplace_back(run.m + 1, specs[static_cast<std::size_t>(s)].canonical(), seed);
    if (options.with_eprocesses) run.processes.emplace_back(run.m, process_options);
  }
  for (long index = 0; index < n_cases; ++index) {
    for (Eigen::Index s = 0; s < n_specs; ++s) {
      const int rank = run.rank_matrix(index, s);
      RankOutcome outcome;
      outcome.rank = rank == 0 ? 1 : rank;
      outcome.skipped = rank == 0;
      accumulate(run.histograms[static_cast<std::size_t>(s)], outcome);
      if (options.with_eprocesses) {
        auto& process = run.processes[static_cast<std::size_t>(s)];
        if (outcome.skipped)
          process.update_skipped();
        else
          process.update(rank);
      }
    }
  }
  if (options.with_eprocesses) {
    run.decisions.reserve(static_cast<std::size_t>(n_specs));
    for (Eigen::Index s = 0; s < n_specs; ++s)
      run.decisions.push_back(
          decide(run.processes[static_cast<std::size_t>(s)], options.alpha, static_cast<int>(n_specs)));
  }
  return run;
}

EvaluationRun evaluate_stream(const std::vector<EnsembleCase>& cases,
                              const std::vector<PreRankSpec>& specs, std::uint64_t seed,
                              const RunOptions& options) {
  const ChunkGenerator generator = [&cases](long begin, long end, std::vector<EnsembleCase>& out) {
    for (long i = begin; i < end; ++i) out[static_cast<std::size_t>(i - begin)] = cases[static_cast<std::size_t>(i)];
  };
  return evaluate_generated(static_cast<long>(cases.size()), generator, specs, seed, options);
}

Eigen::MatrixXd rank_correlations(const EvaluationRun& run) {
  const auto n_specs = static_cast<Eigen::Index>(run.specs.size());
  Eigen::MatrixXd corr(n_specs, n_specs);
  corr.setConstant(std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index a = 0; a < n_specs; ++a) {
    corr(a, a) = 1.0;
    for (Eigen::Index b = a + 1; b < n_specs; ++b) {
      std::vector<double> xs, ys;
      xs.reserve(static_cast<std::size_t>(run.n_cases));
      ys.reserve(static_cast<std::size_t>(run.n_cases));
      for (long i = 0; i < run.n_cases; ++i) {
        const int ra = run.rank_matrix(i, a), rb = run.rank_matrix(i, b);
        if (ra == 0 || rb == 0) continue;  // pairwise-complete over skips
        xs.push_back(ra);
        ys.push_back(rb);
      }
      if (xs.size() >= 2) {
        const Eigen::Map<const Eigen::VectorXd> va(xs.data(), static_cast<Eigen::Index>(xs.size()));
        const Eigen::Map<const Eigen::VectorXd> vb(ys.data(), static_cast<Eigen::Index>(ys.size()));
        corr(a, b) = corr(b, a) = pearson_correlation(va, vb);
      }
    }
  }
  return corr;
}

}  // namespace mvcal
