#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvcal/rng.hpp"

namespace mvcal {

/// Rank of one value within a pool of size M+1 (itself plus M competitors).
struct RankOutcome {
  int rank = 1;          // in 1..M+1
  int ties_broken = 0;   // number of exact ties randomized over
  bool skipped = false;  // case carried no information (e.g. all-zero FTE)
};

/// Randomized rank of z0 among {z0, z1..zM}: 1 + #{z_i < z0} + W with
/// W uniform on {0..N}, N the number of members tied with z0. The {0..N}
/// domain keeps ranks of exchangeable inputs uniform even under ties.
template <typename Derived>
RankOutcome randomized_rank(double z0, const Eigen::DenseBase<Derived>& members,
                            Rng& rng) {
  if (members.size() < 1) throw std::invalid_argument("randomized_rank: M >= 1 required");
  if (!std::isfinite(z0)) throw std::invalid_argument("randomized_rank: non-finite value");
  int below = 0, ties = 0;
  for (Eigen::Index i = 0; i < members.size(); ++i) {
    const double z = members.derived()(i);
    if (!std::isfinite(z)) throw std::invalid_argument("randomized_rank: non-finite member");
    below += z < z0;
    ties += z == z0;
  }
  RankOutcome out;
  out.ties_broken = ties;
  const int w = ties > 0 ? static_cast<int>(rng.below(static_cast<std::uint64_t>(ties) + 1)) : 0;
  out.rank = 1 + below + w;
  return out;
}

inline RankOutcome randomized_rank(double z0, const std::vector<double>& members, Rng& rng) {
  return randomized_rank(z0, Eigen::Map<const Eigen::VectorXd>(members.data(),
                                                               static_cast<Eigen::Index>(members.size())),
                         rng);
}

/// Counts of observation ranks over 1..M+1, plus skipped cases.
/// Invariant: sum(bin_counts) + skipped == total.
struct RankHistogram {
  std::vector<std::int64_t> bin_counts;  // index r-1 holds rank r
  std::int64_t total = 0;
  std::int64_t skipped = 0;
  std::string prerank_id;
  std::uint64_t seed = 0;

  explicit RankHistogram(int num_bins = 0, std::string id = {}, std::uint64_t seed_in = 0)
      : bin_counts(static_cast<std::size_t>(num_bins), 0),
        prerank_id(std::move(id)),
        seed(seed_in) {}

  int num_bins() const { return static_cast<int>(bin_counts.size()); }
  std::int64_t counted() const { return total - skipped; }
};

inline void accumulate(RankHistogram& histogram, const RankOutcome& outcome) {
  if (outcome.skipped) {
    ++histogram.skipped;
  } else {
    if (outcome.rank < 1 || outcome.rank > histogram.num_bins())
      throw std::invalid_argument("accumulate: rank outside 1..M+1");
    ++histogram.bin_counts[static_cast<std::size_t>(outcome.rank - 1)];
  }
  ++histogram.total;
}

/// Elementwise sum of two histograms over the same binning.
inline RankHistogram merge(const RankHistogram& a, const RankHistogram& b) {
  if (a.num_bins() != b.num_bins())
    throw std::invalid_argument("merge: histograms have different bin counts");
  RankHistogram out = a;
  for (int i = 0; i < out.num_bins(); ++i) out.bin_counts[static_cast<std::size_t>(i)] += b.bin_counts[static_cast<std::size_t>(i)];
  out.total += b.total;
  out.skipped += b.skipped;
  return out;
}

/// Chi-square statistic against a flat histogram, M degrees of freedom.
inline double chi_square_flatness(const RankHistogram& histogram) {
  const std::int64_t n = histogram.counted();
  if (n <= 0 || histogram.num_bins() == 0)
    throw std::invalid_argument("chi_square_flatness: empty histogram");
  const double expected = static_cast<double>(n) / histogram.num_bins();
  double stat = 0.0;
  for (const auto count : histogram.bin_counts) {
    const double diff = static_cast<double>(count) - expected;
    stat += diff * diff / expected;
  }
  return stat;
}

/// Randomized probability integral transform Z = F(y-) + V (F(y) - F(y-)).
struct PitValue {
  double z = 0.0;
};

template <typename Cdf, typename LeftLimit>
PitValue randomized_pit(double y, Cdf&& cdf_at, LeftLimit&& left_limit_at, Rng& rng) {
  const double hi = cdf_at(y);
  const double lo = left_limit_at(y);
  if (!(hi >= 0.0 && hi <= 1.0) || !(lo >= 0.0 && lo <= 1.0) || lo > hi)
    throw std::invalid_argument("randomized_pit: CDF values outside [0,1] or not ordered");
  if (lo == hi) return PitValue{hi};
  return PitValue{lo + rng.uniform() * (hi - lo)};
}

}  // namespace mvcal
