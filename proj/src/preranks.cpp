#include "mvcal/preranks.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <numeric>

#include "mvcal/spatial.hpp"

namespace mvcal {

namespace {

// Observation in column 0, members after it.
Eigen::MatrixXd pooled(const EnsembleCase& ensemble) {
  Eigen::MatrixXd pool(ensemble.dim(), ensemble.member_count() + 1);
  pool.col(0) = ensemble.observation;
  pool.rightCols(ensemble.member_count()) = ensemble.members;
  return pool;
}

PreRankVector from_pool_values(const Eigen::VectorXd& values) {
  PreRankVector out;
  out.obs = values(0);
  out.members = values.tail(values.size() - 1);
  return out;
}

// Per-dimension counts of strictly smaller pool entries: less(j, i) is the
// number of pool vectors whose j-th coordinate lies below pool(j, i). Tied
// dimensions are resolved afterwards with one shared randomization per
// dimension, so the counts in `less` always describe a full permutation
// 0..n-1 within each dimension.
Eigen::MatrixXd per_dimension_rank_counts(const Eigen::MatrixXd& pool, Rng& rng) {
  const Eigen::Index d = pool.rows(), n = pool.cols();
  Eigen::MatrixXd less = Eigen::MatrixXd::Zero(d, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double* a = pool.col(i).data();
    double* acc_a = less.col(i).data();
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double* b = pool.col(j).data();
      double* acc_b = less.col(j).data();
      for (Eigen::Index k = 0; k < d; ++k) {
        acc_a[k] += b[k] < a[k] ? 1.0 : 0.0;
        acc_b[k] += a[k] < b[k] ? 1.0 : 0.0;
      }
    }
  }
  // A tie-free dimension sums to n(n-1)/2; anything lower contains ties.
  const double full = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  std::vector<double> tiebreak(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < d; ++k) {
    if (less.row(k).sum() == full) continue;
    for (auto& u : tiebreak) u = rng.uniform();
    for (Eigen::Index i = 0; i < n; ++i) {
      double count = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const double vi = pool(k, i), vj = pool(k, j);
        count += vj < vi || (vj == vi && tiebreak[static_cast<std::size_t>(j)] <
                                             tiebreak[static_cast<std::size_t>(i)]);
      }
      less(k, i) = count;
    }
  }
  return less;
}

}  // namespace

PreRankVector multivariate_rank(const EnsembleCase& ensemble) {
  ensemble.validate();
  const Eigen::MatrixXd pool = pooled(ensemble);
  const Eigen::Index d = pool.rows(), n = pool.cols();
  Eigen::VectorXd values(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double* a = pool.col(i).data();
    int dominated = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double* b = pool.col(j).data();
      bool below = true;
      for (Eigen::Index k = 0; k < d; ++k) {
        if (b[k] > a[k]) {
          below = false;
          break;
        }
      }
      dominated += below;
    }
    values(i) = dominated;
  }
  return from_pool_values(values);
}

PreRankVector average_rank(const EnsembleCase& ensemble, Rng& rng) {
  ensemble.validate();
  const Eigen::MatrixXd pool = pooled(ensemble);
  const Eigen::MatrixXd less = per_dimension_rank_counts(pool, rng);
  const double d = static_cast<double>(pool.rows());
  const Eigen::VectorXd values = 1.0 + (less.colwise().sum() / d).transpose().array();
  return from_pool_values(values);
}

PreRankVector band_depth(const EnsembleCase& ensemble, Rng& rng) {
  ensemble.validate();
  const Eigen::MatrixXd pool = pooled(ensemble);
  const Eigen::MatrixXd less = per_dimension_rank_counts(pool, rng);
  const double d = static_cast<double>(pool.rows());
  const double n = static_cast<double>(pool.cols());  // M + 1
  // (M+1-r)(r-1) with r = 1 + less
  const Eigen::ArrayXXd r = less.array() + 1.0;
  const Eigen::VectorXd values = (((n - r) * (r - 1.0)).colwise().sum() / d).matrix();
  return from_pool_values(values);
}

PreRankVector energy_score_prerank(const EnsembleCase& ensemble) {
  ensemble.validate();
  const Eigen::MatrixXd pool = pooled(ensemble);
  const Eigen::Index n = pool.cols();
  const double m = static_cast<double>(n - 1);
  Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      dist(i, j) = dist(j, i) = (pool.col(i) - pool.col(j)).norm();
  const Eigen::VectorXd row_sums = dist.rowwise().sum();
  const double all_pairs = row_sums.sum();
  Eigen::VectorXd values(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double within = all_pairs - 2.0 * row_sums(i);
    values(i) = row_sums(i) / m - within / (2.0 * m * m);
  }
  return from_pool_values(values);
}

namespace {

void standardize_pool(Eigen::MatrixXd& pool, const PreRankSpec& spec) {
  const Eigen::Index d = pool.rows();
  if (spec.standardize == Standardize::pooled) {
    for (Eigen::Index k = 0; k < d; ++k) {
      const double mean = pool.row(k).mean();
      const double var = (pool.row(k).array() - mean).square().mean();
      if (var == 0.0) {
        pool.row(k).setZero();
      } else {
        pool.row(k) = (pool.row(k).array() - mean) / std::sqrt(var);
      }
    }
  } else if (spec.standardize == Standardize::climatological) {
    const auto& clim = *spec.climatology;
    pool = ((pool.colwise() - clim.mean).array().colwise() / clim.sd.array()).matrix();
  }
}

template <typename Fn>
PreRankVector map_simple(const Eigen::MatrixXd& pool, Fn&& fn) {
  Eigen::VectorXd values(pool.cols());
  for (Eigen::Index i = 0; i < pool.cols(); ++i) values(i) = fn(pool.col(i));
  return PreRankVector{values(0), values.tail(values.size() - 1), true};
}

}  // namespace

PreRankVector apply_prerank(const EnsembleCase& ensemble, const PreRankSpec& spec, Rng& rng) {
  ensemble.validate();
  spec.validate_for(ensemble);

  EnsembleCase working = ensemble;
  if (spec.standardize != Standardize::none) {
    Eigen::MatrixXd pool = pooled(ensemble);
    standardize_pool(pool, spec);
    working.observation = pool.col(0);
    working.members = pool.rightCols(pool.cols() - 1);
  }

  switch (spec.kind) {
    case PreRankKind::multivariate:
      return multivariate_rank(working);
    case PreRankKind::average:
      return average_rank(working, rng);
    case PreRankKind::band_depth:
      return band_depth(working, rng);
    case PreRankKind::energy_score:
      return energy_score_prerank(working);
    case PreRankKind::location:
      return map_simple(pooled(working), [](const auto& v) { return location_prerank(v); });
    case PreRankKind::scale:
      return map_simple(pooled(working), [](const auto& v) { return scale_prerank(v); });
    case PreRankKind::dependence: {
      if (working.grid) {
        // Gridded fields measure dependence along the first (horizontal) grid
        // axis, which keeps the pre-rank orthogonal to the isotropy contrast.
        const GridShape shape = *working.grid;
        const MultiLag lag{spec.lag, 0};
        return map_simple(pooled(working), [&](const auto& v) {
          const Eigen::VectorXd flat = v;
          return dependence_prerank_spatial(field_view(flat, shape), lag);
        });
      }
      return map_simple(pooled(working),
                        [&](const auto& v) { return dependence_prerank(v, spec.lag); });
    }
    case PreRankKind::fte: {
      PreRankVector out = map_simple(
          pooled(working), [&](const auto& v) { return fte_prerank(v, spec.threshold); });
      // All-zero exceedance fractions carry no information; flag the case so
      // the caller can omit it from the histogram.
      out.informative = out.obs > 0.0 || out.members.maxCoeff() > 0.0;
      return out;
    }
    case PreRankKind::isotropy: {
      const GridShape shape = *working.grid;
      return map_simple(pooled(working), [&](const auto& v) {
        const Eigen::VectorXd flat = v;
        return isotropy_prerank(field_view(flat, shape), spec.lag);
      });
    }
  }
  throw ConfigError("apply_prerank: unknown pre-rank kind");
}

// ---------------------------------------------------------------------------
// PreRankSpec

namespace {

constexpr std::array<std::pair<PreRankKind, const char*>, 9> kKindNames{{
    {PreRankKind::multivariate, "multivariate"},
    {PreRankKind::average, "average"},
    {PreRankKind::band_depth, "band_depth"},
    {PreRankKind::energy_score, "energy_score"},
    {PreRankKind::location, "location"},
    {PreRankKind::scale, "scale"},
    {PreRankKind::dependence, "dependence"},
    {PreRankKind::fte, "fte"},
    {PreRankKind::isotropy, "isotropy"},
}};

const char* kind_name(PreRankKind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "?";
}

std::string format_double(double value) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), res.ptr);
}

}  // namespace

std::string PreRankSpec::canonical() const {
  std::string out = kind_name(kind);
  if (kind == PreRankKind::dependence || kind == PreRankKind::isotropy)
    out += "(h=" + std::to_string(lag) + ")";
  else if (kind == PreRankKind::fte)
    out += "(t=" + format_double(threshold) + ")";
  if (standardize == Standardize::pooled)
    out += "|std=pooled";
  else if (standardize == Standardize::climatological)
    out += "|std=clim";
  return out;
}

std::uint64_t PreRankSpec::stream_key() const {
  // FNV-1a
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : canonical()) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

PreRankSpec PreRankSpec::parse(const std::string& text) {
  std::string normalized = text;
  std::replace(normalized.begin(), normalized.end(), '-', '_');

  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= normalized.size()) {
    const std::size_t colon = normalized.find(':', start);
    parts.push_back(normalized.substr(start, colon - start));
    if (colon == std::string::npos) break;
    start = colon + 1;
  }

  PreRankSpec spec;
  bool known = false;
  for (const auto& [k, name] : kKindNames) {
    if (parts[0] == name) {
      spec.kind = k;
      known = true;
      break;
    }
  }
  if (!known) throw ConfigError("unknown pre-rank kind: '" + parts[0] + "'");

  for (std::size_t i = 1; i < parts.size(); ++i) {
    const auto eq = parts[i].find('=');
    if (eq == std::string::npos)
      throw ConfigError("bad pre-rank option '" + parts[i] + "' (want key=value)");
    const std::string key = parts[i].substr(0, eq), value = parts[i].substr(eq + 1);
    if (key == "h") {
      spec.lag = std::stoi(value);
      if (spec.lag < 1) throw ConfigError("pre-rank lag h must be >= 1");
    } else if (key == "t") {
      spec.threshold = std::stod(value);
    } else if (key == "std") {
      if (value == "pooled")
        spec.standardize = Standardize::pooled;
      else if (value == "none")
        spec.standardize = Standardize::none;
      else
        throw ConfigError("unknown standardization '" + value +
                          "' (climatological statistics come from a config file)");
    } else {
      throw ConfigError("unknown pre-rank option key '" + key + "'");
    }
  }
  return spec;
}

void PreRankSpec::validate_for(const EnsembleCase& ensemble) const {
  if (standardize == Standardize::climatological) {
    if (!climatology) throw ConfigError("climatological standardization without statistics");
    if (climatology->mean.size() != ensemble.dim() || climatology->sd.size() != ensemble.dim())
      throw ConfigError("climatology dimension mismatch");
    if ((climatology->sd.array() <= 0.0).any())
      throw ConfigError("climatological sd entries must be positive");
  }
  switch (kind) {
    case PreRankKind::dependence:
      if (ensemble.grid) {
        if (lag >= ensemble.grid->rows)
          throw ConfigError("dependence lag exceeds grid extent");
      } else if (lag >= ensemble.dim()) {
        throw ConfigError("dependence lag must satisfy h < d");
      }
      break;
    case PreRankKind::isotropy:
      if (!ensemble.grid) throw ConfigError("isotropy pre-rank requires a gridded layout");
      if (lag >= std::min(ensemble.grid->rows, ensemble.grid->cols))
        throw ConfigError("isotropy lag must satisfy h < min(p, q)");
      break;
    default:
      break;
  }
}

}  // namespace mvcal
