#include "mvcal/evalues.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mvcal/math.hpp"

namespace mvcal {

namespace {

double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

std::vector<double> beta_binomial_probs(double alpha, double beta, int m) {
  std::vector<double> probs(static_cast<std::size_t>(m) + 1);
  const double lb = log_beta(alpha, beta);
  double sum = 0.0;
  for (int k = 0; k <= m; ++k) {
    const double lchoose = std::lgamma(m + 1.0) - std::lgamma(k + 1.0) - std::lgamma(m - k + 1.0);
    probs[static_cast<std::size_t>(k)] =
        std::exp(lchoose + log_beta(k + alpha, m - k + beta) - lb);
    sum += probs[static_cast<std::size_t>(k)];
  }
  for (auto& p : probs) p /= sum;
  return probs;
}

}  // namespace

AlternativeModel AlternativeModel::uniform(int m) {
  AlternativeModel model;
  model.kind_ = Kind::uniform;
  model.m_ = m;
  model.probs_.assign(static_cast<std::size_t>(m) + 1, 1.0 / (m + 1));
  return model;
}

AlternativeModel AlternativeModel::beta_binomial(double alpha, double beta, int m) {
  if (!(alpha > 0.0) || !(beta > 0.0))
    throw std::invalid_argument("beta_binomial: alpha, beta must be positive");
  AlternativeModel model;
  model.kind_ = Kind::beta_binomial;
  model.m_ = m;
  model.alpha_ = alpha;
  model.beta_ = beta;
  model.probs_ = beta_binomial_probs(alpha, beta, m);
  return model;
}

AlternativeModel AlternativeModel::empirical(const std::vector<std::int64_t>& counts) {
  if (counts.empty()) throw std::invalid_argument("empirical: counts must not be empty");
  AlternativeModel model;
  model.kind_ = Kind::empirical;
  model.m_ = static_cast<int>(counts.size()) - 1;
  std::int64_t n = 0;
  for (const auto c : counts) n += c;
  model.fitted_on_ = n;
  model.probs_.resize(counts.size());
  const double denom = static_cast<double>(n) + static_cast<double>(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i)
    model.probs_[i] = (static_cast<double>(counts[i]) + 1.0) / denom;
  return model;
}

double AlternativeModel::prob(int rank) const {
  if (rank < 1 || rank > m_ + 1)
    throw std::invalid_argument("AlternativeModel::prob: rank outside 1..M+1");
  return probs_[static_cast<std::size_t>(rank - 1)];
}

// ---------------------------------------------------------------------------
// Beta-binomial maximum likelihood

namespace {

struct Objective {
  double ll;      // mean log-likelihood (constants dropped)
  double ga, gb;  // gradient in (alpha, beta)
};

Objective bb_objective(const std::vector<std::int64_t>& counts, int m, double n, double a,
                       double b) {
  Objective obj{0.0, 0.0, 0.0};
  for (int k = 0; k <= m; ++k) {
    const double c = static_cast<double>(counts[static_cast<std::size_t>(k)]);
    if (c == 0.0) continue;
    obj.ll += c * (std::lgamma(k + a) + std::lgamma(m - k + b));
    obj.ga += c * digamma(k + a);
    obj.gb += c * digamma(m - k + b);
  }
  // binomial coefficients are constants in (a, b) and are dropped
  obj.ll = obj.ll / n - std::lgamma(a) - std::lgamma(b) + std::lgamma(a + b) -
           std::lgamma(m + a + b);
  obj.ga = obj.ga / n - digamma(a) + digamma(a + b) - digamma(m + a + b);
  obj.gb = obj.gb / n - digamma(b) + digamma(a + b) - digamma(m + a + b);
  return obj;
}

}  // namespace

BetaBinomialFit fit_beta_binomial_counts(const std::vector<std::int64_t>& counts, int m,
                                         double alpha0, double beta0, int max_iterations,
                                         double tol) {
  if (static_cast<int>(counts.size()) != m + 1)
    throw std::invalid_argument("fit_beta_binomial_counts: counts must have M+1 entries");
  double n = 0.0;
  for (const auto c : counts) n += static_cast<double>(c);
  if (n <= 0.0) throw std::invalid_argument("fit_beta_binomial_counts: no observations");

  const double kLogLo = std::log(1e-6), kLogHi = std::log(1e8);
  double la = std::clamp(std::log(alpha0), kLogLo, kLogHi);
  double lb = std::clamp(std::log(beta0), kLogLo, kLogHi);

  BetaBinomialFit fit;
  Objective cur = bb_objective(counts, m, n, std::exp(la), std::exp(lb));
  for (int iter = 0; iter < max_iterations; ++iter) {
    const double a = std::exp(la), b = std::exp(lb);
    // gradient in log-parameters
    const double g1 = a * cur.ga, g2 = b * cur.gb;
    if (std::max(std::abs(g1), std::abs(g2)) < tol) {
      fit.converged = true;
      break;
    }

    // Hessian in log-parameters via trigamma
    double haa = 0.0, hbb = 0.0;
    for (int k = 0; k <= m; ++k) {
      const double c = static_cast<double>(counts[static_cast<std::size_t>(k)]);
      if (c == 0.0) continue;
      haa += c * trigamma(k + a);
      hbb += c * trigamma(m - k + b);
    }
    const double common = trigamma(a + b) - trigamma(m + a + b);
    haa = haa / n - trigamma(a) + common;
    hbb = hbb / n - trigamma(b) + common;
    const double hab = common;
    const double h11 = g1 + a * a * haa;
    const double h22 = g2 + b * b * hbb;
    const double h12 = a * b * hab;

    double s1, s2;
    const double det = h11 * h22 - h12 * h12;
    if (det > 0.0 && h11 < 0.0) {
      s1 = -(h22 * g1 - h12 * g2) / det;
      s2 = -(h11 * g2 - h12 * g1) / det;
    } else {
      s1 = g1;  // fall back to gradient ascent
      s2 = g2;
    }

    double step = 1.0;
    bool improved = false;
    for (int halving = 0; halving < 40; ++halving) {
      const double ta = std::clamp(la + step * s1, kLogLo, kLogHi);
      const double tb = std::clamp(lb + step * s2, kLogLo, kLogHi);
      const Objective trial = bb_objective(counts, m, n, std::exp(ta), std::exp(tb));
      if (trial.ll > cur.ll || (ta == la && tb == lb)) {
        la = ta;
        lb = tb;
        cur = trial;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    ++fit.iterations;
    if (!improved) break;
  }
  fit.alpha = std::exp(la);
  fit.beta = std::exp(lb);
  if (!fit.converged) {
    // accept a stationary boundary point as converged if the gradient is tiny
    const Objective obj = bb_objective(counts, m, n, fit.alpha, fit.beta);
    fit.converged = std::max(std::abs(fit.alpha * obj.ga), std::abs(fit.beta * obj.gb)) < tol;
  }
  return fit;
}

AlternativeModel fit_beta_binomial(const std::vector<int>& ranks, int m) {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(m) + 1, 0);
  for (const int r : ranks) {
    if (r < 1 || r > m + 1) throw std::invalid_argument("fit_beta_binomial: rank outside 1..M+1");
    ++counts[static_cast<std::size_t>(r - 1)];
  }
  int distinct = 0;
  for (const auto c : counts) distinct += c > 0;
  if (distinct < 2) {
    AlternativeModel model = AlternativeModel::uniform(m);
    model.fell_back_ = true;
    model.fitted_on_ = static_cast<std::int64_t>(ranks.size());
    return model;
  }
  const BetaBinomialFit fit = fit_beta_binomial_counts(counts, m);
  if (!fit.converged) {
    AlternativeModel model = AlternativeModel::uniform(m);
    model.fell_back_ = true;
    model.fitted_on_ = static_cast<std::int64_t>(ranks.size());
    return model;
  }
  AlternativeModel model = AlternativeModel::beta_binomial(fit.alpha, fit.beta, m);
  model.fitted_on_ = static_cast<std::int64_t>(ranks.size());
  return model;
}

double e_factor(int rank, const AlternativeModel& model, int m) {
  if (rank < 1 || rank > m + 1) throw std::invalid_argument("e_factor: rank outside 1..M+1");
  if (model.kind() == AlternativeModel::Kind::uniform) return 1.0;
  return (m + 1) * model.prob(rank);
}

double rejection_threshold(double alpha, int ell, int lag_k) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("rejection_threshold: alpha in (0,1)");
  if (ell < 1) throw std::invalid_argument("rejection_threshold: ell >= 1");
  if (lag_k <= 1) return ell / alpha;
  return ell * std::exp(1.0) * std::log(static_cast<double>(lag_k)) / alpha;
}

// ---------------------------------------------------------------------------
// EProcess

EProcess::EProcess(int m, EProcessOptions options) : m_(m), options_(options) {
  if (m_ < 1) throw std::invalid_argument("EProcess: M >= 1 required");
  if (options_.lag_k < 1) throw std::invalid_argument("EProcess: lag_k >= 1 required");
  if (options_.burn_in < 0) throw std::invalid_argument("EProcess: burn_in >= 0 required");
  log_products_.assign(static_cast<std::size_t>(options_.lag_k), 0.0);
  ClassState blank;
  blank.counts.assign(static_cast<std::size_t>(m_) + 1, 0);
  blank.model = AlternativeModel::uniform(m_);
  classes_.assign(static_cast<std::size_t>(options_.lag_k), blank);
}

int EProcess::distinct_ranks(const ClassState& cls) const {
  int distinct = 0;
  for (const auto c : cls.counts) distinct += c > 0;
  return distinct;
}

void EProcess::absorb_rank(ClassState& cls, int rank) {
  ++cls.counts[static_cast<std::size_t>(rank - 1)];
  ++cls.n;

  if (options_.alternative == AlternativeModel::Kind::empirical) {
    cls.model = AlternativeModel::empirical(cls.counts);
    return;
  }

  if (distinct_ranks(cls) < 2) {
    cls.model = AlternativeModel::uniform(m_);
    return;
  }
  ++cls.since_full_fit;
  if (!cls.have_params || cls.since_full_fit >= options_.refit_interval) {
    const BetaBinomialFit fit = fit_beta_binomial_counts(cls.counts, m_, cls.alpha, cls.beta);
    cls.since_full_fit = 0;
    if (fit.converged) {
      cls.alpha = fit.alpha;
      cls.beta = fit.beta;
      cls.have_params = true;
      cls.model = AlternativeModel::beta_binomial(cls.alpha, cls.beta, m_);
    } else {
      cls.model = AlternativeModel::uniform(m_);
    }
  } else {
    // one warm-started damped Newton step between full refits
    const BetaBinomialFit fit =
        fit_beta_binomial_counts(cls.counts, m_, cls.alpha, cls.beta, 1);
    cls.alpha = fit.alpha;
    cls.beta = fit.beta;
    cls.model = AlternativeModel::beta_binomial(cls.alpha, cls.beta, m_);
  }
}

void EProcess::advance(double factor) {
  if (!(factor >= 0.0)) throw std::invalid_argument("EProcess::advance: factor must be >= 0");
  const auto cls = static_cast<std::size_t>(time() % options_.lag_k);
  log_products_[cls] += std::log(factor);

  double log_max = -std::numeric_limits<double>::infinity();
  for (const double lp : log_products_) log_max = std::max(log_max, lp);
  double e;
  if (std::isinf(log_max) && log_max < 0.0) {
    e = 0.0;
  } else {
    double sum = 0.0;
    for (const double lp : log_products_) sum += std::exp(lp - log_max);
    e = std::exp(log_max) * (sum / options_.lag_k);
  }
  trace_.push_back(e);
  max_e_ = std::max(max_e_, e);
}

void EProcess::update(int rank) {
  if (rank < 1 || rank > m_ + 1) throw std::invalid_argument("EProcess::update: rank outside 1..M+1");
  ClassState& cls = classes_[static_cast<std::size_t>(time() % options_.lag_k)];
  const bool in_burn_in = time() < options_.burn_in;
  const double factor = in_burn_in ? 1.0 : e_factor(rank, cls.model, m_);
  advance(factor);
  absorb_rank(cls, rank);
}

void EProcess::update(int rank, long t) {
  if (t != time() + 1)
    throw std::logic_error("EProcess::update: time index out of order");
  update(rank);
}

void EProcess::update_skipped() { advance(1.0); }

double EProcess::current() const {
  return trace_.empty() ? 1.0 : trace_.back();
}

double EProcess::class_product(int j) const {
  return std::exp(log_products_.at(static_cast<std::size_t>(j)));
}

const AlternativeModel& EProcess::class_model(int j) const {
  return classes_.at(static_cast<std::size_t>(j)).model;
}

TestDecision decide(const EProcess& process, double alpha, int ell) {
  TestDecision decision;
  decision.alpha = alpha;
  decision.ell = ell;
  decision.threshold = rejection_threshold(alpha, ell, process.options().lag_k);
  const auto& trace = process.trace();
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (trace[i] >= decision.threshold) {
      decision.rejected = true;
      decision.rejected_at = static_cast<long>(i) + 1;
      break;
    }
  }
  return decision;
}

double reciprocal_p(const EProcess& process) {
  if (process.trace().empty())
    throw std::logic_error("reciprocal_p: no e-values recorded yet");
  return std::min(1.0, 1.0 / process.max_e());
}

}  // namespace mvcal
