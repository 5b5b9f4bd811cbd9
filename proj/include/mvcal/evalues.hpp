#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace mvcal {

/// Distribution of ranks 1..M+1 under the alternative hypothesis. Every rank
/// has strictly positive probability, so e-factors stay finite and nonzero.
class AlternativeModel {
 public:
  enum class Kind { uniform, beta_binomial, empirical };

  static AlternativeModel uniform(int m);
  /// Beta-binomial on {0..M} (ranks shifted by -1) with parameters alpha, beta.
  static AlternativeModel beta_binomial(double alpha, double beta, int m);
  /// Empirical frequencies with add-one smoothing; counts indexed by rank-1.
  static AlternativeModel empirical(const std::vector<std::int64_t>& counts);

  /// p_A(rank) for rank in 1..M+1.
  double prob(int rank) const;

  Kind kind() const { return kind_; }
  int m() const { return m_; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  /// True when a degenerate or non-converging fit fell back to uniform.
  bool fell_back() const { return fell_back_; }
  std::int64_t fitted_on() const { return fitted_on_; }

  AlternativeModel() = default;

 private:
  Kind kind_ = Kind::uniform;
  int m_ = 0;
  double alpha_ = 1.0, beta_ = 1.0;
  bool fell_back_ = false;
  std::int64_t fitted_on_ = 0;
  std::vector<double> probs_;  // size M+1

  friend AlternativeModel fit_beta_binomial(const std::vector<int>&, int);
};

struct BetaBinomialFit {
  double alpha = 1.0;
  double beta = 1.0;
  bool converged = false;
  int iterations = 0;
};

/// Damped Newton ascent of the beta-binomial mean log-likelihood in
/// (log alpha, log beta). `counts[k]` holds the number of observations of
/// k = rank - 1. Stops when the gradient max-norm drops below `tol`.
BetaBinomialFit fit_beta_binomial_counts(const std::vector<std::int64_t>& counts, int m,
                                         double alpha0 = 1.0, double beta0 = 1.0,
                                         int max_iterations = 200, double tol = 1e-8);

/// Maximum-likelihood beta-binomial alternative for a batch of ranks.
/// Degenerate input (fewer than two distinct ranks) or a non-converging
/// optimization falls back to the uniform model, flagged via fell_back().
AlternativeModel fit_beta_binomial(const std::vector<int>& ranks, int m);

/// E_t = (M+1) p_A(rank). Exactly 1 for the uniform model.
double e_factor(int rank, const AlternativeModel& model, int m);

/// Rejection boundary: ell/alpha for lag 1, ell * e * log(k) / alpha beyond.
double rejection_threshold(double alpha, int ell, int lag_k);

struct EProcessOptions {
  int lag_k = 1;
  int burn_in = 100;           // leading updates contribute factor exactly 1
  AlternativeModel::Kind alternative = AlternativeModel::Kind::beta_binomial;
  int refit_interval = 25;     // full MLE cadence; single warm Newton steps between
};

/// Sequential e-process over observation ranks. For lag k, updates cycle
/// through k index classes; each class keeps its own running product and its
/// own alternative model fitted on that class's past ranks, which preserves
/// the conditional e-value property per class. e_t is the average of the
/// class products, tracked in log space.
class EProcess {
 public:
  explicit EProcess(int m, EProcessOptions options = {});

  /// Consumes the next rank in time order.
  void update(int rank);
  /// Same, with an explicit 1-based time index that must equal time() + 1.
  void update(int rank, long t);
  /// A skipped case contributes factor 1 and leaves the alternative untouched.
  void update_skipped();
  /// Low-level: multiply the current class product by `factor` and advance.
  void advance(double factor);

  long time() const { return static_cast<long>(trace_.size()); }
  double current() const;
  const std::vector<double>& trace() const { return trace_; }
  double max_e() const { return max_e_; }
  int m() const { return m_; }
  const EProcessOptions& options() const { return options_; }

  /// Running product of class j (0-based), exponentiated.
  double class_product(int j) const;
  /// Alternative model the next update of class j would be scored against.
  const AlternativeModel& class_model(int j) const;

 private:
  struct ClassState {
    std::vector<std::int64_t> counts;
    std::int64_t n = 0;
    double alpha = 1.0, beta = 1.0;
    bool have_params = false;
    int since_full_fit = 0;
    AlternativeModel model;
  };

  int distinct_ranks(const ClassState& cls) const;
  void absorb_rank(ClassState& cls, int rank);

  int m_;
  EProcessOptions options_;
  std::vector<double> log_products_;
  std::vector<ClassState> classes_;
  std::vector<double> trace_;
  double max_e_ = 0.0;
};

struct TestDecision {
  double alpha = 0.05;
  int ell = 1;  // number of pre-rank functions under test (Bonferroni)
  double threshold = 0.0;
  bool rejected = false;
  std::optional<long> rejected_at;
};

/// Anytime-valid decision: reject at the first t where e_t reaches the
/// Bonferroni-adjusted threshold; rejection is sticky.
TestDecision decide(const EProcess& process, double alpha, int ell);

/// Conservative p-value min(1, 1 / max_t e_t).
double reciprocal_p(const EProcess& process);

}  // namespace mvcal
