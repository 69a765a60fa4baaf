#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <variant>

#include <Eigen/Dense>

#include "qaware/dynamics.hpp"
#include "qaware/errors.hpp"
#include "qaware/gaussian.hpp"
#include "qaware/kalman.hpp"
#include "qaware/random.hpp"

namespace qaware {

struct StateQuery {};
struct MeanQuery {};
struct VarianceQuery {};
struct MaxQuery {};
// Number of components inside the closed interval [a, b].
struct CountRangeQuery {
  double a = 0.0;
  double b = 0.0;
};

using QueryKind = std::variant<StateQuery, MeanQuery, VarianceQuery, MaxQuery, CountRangeQuery>;

inline CountRangeQuery count_range(double a, double b) {
  if (!(a <= b)) throw InvalidQueryError("count-range query requires a <= b");
  return {a, b};
}

inline std::string query_name(const QueryKind& kind) {
  struct {
    std::string operator()(StateQuery) const { return "state"; }
    std::string operator()(MeanQuery) const { return "mean"; }
    std::string operator()(VarianceQuery) const { return "variance"; }
    std::string operator()(MaxQuery) const { return "max"; }
    std::string operator()(CountRangeQuery q) const {
      std::ostringstream os;
      os << "count_range[" << q.a << ":" << q.b << "]";
      return os.str();
    }
  } visitor;
  return std::visit(visitor, kind);
}

// Short identifier used in policy names and CLI options.
inline std::string query_tag(const QueryKind& kind) {
  if (std::holds_alternative<CountRangeQuery>(kind)) return "cnt";
  return query_name(kind);
}

inline bool is_vector_valued(const QueryKind& kind) { return std::holds_alternative<StateQuery>(kind); }

// Scalar query functions. The State query has no scalar form.
inline double evaluate_scalar(const QueryKind& kind, const Eigen::Ref<const Eigen::VectorXd>& x) {
  const auto m = x.size();
  if (m < 1) throw InvalidQueryError("empty state vector");
  struct {
    Eigen::Index m;
    const Eigen::Ref<const Eigen::VectorXd>& x;
    double operator()(StateQuery) const { throw InvalidQueryError("state query is vector valued"); }
    double operator()(MeanQuery) const { return x.mean(); }
    double operator()(VarianceQuery) const {
      if (m < 2) throw InvalidQueryError("variance query needs at least two components");
      const double mu = x.mean();
      return (x.array() - mu).square().sum() / static_cast<double>(m - 1);
    }
    double operator()(MaxQuery) const { return x.maxCoeff(); }
    double operator()(CountRangeQuery q) const {
      return static_cast<double>((x.array() >= q.a && x.array() <= q.b).count());
    }
  } visitor{m, x};
  return std::visit(visitor, kind);
}

/// Query value on a state vector: the vector itself for State, a length-1
/// vector otherwise.
inline Eigen::VectorXd evaluate(const QueryKind& kind, const Eigen::VectorXd& x) {
  if (is_vector_valued(kind)) return x;
  return Eigen::VectorXd::Constant(1, evaluate_scalar(kind, x));
}

struct QueryEstimate {
  Eigen::VectorXd value;
  double expected_mse = 0.0;
  int samples_used = 0;
};

inline constexpr int kDefaultEstimateSamples = 1000;
inline constexpr int kDefaultVoiObservations = 200;
inline constexpr int kDefaultVoiInnerSamples = 500;

namespace detail {

inline bool needs_monte_carlo(const QueryKind& kind) {
  return std::holds_alternative<MaxQuery>(kind) || std::holds_alternative<CountRangeQuery>(kind) ||
         std::holds_alternative<VarianceQuery>(kind);
}

// E[S^2] for x ~ N(mu, psi), S^2 the sample variance with divisor M-1.
inline double variance_closed_form(const Eigen::VectorXd& mu, const Eigen::MatrixXd& psi) {
  const auto m = static_cast<double>(mu.size());
  const double mean_mu = mu.mean();
  const double var_mean = psi.sum() / (m * m);
  return (psi.diagonal().sum() + mu.squaredNorm() - m * (var_mean + mean_mu * mean_mu)) / (m - 1.0);
}

// Closed-form estimate for State and Mean.
inline QueryEstimate linear_estimate(const QueryKind& kind, const Eigen::VectorXd& mu, const Eigen::MatrixXd& psi) {
  if (std::holds_alternative<StateQuery>(kind)) return {mu, psi.trace(), 0};
  const auto m = static_cast<double>(mu.size());
  return {Eigen::VectorXd::Constant(1, mu.mean()), psi.sum() / (m * m), 0};
}

/// Estimate and mean squared error from draws x_j = mu + noise.col(j) of the
/// belief. For Variance the estimate is the closed-form mean and only the MSE
/// is sampled.
inline QueryEstimate estimate_from_draws(const QueryKind& kind, const Eigen::VectorXd& mu,
                                         const Eigen::MatrixXd& psi, const Eigen::MatrixXd& noise) {
  const auto count = noise.cols();
  const Eigen::MatrixXd x = noise.colwise() + mu;
  Eigen::VectorXd z(count);
  if (std::holds_alternative<MaxQuery>(kind)) {
    z = x.colwise().maxCoeff().transpose();
  } else if (const auto* q = std::get_if<CountRangeQuery>(&kind)) {
    z = ((x.array() >= q->a) && (x.array() <= q->b)).cast<double>().colwise().sum().transpose();
  } else {
    for (Eigen::Index j = 0; j < count; ++j) z[j] = evaluate_scalar(kind, x.col(j));
  }
  const double z_hat = std::holds_alternative<VarianceQuery>(kind) ? variance_closed_form(mu, psi) : z.mean();
  const double mse = (z.array() - z_hat).square().mean();
  return {Eigen::VectorXd::Constant(1, z_hat), mse, static_cast<int>(count)};
}

inline void check_sample_count(const QueryKind& kind, int samples) {
  if (needs_monte_carlo(kind) && samples < 1)
    throw std::invalid_argument("Monte Carlo query estimate needs at least one sample");
}

}  // namespace detail

/// MMSE response to a query and its expected squared error under the belief
/// x ~ N(x_hat, psi).
///
/// State and Mean use closed forms. Max and CountRange average `samples`
/// draws from the belief; Variance uses the Gaussian moment identity for the
/// estimate and draws only for the error. A zero covariance short-circuits to
/// the exact value with zero error for every kind.
inline QueryEstimate estimate(const QueryKind& kind, const BeliefState& belief, int samples, Rng& rng) {
  detail::check_sample_count(kind, samples);
  belief.check_well_formed();
  const auto& mu = belief.x_hat;
  const auto& psi = belief.psi;
  if (std::holds_alternative<VarianceQuery>(kind) && mu.size() < 2)
    throw InvalidQueryError("variance query needs at least two components");
  if (psi.size() == 0 || psi.cwiseAbs().maxCoeff() == 0.0) return {evaluate(kind, mu), 0.0, 0};
  if (!detail::needs_monte_carlo(kind)) return detail::linear_estimate(kind, mu, psi);
  const Eigen::MatrixXd noise = symmetric_sqrt(psi) * standard_normal_matrix(mu.size(), samples, rng);
  return detail::estimate_from_draws(kind, mu, psi, noise);
}

inline QueryEstimate estimate(const QueryKind& kind, const BeliefState& belief, Rng& rng) {
  return estimate(kind, belief, kDefaultEstimateSamples, rng);
}

struct VoiSettings {
  int observations = kDefaultVoiObservations;  // hypothetical readings y
  int inner_samples = kDefaultVoiInnerSamples;  // belief draws per reading
};

/// Expected reduction in query MSE from polling sensor n, weighted by the
/// delivery probability (1 - epsilon_n) on both terms.
///
/// The posterior term averages over hypothetical readings from the prior
/// predictive N(h x_pri, h psi_pri h^T + sigma_w^2). The same standard-normal
/// draws are reused for the prior term and for every hypothetical reading, so
/// the difference has far lower variance than two independent estimates.
inline double voi(const QueryKind& kind, const BeliefState& prior, const SystemModel& model, std::size_t n,
                  const VoiSettings& settings, Rng& rng) {
  if (prior.phase != Phase::prior) throw std::logic_error("voi requires an a priori belief");
  model.check_sensor(n);
  const double delivery = 1.0 - model.epsilon()[static_cast<Eigen::Index>(n)];
  if (delivery <= 0.0) return 0.0;
  const double s2 = innovation_variance(model, prior, n);
  if (s2 <= 1e-12) return 0.0;
  prior.check_well_formed();
  if (prior.psi.cwiseAbs().maxCoeff() == 0.0) return 0.0;

  const Eigen::RowVectorXd h = model.H().row(static_cast<Eigen::Index>(n));
  const double predicted = h.dot(prior.x_hat);

  if (!detail::needs_monte_carlo(kind)) {
    const BeliefState post = update(model, prior, n, predicted);
    const double before = detail::linear_estimate(kind, prior.x_hat, prior.psi).expected_mse;
    const double after = detail::linear_estimate(kind, post.x_hat, post.psi).expected_mse;
    return delivery * before - delivery * after;
  }

  if (settings.observations < 1 || settings.inner_samples < 1)
    throw std::invalid_argument("voi needs at least one observation and one inner sample");
  const auto m = prior.x_hat.size();
  const Eigen::MatrixXd z = standard_normal_matrix(m, settings.inner_samples, rng);
  const double before =
      detail::estimate_from_draws(kind, prior.x_hat, prior.psi, symmetric_sqrt(prior.psi) * z).expected_mse;

  // Posterior covariance does not depend on the reading; only the mean moves.
  const BeliefState reference = update(model, prior, n, predicted);
  const Eigen::MatrixXd post_noise = symmetric_sqrt(reference.psi) * z;
  // The update is affine in y: x_hat(y) = x_pri + k (y - h x_pri).
  const Eigen::VectorXd gain = (prior.psi * h.transpose()) / s2;
  const double s = std::sqrt(s2);
  double after = 0.0;
  for (int j = 0; j < settings.observations; ++j) {
    const double innovation = s * standard_normal(rng);
    const Eigen::VectorXd x_hat = prior.x_hat + gain * innovation;
    after += detail::estimate_from_draws(kind, x_hat, reference.psi, post_noise).expected_mse;
  }
  after /= settings.observations;
  return delivery * before - delivery * after;
}

inline double voi(const QueryKind& kind, const BeliefState& prior, const SystemModel& model, std::size_t n,
                  Rng& rng) {
  return voi(kind, prior, model, n, VoiSettings{}, rng);
}

}  // namespace qaware
