#include "fd/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>

#include "fd/errors.hpp"

namespace fd {

Estimator averaging_estimator(const Mat& x, std::span<const int> pm_labels) {
  if (x.rows() == 0) throw std::invalid_argument("averaging_estimator: empty dataset");
  if (x.rows() != pm_labels.size()) throw std::invalid_argument("averaging_estimator: label count mismatch");
  Vec beta(x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const int y = pm_labels[i];
    if (y != 1 && y != -1) throw std::invalid_argument("averaging_estimator: labels must be +/-1");
    auto row = x.row(i);
    for (std::size_t j = 0; j < beta.size(); ++j) beta[j] += y * row[j];
  }
  for (std::size_t j = 0; j < beta.size(); ++j) beta[j] /= static_cast<double>(x.rows());
  return {std::move(beta)};
}

Estimator averaging_estimator(const LabeledDataset& ds) {
  if (ds.n_classes != 2) throw std::invalid_argument("averaging_estimator: needs a 2-class dataset");
  std::vector<int> pm(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) pm[i] = 2 * ds.labels[i] - 1;
  return averaging_estimator(ds.x, pm);
}

Estimator federated_aggregate(std::span<const std::pair<Estimator, std::size_t>> locals) {
  if (locals.empty()) throw std::invalid_argument("federated_aggregate: no local estimators");
  std::size_t n = 0;
  for (const auto& [est, n_k] : locals) n += n_k;
  if (n == 0) throw std::invalid_argument("federated_aggregate: total sample count is zero");
  Vec beta(locals[0].first.beta.size());
  for (const auto& [est, n_k] : locals) {
    if (est.beta.size() != beta.size()) throw std::invalid_argument("federated_aggregate: dimension mismatch");
    const double w = static_cast<double>(n_k) / static_cast<double>(n);
    for (std::size_t j = 0; j < beta.size(); ++j) beta[j] += w * est.beta[j];
  }
  return {std::move(beta)};
}

Estimator self_train(const Estimator& beta_s, const Mat& unlabeled, double gamma) {
  if (gamma < 0.0) throw std::invalid_argument("self_train: gamma must be nonnegative");
  Vec beta(unlabeled.cols());
  std::size_t accepted = 0;
  for (std::size_t i = 0; i < unlabeled.rows(); ++i) {
    auto row = unlabeled.row(i);
    const double score = dot(beta_s.beta, row);
    if (std::abs(score) <= gamma) continue;
    const double sign = score > 0.0 ? 1.0 : -1.0;
    for (std::size_t j = 0; j < beta.size(); ++j) beta[j] += sign * row[j];
    ++accepted;
  }
  if (accepted == 0) {
    throw DegenerateThresholdError("self_train: threshold " + format_double(gamma) +
                                   " accepted no samples");
  }
  for (std::size_t j = 0; j < beta.size(); ++j) beta[j] /= static_cast<double>(accepted);
  return {std::move(beta)};
}

double cot_metric(const Estimator& beta, const Vec& u) {
  const double bn = norm(beta.beta);
  const double un = norm(u);
  if (bn == 0.0 || un == 0.0) throw std::invalid_argument("cot_metric: zero vector");
  const double rho = dot(beta.beta, u) / (bn * un);
  if (rho >= 1.0 - 1e-12) return std::numeric_limits<double>::infinity();
  if (rho <= -1.0 + 1e-12) return -std::numeric_limits<double>::infinity();
  return rho / std::sqrt(1.0 - rho * rho);
}

TheoremQuantities theorem1_quantities(const TheoremParams& tp, LambdaVariant variant) {
  if (!(tp.alpha > 0.0 && tp.alpha < 1.0)) throw std::invalid_argument("theorem1: alpha must be in (0,1)");
  if (!(tp.sigma > 0.0)) throw std::invalid_argument("theorem1: sigma must be positive");
  if (tp.gamma < 0.0) throw std::invalid_argument("theorem1: gamma must be nonnegative");
  if (!(tp.u_bar > 0.0)) throw std::invalid_argument("theorem1: u_bar must be positive");
  const double g_minus = (tp.alpha + tp.gamma) / tp.sigma;
  const double g_plus = (tp.gamma - tp.alpha) / tp.sigma;
  TheoremQuantities q;
  q.rho = q_tail(g_plus) + q_tail(g_minus);
  if (q.rho < 1e-15) {
    throw DegenerateThresholdError("theorem1: acceptance probability underflow at gamma " +
                                   format_double(tp.gamma));
  }
  q.nu = q_tail(g_minus) / q.rho;
  const double mass = std::exp(-0.5 * g_plus * g_plus) + std::exp(-0.5 * g_minus * g_minus);
  const double c = variant == LambdaVariant::gaussian_density
                       ? 1.0 / std::sqrt(2.0 * std::numbers::pi)
                       : 1.0 / (2.0 * std::numbers::pi);
  q.lambda = c * mass / q.rho;
  return q;
}

double theorem1_closed_form(const TheoremParams& tp, LambdaVariant variant) {
  const TheoremQuantities q = theorem1_quantities(tp, variant);
  const double numer = 1.0 + tp.sigma * tp.alpha * q.lambda - 2.0 * q.nu;
  const double denom =
      tp.sigma * std::sqrt((1.0 - tp.alpha * tp.alpha) * q.lambda * q.lambda +
                           1.0 / (tp.u_bar * q.rho));
  return numer / denom;
}

namespace {

double one_trial(const TheoremParams& tp, std::size_t p, RngStream& trial_rng) {
  // u = e1; beta_s gets exact correlation alpha via a random unit vector in
  // the orthogonal complement of u.
  Vec u(p);
  u[0] = 1.0;
  Vec v(p);
  double nrm = 0.0;
  do {
    v[0] = 0.0;
    for (std::size_t j = 1; j < p; ++j) v[j] = trial_rng.normal();
    nrm = norm(v);
  } while (nrm == 0.0);
  Vec beta_s(p);
  beta_s[0] = tp.alpha;
  const double orth = std::sqrt(1.0 - tp.alpha * tp.alpha);
  for (std::size_t j = 1; j < p; ++j) beta_s[j] = orth * v[j] / nrm;

  const auto n_unlabeled =
      static_cast<std::size_t>(std::llround(tp.u_bar * static_cast<double>(p)));
  // Accumulate sum of sign(score) * x without materializing the samples.
  Vec sum(p);
  Vec x(p);
  std::size_t accepted = 0;
  for (std::size_t i = 0; i < n_unlabeled; ++i) {
    const double y = trial_rng.uniform() < 0.5 ? -1.0 : 1.0;
    double score = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      x[j] = y * u[j] + tp.sigma * trial_rng.normal();
      score += beta_s[j] * x[j];
    }
    if (std::abs(score) <= tp.gamma) continue;
    const double sign = score > 0.0 ? 1.0 : -1.0;
    for (std::size_t j = 0; j < p; ++j) sum[j] += sign * x[j];
    ++accepted;
  }
  if (accepted == 0) {
    throw DegenerateThresholdError("monte_carlo_cot: threshold accepted no samples");
  }
  for (std::size_t j = 0; j < p; ++j) sum[j] /= static_cast<double>(accepted);
  return cot_metric({std::move(sum)}, u);
}

}  // namespace

McResult monte_carlo_cot(const TheoremParams& tp, std::size_t p, std::size_t trials,
                         RngStream& rng, unsigned threads) {
  if (p < 100) throw std::invalid_argument("monte_carlo_cot: p must be >= 100");
  if (trials < 10) throw std::invalid_argument("monte_carlo_cot: need at least 10 trials");
  theorem1_quantities(tp);  // parameter validation + degeneracy check

  McResult res;
  res.per_trial.assign(trials, 0.0);
  std::vector<RngStream> streams;
  streams.reserve(trials);
  for (std::size_t t = 0; t < trials; ++t) {
    streams.push_back(rng.split("trial." + std::to_string(t)));
  }

  const unsigned n_threads = std::max(1u, std::min<unsigned>(threads, trials));
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&](unsigned worker) {
    for (std::size_t t = worker; t < trials; t += n_threads) {
      try {
        res.per_trial[t] = one_trial(tp, p, streams[t]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  if (n_threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (unsigned w = 0; w < n_threads; ++w) pool.emplace_back(work, w);
    for (std::thread& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  double mean = 0.0;
  for (double c : res.per_trial) mean += c;
  mean /= static_cast<double>(trials);
  double var = 0.0;
  for (double c : res.per_trial) var += (c - mean) * (c - mean);
  var /= static_cast<double>(trials - 1);
  res.mean = mean;
  res.se = std::sqrt(var / static_cast<double>(trials));
  return res;
}

}  // namespace fd
