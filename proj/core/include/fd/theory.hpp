#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "fd/data.hpp"
#include "fd/numerics.hpp"

namespace fd {

/// Binary GMM parameters: unit mean vector u and noise scale sigma.
struct GmmSpec {
  Vec u;
  double sigma = 1.0;
};

/// Linear estimator of the GMM mean direction.
struct Estimator {
  Vec beta;
};

/// Inputs of the self-training limit: initial correlation alpha in (0,1),
/// noise sigma, acceptance threshold gamma >= 0, and the unlabeled-to-
/// dimension ratio u_bar = u / p.
struct TheoremParams {
  double alpha = 0.5;
  double sigma = 1.0;
  double gamma = 0.0;
  double u_bar = 1.0;
};

/// Normalization of the Gaussian-mass factor in the closed form. The
/// published expression carries 1/(2*pi); the density-based derivation gives
/// 1/sqrt(2*pi). Resolved empirically against the Monte Carlo oracle (see
/// adopted_lambda_variant).
enum class LambdaVariant { gaussian_density, paper_two_pi };

constexpr LambdaVariant adopted_lambda_variant() { return LambdaVariant::gaussian_density; }

/// beta = (1/n) sum y_i x_i with labels in {-1,+1}.
Estimator averaging_estimator(const Mat& x, std::span<const int> pm_labels);

/// Convenience overload for 2-class datasets with {0,1} labels.
Estimator averaging_estimator(const LabeledDataset& ds);

/// beta_s = sum_k (n_k / n) beta_k; identical to the pooled averaging
/// estimator of the concatenated shards.
Estimator federated_aggregate(std::span<const std::pair<Estimator, std::size_t>> locals);

/// Pseudo-label refit: mean of sign(beta_s . x) x over samples with
/// |beta_s . x| > gamma. Throws DegenerateThresholdError when nothing is
/// accepted.
Estimator self_train(const Estimator& beta_s, const Mat& unlabeled, double gamma);

/// cot of the angle between beta and u; +/-inf sentinel at |correlation|
/// within 1e-12 of 1.
double cot_metric(const Estimator& beta, const Vec& u);

struct TheoremQuantities {
  double rho = 0.0;     // acceptance probability
  double nu = 0.0;      // mislabel fraction among accepted
  double lambda = 0.0;  // Gaussian-mass factor
};

TheoremQuantities theorem1_quantities(const TheoremParams& tp,
                                      LambdaVariant variant = adopted_lambda_variant());

/// Asymptotic cot(beta_hat, u) as p -> infinity at fixed u_bar.
double theorem1_closed_form(const TheoremParams& tp,
                            LambdaVariant variant = adopted_lambda_variant());

struct McResult {
  double mean = 0.0;
  double se = 0.0;
  std::vector<double> per_trial;
};

/// Finite-p Monte Carlo of the self-training cot. Per trial: u = e1, beta_s
/// built with exact correlation alpha via a random orthogonal complement,
/// round(u_bar * p) unlabeled GMM draws, then self_train. Per-trial streams
/// are split from rng, so the result is independent of `threads`.
McResult monte_carlo_cot(const TheoremParams& tp, std::size_t p, std::size_t trials,
                         RngStream& rng, unsigned threads = 1);

}  // namespace fd
