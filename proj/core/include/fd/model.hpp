#pragma once

#include <span>
#include <vector>

#include "fd/data.hpp"
#include "fd/numerics.hpp"

namespace fd {

enum class Arch { linear, mlp };

struct ModelSpec {
  Arch arch = Arch::linear;
  std::size_t input_dim = 0;
  std::size_t hidden = 0;  // mlp only
  std::size_t n_classes = 0;
  bool operator==(const ModelSpec&) const = default;
};

struct Layer {
  Mat w;
  Vec b;
  bool operator==(const Layer&) const = default;
};

/// Dense weights for one classifier. Params of equal spec are closed under
/// elementwise affine combination, which is what FedAvg relies on.
struct ModelParams {
  ModelSpec spec;
  std::vector<Layer> layers;
  std::size_t param_count() const;
  bool operator==(const ModelParams&) const = default;
};

/// Same shape family as ModelParams.
struct Gradient {
  std::vector<Layer> layers;
};

/// Zero-mean init scaled by 1/sqrt(fan_in); biases zero.
ModelParams init_params(const ModelSpec& spec, RngStream& rng);

/// Pre-softmax scores; mlp uses a ReLU hidden layer.
Vec raw_scores(const ModelParams& params, std::span<const double> x);

/// softmax(raw_scores / temperature).
Vec forward_logits(const ModelParams& params, std::span<const double> x, double temperature);

/// Mean negative log-probability of the true class over the batch.
double ce_loss(const ModelParams& params, const Mat& x, std::span<const int> labels,
               double temperature = 1.0);

/// Soft-label cross entropy: -mean_j sum_n teacher(j,n) log student(j,n),
/// student evaluated at `temperature`.
double distill_loss(const Mat& teacher, const ModelParams& student, const Mat& x,
                    double temperature);

// Exact analytic gradients of the two losses.
Gradient backward_ce(const ModelParams& params, const Mat& x, std::span<const int> labels,
                     double temperature = 1.0);
Gradient backward_distill(const ModelParams& params, const Mat& x, const Mat& teacher,
                          double temperature);

/// params += a * g, elementwise.
void axpy_params(ModelParams& params, double a, const Gradient& g);

/// Uniform elementwise average; all specs must match.
ModelParams average_params(std::span<const ModelParams> ps);

/// Mini-batch SGD on the supervised loss, reshuffling each epoch.
ModelParams sgd_epochs(const ModelParams& params, const LabeledDataset& ds, std::size_t epochs,
                       double lr, std::size_t batch_size, RngStream& rng);

/// Mini-batch SGD on the distillation loss against fixed teacher rows.
ModelParams sgd_epochs(const ModelParams& params, const Mat& x, const Mat& teacher,
                       double temperature, std::size_t epochs, double lr, std::size_t batch_size,
                       RngStream& rng);

}  // namespace fd
