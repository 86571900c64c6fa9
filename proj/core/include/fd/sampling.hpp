#pragma once

#include <cstdint>
#include <vector>

#include "fd/data.hpp"
#include "fd/model.hpp"
#include "fd/numerics.hpp"

namespace fd {

enum class Strategy { none, random, low_entropy, mixed };

struct SamplingConfig {
  Strategy strategy = Strategy::none;
  std::size_t n_logit = 400;  // even for mixed
};

/// Per-class proportions of a client's private labels; sums to 1.
struct LocalLabelHistogram {
  std::vector<double> proportions;
  static LocalLabelHistogram from_dataset(const LabeledDataset& ds);
};

// Every selector returns exactly n_logit unique pool indices, ascending.

/// Shared subset: one draw per round from the round's shared stream; every
/// client given the same stream state receives the identical subset.
std::vector<std::int64_t> select_none(const UnlabeledDataset& pub, RngStream& shared_rng,
                                      std::size_t n_logit);

/// Uniform without replacement from the client's own stream.
std::vector<std::int64_t> select_random(const UnlabeledDataset& pub, RngStream& client_rng,
                                        std::size_t n_logit);

/// The n_logit pool samples with the smallest prediction entropy under
/// `params` (plain softmax), ties broken by ascending index.
std::vector<std::int64_t> select_low_entropy(const UnlabeledDataset& pub,
                                             const ModelParams& params, std::size_t n_logit);

/// Mixed active selection: half the budget goes to low-entropy samples whose
/// pseudo-label histogram matches `hist` (per-class quotas, largest
/// remainder, spill to the global entropy order), the other half is drawn
/// uniformly from the rest of the pool.
std::vector<std::int64_t> select_mixed(const UnlabeledDataset& pub, const ModelParams& params,
                                       const LocalLabelHistogram& hist, RngStream& client_rng,
                                       std::size_t n_logit);

}  // namespace fd
