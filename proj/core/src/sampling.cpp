#include "fd/sampling.hpp"

#include <algorithm>
#include <stdexcept>

namespace fd {

namespace {

void check_budget(const UnlabeledDataset& pub, std::size_t n_logit) {
  if (n_logit > pub.size()) throw std::invalid_argument("sampling: budget exceeds pool size");
}

std::vector<std::int64_t> pick_indices(const UnlabeledDataset& pub,
                                       const std::vector<std::size_t>& rows) {
  std::vector<std::int64_t> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(pub.indices[r]);
  std::sort(out.begin(), out.end());
  return out;
}

struct PoolScores {
  std::vector<double> entropy;  // per pool row
  std::vector<int> pseudo;      // argmax class per pool row
};

PoolScores score_pool(const UnlabeledDataset& pub, const ModelParams& params) {
  PoolScores s;
  s.entropy.reserve(pub.size());
  s.pseudo.reserve(pub.size());
  for (std::size_t i = 0; i < pub.size(); ++i) {
    const Vec p = forward_logits(params, pub.sample(i), 1.0);
    s.entropy.push_back(entropy(p));
    s.pseudo.push_back(static_cast<int>(argmax(p)));
  }
  return s;
}

// Pool rows ordered by (entropy asc, global index asc).
std::vector<std::size_t> entropy_order(const UnlabeledDataset& pub,
                                       const std::vector<double>& ent) {
  std::vector<std::size_t> order(pub.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (ent[a] != ent[b]) return ent[a] < ent[b];
    return pub.indices[a] < pub.indices[b];
  });
  return order;
}

}  // namespace

LocalLabelHistogram LocalLabelHistogram::from_dataset(const LabeledDataset& ds) {
  if (ds.size() == 0) throw std::invalid_argument("label histogram: empty dataset");
  LocalLabelHistogram h;
  h.proportions.assign(static_cast<std::size_t>(ds.n_classes), 0.0);
  for (int y : ds.labels) h.proportions[static_cast<std::size_t>(y)] += 1.0;
  for (double& v : h.proportions) v /= static_cast<double>(ds.size());
  return h;
}

std::vector<std::int64_t> select_none(const UnlabeledDataset& pub, RngStream& shared_rng,
                                      std::size_t n_logit) {
  check_budget(pub, n_logit);
  const std::vector<std::size_t> rows = shared_rng.sample_without_replacement(pub.size(), n_logit);
  return pick_indices(pub, rows);
}

std::vector<std::int64_t> select_random(const UnlabeledDataset& pub, RngStream& client_rng,
                                        std::size_t n_logit) {
  check_budget(pub, n_logit);
  const std::vector<std::size_t> rows = client_rng.sample_without_replacement(pub.size(), n_logit);
  return pick_indices(pub, rows);
}

std::vector<std::int64_t> select_low_entropy(const UnlabeledDataset& pub,
                                             const ModelParams& params, std::size_t n_logit) {
  check_budget(pub, n_logit);
  const PoolScores s = score_pool(pub, params);
  std::vector<std::size_t> order = entropy_order(pub, s.entropy);
  order.resize(n_logit);
  return pick_indices(pub, order);
}

std::vector<std::int64_t> select_mixed(const UnlabeledDataset& pub, const ModelParams& params,
                                       const LocalLabelHistogram& hist, RngStream& client_rng,
                                       std::size_t n_logit) {
  check_budget(pub, n_logit);
  if (n_logit < 2 || n_logit % 2 != 0) {
    throw std::invalid_argument("select_mixed: budget must be even and >= 2");
  }
  const std::size_t half = n_logit / 2;
  const PoolScores s = score_pool(pub, params);
  const std::vector<std::size_t> order = entropy_order(pub, s.entropy);

  const std::size_t n_classes = hist.proportions.size();
  std::vector<std::vector<std::size_t>> by_class(n_classes);  // entropy-ordered per class
  for (std::size_t r : order) by_class[static_cast<std::size_t>(s.pseudo[r])].push_back(r);

  // Entropy half: per-class quotas proportional to the local label histogram.
  std::vector<char> taken(pub.size(), 0);
  std::vector<std::size_t> entropy_half;
  entropy_half.reserve(half);
  const std::vector<std::size_t> quota = largest_remainder_apportion(hist.proportions, half);
  for (std::size_t c = 0; c < n_classes; ++c) {
    const std::size_t take = std::min(quota[c], by_class[c].size());
    for (std::size_t j = 0; j < take; ++j) {
      entropy_half.push_back(by_class[c][j]);
      taken[by_class[c][j]] = 1;
    }
  }
  // Unfilled quota spills to the global ascending-entropy order.
  for (std::size_t r : order) {
    if (entropy_half.size() >= half) break;
    if (!taken[r]) {
      entropy_half.push_back(r);
      taken[r] = 1;
    }
  }

  // Random half from the untouched remainder of the pool.
  std::vector<std::size_t> rest;
  rest.reserve(pub.size() - entropy_half.size());
  for (std::size_t r = 0; r < pub.size(); ++r) {
    if (!taken[r]) rest.push_back(r);
  }
  const std::vector<std::size_t> picks =
      client_rng.sample_without_replacement(rest.size(), half);
  std::vector<std::size_t> rows = entropy_half;
  for (std::size_t k : picks) rows.push_back(rest[k]);
  return pick_indices(pub, rows);
}

}  // namespace fd
