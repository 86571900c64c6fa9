#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fd/numerics.hpp"

namespace fd {

/// Labeled samples with stable global indices; sample i is row i of x.
struct LabeledDataset {
  std::size_t dim = 0;
  int n_classes = 0;
  Mat x;                              // size() x dim
  std::vector<int> labels;            // each in [0, n_classes)
  std::vector<std::int64_t> indices;  // unique, stable across subsetting

  std::size_t size() const { return labels.size(); }
  std::span<const double> sample(std::size_t i) const { return x.row(i); }
  bool operator==(const LabeledDataset&) const = default;
};

/// Unlabeled pool; indices stay unique and universal so uploads from
/// different clients can be joined on them.
struct UnlabeledDataset {
  std::size_t dim = 0;
  Mat x;
  std::vector<std::int64_t> indices;

  std::size_t size() const { return indices.size(); }
  std::span<const double> sample(std::size_t i) const { return x.row(i); }
  bool operator==(const UnlabeledDataset&) const = default;
};

struct PartitionSpec {
  std::size_t n_clients = 1;
  double alpha = 1.0;  // Dirichlet concentration, > 0
};

/// Binary Gaussian mixture: y Rademacher, x ~ N(y*u, sigma^2 I). Labels are
/// stored as {0,1} for y in {-1,+1}; u must be a unit vector.
LabeledDataset sample_gmm(const Vec& u, double sigma, std::size_t n, RngStream& rng);

/// Class means drawn from rng, placed on the unit sphere.
std::vector<Vec> blob_means(int n_classes, std::size_t dim, RngStream& rng);

/// Isotropic Gaussian blobs around the given means, std = spread, classes
/// assigned round-robin so counts are balanced to within one.
LabeledDataset make_blobs_around(const std::vector<Vec>& means, double spread, std::size_t n,
                                 RngStream& rng);

LabeledDataset make_blobs(int n_classes, std::size_t dim, double spread, std::size_t n,
                          RngStream& rng);

/// Disjoint split: n_private labeled samples, the rest returned as an
/// unlabeled pool. Both halves keep their original global indices.
std::pair<LabeledDataset, UnlabeledDataset> split_public_private(const LabeledDataset& ds,
                                                                 std::size_t n_private,
                                                                 RngStream& rng);

/// Class-conditional Dirichlet partition: per class, client proportions are
/// drawn from Dir(alpha) and sample counts apportioned by largest remainder.
/// Shards are disjoint and cover ds exactly.
std::vector<LabeledDataset> dirichlet_partition(const LabeledDataset& ds,
                                                const PartitionSpec& spec, RngStream& rng);

UnlabeledDataset drop_labels(const LabeledDataset& ds);

// Text table dump/load: a "fdds 1 ..." header line, then one row per sample.
void save_labeled(const std::string& path, const LabeledDataset& ds);
LabeledDataset load_labeled(const std::string& path);
void save_unlabeled(const std::string& path, const UnlabeledDataset& ds);
UnlabeledDataset load_unlabeled(const std::string& path);

}  // namespace fd
