#include "fd/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace fd {

namespace {

LabeledDataset take_rows(const LabeledDataset& ds, const std::vector<std::size_t>& rows) {
  LabeledDataset out;
  out.dim = ds.dim;
  out.n_classes = ds.n_classes;
  out.x = Mat(rows.size(), ds.dim);
  out.labels.reserve(rows.size());
  out.indices.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.x.set_row(i, ds.sample(rows[i]));
    out.labels.push_back(ds.labels[rows[i]]);
    out.indices.push_back(ds.indices[rows[i]]);
  }
  return out;
}

}  // namespace

LabeledDataset sample_gmm(const Vec& u, double sigma, std::size_t n, RngStream& rng) {
  if (std::abs(norm(u) - 1.0) > 1e-9) throw std::invalid_argument("sample_gmm: u must be a unit vector");
  if (!(sigma > 0.0)) throw std::invalid_argument("sample_gmm: sigma must be positive");
  const std::size_t p = u.size();
  LabeledDataset ds;
  ds.dim = p;
  ds.n_classes = 2;
  ds.x = Mat(n, p);
  ds.labels.resize(n);
  ds.indices.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = rng.uniform() < 0.5 ? -1 : 1;
    ds.labels[i] = y > 0 ? 1 : 0;
    ds.indices[i] = static_cast<std::int64_t>(i);
    auto row = ds.x.row(i);
    for (std::size_t j = 0; j < p; ++j) row[j] = y * u[j] + sigma * rng.normal();
  }
  return ds;
}

std::vector<Vec> blob_means(int n_classes, std::size_t dim, RngStream& rng) {
  if (n_classes < 2) throw std::invalid_argument("blob_means: need at least 2 classes");
  if (dim == 0) throw std::invalid_argument("blob_means: dim must be positive");
  std::vector<Vec> means;
  means.reserve(static_cast<std::size_t>(n_classes));
  for (int c = 0; c < n_classes; ++c) {
    Vec m(dim);
    double nrm = 0.0;
    do {
      for (std::size_t j = 0; j < dim; ++j) m[j] = rng.normal();
      nrm = norm(m);
    } while (nrm == 0.0);
    for (std::size_t j = 0; j < dim; ++j) m[j] /= nrm;
    means.push_back(std::move(m));
  }
  return means;
}

LabeledDataset make_blobs_around(const std::vector<Vec>& means, double spread, std::size_t n,
                                 RngStream& rng) {
  if (means.size() < 2) throw std::invalid_argument("make_blobs: need at least 2 classes");
  if (!(spread > 0.0)) throw std::invalid_argument("make_blobs: spread must be positive");
  if (n < means.size()) throw std::invalid_argument("make_blobs: fewer samples than classes");
  const std::size_t dim = means[0].size();
  LabeledDataset ds;
  ds.dim = dim;
  ds.n_classes = static_cast<int>(means.size());
  ds.x = Mat(n, dim);
  ds.labels.resize(n);
  ds.indices.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % means.size());
    ds.labels[i] = c;
    ds.indices[i] = static_cast<std::int64_t>(i);
    auto row = ds.x.row(i);
    const Vec& m = means[static_cast<std::size_t>(c)];
    for (std::size_t j = 0; j < dim; ++j) row[j] = m[j] + spread * rng.normal();
  }
  return ds;
}

LabeledDataset make_blobs(int n_classes, std::size_t dim, double spread, std::size_t n,
                          RngStream& rng) {
  return make_blobs_around(blob_means(n_classes, dim, rng), spread, n, rng);
}

std::pair<LabeledDataset, UnlabeledDataset> split_public_private(const LabeledDataset& ds,
                                                                 std::size_t n_private,
                                                                 RngStream& rng) {
  if (n_private >= ds.size()) throw std::invalid_argument("split_public_private: n_private must leave a nonempty public pool");
  std::vector<std::size_t> perm(ds.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.shuffle(perm);
  std::vector<std::size_t> priv(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_private));
  std::vector<std::size_t> pub(perm.begin() + static_cast<std::ptrdiff_t>(n_private), perm.end());
  std::sort(priv.begin(), priv.end());
  std::sort(pub.begin(), pub.end());

  LabeledDataset private_ds = take_rows(ds, priv);
  UnlabeledDataset pool;
  pool.dim = ds.dim;
  pool.x = Mat(pub.size(), ds.dim);
  pool.indices.reserve(pub.size());
  for (std::size_t i = 0; i < pub.size(); ++i) {
    pool.x.set_row(i, ds.sample(pub[i]));
    pool.indices.push_back(ds.indices[pub[i]]);
  }
  return {std::move(private_ds), std::move(pool)};
}

std::vector<LabeledDataset> dirichlet_partition(const LabeledDataset& ds,
                                                const PartitionSpec& spec, RngStream& rng) {
  if (spec.n_clients == 0) throw std::invalid_argument("dirichlet_partition: need at least one client");
  if (!(spec.alpha > 0.0)) throw std::invalid_argument("dirichlet_partition: alpha must be positive");

  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.n_classes));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
  }
  for (int c = 0; c < ds.n_classes; ++c) {
    if (by_class[static_cast<std::size_t>(c)].empty()) {
      throw std::invalid_argument("dirichlet_partition: class " + std::to_string(c) + " has no samples");
    }
  }

  std::vector<std::vector<std::size_t>> shards(spec.n_clients);
  for (int c = 0; c < ds.n_classes; ++c) {
    auto& rows = by_class[static_cast<std::size_t>(c)];
    rng.shuffle(rows);
    const std::vector<double> w = rng.dirichlet(spec.alpha, spec.n_clients);
    const std::vector<std::size_t> counts = largest_remainder_apportion(w, rows.size());
    std::size_t offset = 0;
    for (std::size_t k = 0; k < spec.n_clients; ++k) {
      for (std::size_t j = 0; j < counts[k]; ++j) shards[k].push_back(rows[offset + j]);
      offset += counts[k];
    }
  }

  std::vector<LabeledDataset> out;
  out.reserve(spec.n_clients);
  for (auto& shard : shards) {
    std::sort(shard.begin(), shard.end());
    out.push_back(take_rows(ds, shard));
  }
  return out;
}

UnlabeledDataset drop_labels(const LabeledDataset& ds) {
  UnlabeledDataset pool;
  pool.dim = ds.dim;
  pool.x = ds.x;
  pool.indices = ds.indices;
  return pool;
}

namespace {

constexpr const char* kMagic = "fdds";
constexpr int kFormatVersion = 1;

void write_row(std::ostream& os, std::span<const double> row) {
  for (double v : row) os << ' ' << format_double(v);
  os << '\n';
}

std::runtime_error bad_file(const std::string& path, const std::string& why) {
  return std::runtime_error("dataset file " + path + ": " + why);
}

}  // namespace

void save_labeled(const std::string& path, const LabeledDataset& ds) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << kMagic << ' ' << kFormatVersion << " labeled " << ds.size() << ' ' << ds.dim << ' '
     << ds.n_classes << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    os << ds.indices[i] << ' ' << ds.labels[i];
    write_row(os, ds.sample(i));
  }
}

LabeledDataset load_labeled(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::string magic, kind;
  int version = 0;
  std::size_t n = 0, dim = 0;
  int n_classes = 0;
  is >> magic >> version >> kind >> n >> dim >> n_classes;
  if (!is || magic != kMagic || version != kFormatVersion || kind != "labeled") {
    throw bad_file(path, "bad header");
  }
  LabeledDataset ds;
  ds.dim = dim;
  ds.n_classes = n_classes;
  ds.x = Mat(n, dim);
  ds.labels.resize(n);
  ds.indices.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    is >> ds.indices[i] >> ds.labels[i];
    auto row = ds.x.row(i);
    for (std::size_t j = 0; j < dim; ++j) is >> row[j];
  }
  if (!is) throw bad_file(path, "truncated body");
  return ds;
}

void save_unlabeled(const std::string& path, const UnlabeledDataset& ds) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << kMagic << ' ' << kFormatVersion << " unlabeled " << ds.size() << ' ' << ds.dim << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    os << ds.indices[i];
    write_row(os, ds.sample(i));
  }
}

UnlabeledDataset load_unlabeled(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::string magic, kind;
  int version = 0;
  std::size_t n = 0, dim = 0;
  is >> magic >> version >> kind >> n >> dim;
  if (!is || magic != kMagic || version != kFormatVersion || kind != "unlabeled") {
    throw bad_file(path, "bad header");
  }
  UnlabeledDataset ds;
  ds.dim = dim;
  ds.x = Mat(n, dim);
  ds.indices.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    is >> ds.indices[i];
    auto row = ds.x.row(i);
    for (std::size_t j = 0; j < dim; ++j) is >> row[j];
  }
  if (!is) throw bad_file(path, "truncated body");
  return ds;
}

}  // namespace fd
