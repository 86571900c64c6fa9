#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "fd/data.hpp"
#include "fd/model.hpp"

using namespace fd;

namespace {

// Fixed tiny mlp used by the frozen-value tests: d=2, h=2, n_classes=2.
ModelParams tiny_mlp() {
  ModelParams p;
  p.spec = {Arch::mlp, 2, 2, 2};
  Layer l1{Mat(2, 2), Vec{0.15, -0.1}};
  l1.w(0, 0) = 0.5;
  l1.w(0, 1) = -0.3;
  l1.w(1, 0) = 0.1;
  l1.w(1, 1) = 0.2;
  Layer l2{Mat(2, 2), Vec{0.05, -0.05}};
  l2.w(0, 0) = 0.4;
  l2.w(0, 1) = -0.2;
  l2.w(1, 0) = -0.1;
  l2.w(1, 1) = 0.3;
  p.layers = {l1, l2};
  return p;
}

// Central finite differences over every parameter.
Gradient numeric_gradient(const ModelParams& params, const std::function<double(const ModelParams&)>& loss,
                          double step) {
  Gradient g;
  ModelParams probe = params;
  for (const Layer& l : params.layers) g.layers.push_back({Mat(l.w.rows(), l.w.cols()), Vec(l.b.size())});
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const std::size_t nw = params.layers[l].w.rows() * params.layers[l].w.cols();
    for (std::size_t i = 0; i < nw; ++i) {
      const double orig = probe.layers[l].w.data()[i];
      probe.layers[l].w.data()[i] = orig + step;
      const double up = loss(probe);
      probe.layers[l].w.data()[i] = orig - step;
      const double down = loss(probe);
      probe.layers[l].w.data()[i] = orig;
      g.layers[l].w.data()[i] = (up - down) / (2.0 * step);
    }
    for (std::size_t i = 0; i < params.layers[l].b.size(); ++i) {
      const double orig = probe.layers[l].b[i];
      probe.layers[l].b[i] = orig + step;
      const double up = loss(probe);
      probe.layers[l].b[i] = orig - step;
      const double down = loss(probe);
      probe.layers[l].b[i] = orig;
      g.layers[l].b[i] = (up - down) / (2.0 * step);
    }
  }
  return g;
}

double max_relative_error(const Gradient& a, const Gradient& b) {
  double worst = 0.0;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    const std::size_t nw = a.layers[l].w.rows() * a.layers[l].w.cols();
    for (std::size_t i = 0; i < nw; ++i) {
      const double x = a.layers[l].w.data()[i], y = b.layers[l].w.data()[i];
      worst = std::max(worst, std::abs(x - y) / std::max({std::abs(x), std::abs(y), 1e-6}));
    }
    for (std::size_t i = 0; i < a.layers[l].b.size(); ++i) {
      const double x = a.layers[l].b[i], y = b.layers[l].b[i];
      worst = std::max(worst, std::abs(x - y) / std::max({std::abs(x), std::abs(y), 1e-6}));
    }
  }
  return worst;
}

Mat random_batch(std::size_t n, std::size_t dim, RngStream& rng) {
  Mat x(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) x(i, j) = rng.uniform(-2.0, 2.0);
  }
  return x;
}

Mat random_teacher(std::size_t n, std::size_t k, RngStream& rng) {
  Mat t(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      t(i, j) = rng.uniform(0.0, 1.0) + 1e-6;
      sum += t(i, j);
    }
    for (std::size_t j = 0; j < k; ++j) t(i, j) /= sum;
  }
  return t;
}

}  // namespace

TEST_CASE("init_params shapes and determinism") {
  RngStream a(1, "init");
  RngStream b(1, "init");
  const ModelSpec linear{Arch::linear, 4, 0, 3};
  const ModelParams p = init_params(linear, a);
  REQUIRE(p.layers.size() == 1);
  CHECK(p.layers[0].w.rows() == 3);
  CHECK(p.layers[0].w.cols() == 4);
  CHECK(p.layers[0].b.size() == 3);
  for (double v : p.layers[0].b) CHECK(v == 0.0);
  CHECK(p == init_params(linear, b));
  CHECK(p.param_count() == 15);

  RngStream c(2, "init");
  const ModelSpec mlp{Arch::mlp, 8, 16, 4};
  const ModelParams q = init_params(mlp, c);
  REQUIRE(q.layers.size() == 2);
  CHECK(q.layers[0].w.rows() == 16);
  CHECK(q.layers[0].w.cols() == 8);
  CHECK(q.layers[0].b.size() == 16);
  CHECK(q.layers[1].w.rows() == 4);
  CHECK(q.layers[1].w.cols() == 16);
  CHECK(q.layers[1].b.size() == 4);
  CHECK(q.param_count() == 16 * 8 + 16 + 4 * 16 + 4);
}

TEST_CASE("forward_logits: zero params give uniform, huge T smooths") {
  ModelParams p;
  p.spec = {Arch::linear, 3, 0, 4};
  p.layers = {{Mat(4, 3), Vec(4)}};
  const Vec out = forward_logits(p, Vec{0.3, -1.2, 2.0}, 1.0);
  for (double v : out) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));

  RngStream rng(3, "smooth");
  const ModelParams q = init_params({Arch::mlp, 5, 7, 3}, rng);
  Vec x{0.5, -0.2, 1.0, 0.0, -1.4};
  const Vec smooth = forward_logits(q, x, 1e6);
  for (double v : smooth) CHECK(std::abs(v - 1.0 / 3.0) < 1e-5);

  CHECK_THROWS_AS(forward_logits(q, Vec{1.0, 2.0}, 1.0), std::invalid_argument);
}

TEST_CASE("forward_logits matches the frozen hand evaluation") {
  const ModelParams p = tiny_mlp();
  const Vec probs = forward_logits(p, Vec{1.0, 2.0}, 2.0);
  CHECK(probs[0] == doctest::Approx(0.49062609847833927).epsilon(1e-12));
  CHECK(probs[1] == doctest::Approx(0.5093739015216607).epsilon(1e-12));

  // Second probe lands in the all-negative ReLU region.
  const Vec probs2 = forward_logits(p, Vec{-0.5, 0.3}, 1.0);
  CHECK(probs2[0] == doctest::Approx(0.52497918747894).epsilon(1e-12));
  CHECK(probs2[1] == doctest::Approx(0.47502081252106).epsilon(1e-12));
}

TEST_CASE("ce_loss frozen values and edge cases") {
  const ModelParams p = tiny_mlp();
  Mat x(2, 2);
  x(0, 0) = 1.0;
  x(0, 1) = 2.0;
  x(1, 0) = -0.5;
  x(1, 1) = 0.3;
  const std::vector<int> labels{1, 0};
  CHECK(ce_loss(p, x, labels) == doctest::Approx(0.6503734004501831).epsilon(1e-12));

  // All-zero params on k classes cost exactly ln k.
  ModelParams zero;
  zero.spec = {Arch::linear, 2, 0, 5};
  zero.layers = {{Mat(5, 2), Vec(5)}};
  Mat one(1, 2);
  one(0, 0) = 0.7;
  one(0, 1) = -0.1;
  const std::vector<int> y0{3};
  CHECK(ce_loss(zero, one, y0) == doctest::Approx(std::log(5.0)).epsilon(1e-12));

  const std::vector<int> empty;
  CHECK_THROWS_AS(ce_loss(p, Mat(0, 2), empty), std::invalid_argument);
}

TEST_CASE("distill_loss frozen value, entropy floor, one-hot collapse") {
  const ModelParams p = tiny_mlp();
  Mat x(2, 2);
  x(0, 0) = 1.0;
  x(0, 1) = 2.0;
  x(1, 0) = -0.5;
  x(1, 1) = 0.3;
  Mat teacher(2, 2);
  teacher(0, 0) = 0.7;
  teacher(0, 1) = 0.3;
  teacher(1, 0) = 0.2;
  teacher(1, 1) = 0.8;
  CHECK(distill_loss(teacher, p, x, 2.0) == doctest::Approx(0.7046412997622573).epsilon(1e-12));

  // Teacher equal to the student's own output: loss = mean teacher entropy.
  Mat self_teacher(2, 2);
  self_teacher.set_row(0, forward_logits(p, x.row(0), 2.0));
  self_teacher.set_row(1, forward_logits(p, x.row(1), 2.0));
  const double loss = distill_loss(self_teacher, p, x, 2.0);
  const double mean_ent = 0.5 * (entropy(self_teacher.row(0)) + entropy(self_teacher.row(1)));
  CHECK(loss == doctest::Approx(mean_ent).epsilon(1e-12));

  // One-hot teacher reduces to ce_loss against the teacher argmax.
  Mat onehot(2, 2);
  onehot(0, 1) = 1.0;
  onehot(1, 0) = 1.0;
  const std::vector<int> argmaxes{1, 0};
  CHECK(distill_loss(onehot, p, x, 1.0) ==
        doctest::Approx(ce_loss(p, x, argmaxes, 1.0)).epsilon(1e-12));

  Mat misaligned(1, 2);
  misaligned(0, 0) = 1.0;
  CHECK_THROWS_AS(distill_loss(misaligned, p, x, 1.0), std::invalid_argument);
}

TEST_CASE("distill_loss is bounded below by teacher entropy (property)") {
  RngStream rng(5, "floor");
  for (int it = 0; it < 200; ++it) {
    const ModelParams p = init_params({Arch::linear, 3, 0, 4}, rng);
    const Mat x = random_batch(4, 3, rng);
    const Mat t = random_teacher(4, 4, rng);
    double mean_ent = 0.0;
    for (std::size_t i = 0; i < t.rows(); ++i) mean_ent += entropy(t.row(i));
    mean_ent /= static_cast<double>(t.rows());
    CHECK(distill_loss(t, p, x, 1.0) >= mean_ent - 1e-9);
  }
}

TEST_CASE("gradients match central finite differences") {
  // The module's keystone check: both losses, both architectures.
  RngStream rng(6, "fd.check");
  const double step = 1e-5;
  for (int it = 0; it < 20; ++it) {
    const bool use_mlp = it % 2 == 1;
    const std::size_t dim = 3 + rng.uniform_below(3);
    const std::size_t k = 2 + rng.uniform_below(3);
    const ModelSpec spec{use_mlp ? Arch::mlp : Arch::linear, dim, use_mlp ? 4u : 0u, k};
    const ModelParams p = init_params(spec, rng);
    const Mat x = random_batch(8, dim, rng);
    const double temp = it % 3 == 0 ? 2.0 : 1.0;

    std::vector<int> labels(8);
    for (auto& y : labels) y = static_cast<int>(rng.uniform_below(k));
    const Gradient ce = backward_ce(p, x, labels, temp);
    const Gradient ce_num = numeric_gradient(
        p, [&](const ModelParams& q) { return ce_loss(q, x, labels, temp); }, step);
    CHECK(max_relative_error(ce, ce_num) < 1e-4);

    const Mat teacher = random_teacher(8, k, rng);
    const Gradient kd = backward_distill(p, x, teacher, temp);
    const Gradient kd_num = numeric_gradient(
        p, [&](const ModelParams& q) { return distill_loss(teacher, q, x, temp); }, step);
    CHECK(max_relative_error(kd, kd_num) < 1e-4);
  }
}

TEST_CASE("matched student-teacher distillation has zero final-layer bias gradient") {
  const ModelParams p = tiny_mlp();
  Mat x(1, 2);
  x(0, 0) = 1.0;
  x(0, 1) = 2.0;
  Mat teacher(1, 2);
  teacher.set_row(0, forward_logits(p, x.row(0), 1.0));
  const Gradient g = backward_distill(p, x, teacher, 1.0);
  for (double v : g.layers.back().b) CHECK(std::abs(v) < 1e-14);
}

TEST_CASE("duplicating the batch leaves the mean gradient unchanged") {
  RngStream rng(7, "dup");
  const ModelParams p = init_params({Arch::mlp, 4, 5, 3}, rng);
  const Mat x = random_batch(6, 4, rng);
  std::vector<int> labels(6);
  for (auto& y : labels) y = static_cast<int>(rng.uniform_below(3));

  Mat x2(12, 4);
  std::vector<int> labels2(12);
  for (std::size_t i = 0; i < 12; ++i) {
    x2.set_row(i, x.row(i % 6));
    labels2[i] = labels[i % 6];
  }
  const Gradient g1 = backward_ce(p, x, labels);
  const Gradient g2 = backward_ce(p, x2, labels2);
  CHECK(max_relative_error(g1, g2) < 1e-12);
}

TEST_CASE("sgd_epochs: zero lr is the identity, descent reduces loss") {
  RngStream data_rng(8, "sgd.data");
  const LabeledDataset ds = make_blobs(2, 6, 0.4, 200, data_rng);
  RngStream init_rng(8, "sgd.init");
  const ModelParams p0 = init_params({Arch::linear, 6, 0, 2}, init_rng);

  RngStream opt_rng(8, "sgd.opt");
  const ModelParams frozen = sgd_epochs(p0, ds, 3, 0.0, 32, opt_rng);
  CHECK(frozen == p0);

  int improved = 0;
  for (int seed = 0; seed < 5; ++seed) {
    RngStream r(seed, "sgd.desc");
    const ModelParams p1 = sgd_epochs(p0, ds, 1, 0.05, 32, r);
    if (ce_loss(p1, ds.x, ds.labels) < ce_loss(p0, ds.x, ds.labels)) ++improved;
  }
  CHECK(improved == 5);
}

TEST_CASE("sgd_epochs converges on easy blobs") {
  // One-time oracle run on this instance observed 0.7650 test accuracy,
  // close to the nearest-mean reference for radius-1 means at spread 0.5.
  RngStream rng(9, "sgd.conv");
  RngStream means_rng = rng.split("means");
  const std::vector<Vec> means = blob_means(4, 16, means_rng);
  RngStream train_rng = rng.split("train");
  RngStream test_rng = rng.split("test");
  const LabeledDataset train = make_blobs_around(means, 0.5, 800, train_rng);
  const LabeledDataset test = make_blobs_around(means, 0.5, 400, test_rng);

  RngStream init_rng = rng.split("init");
  ModelParams p = init_params({Arch::linear, 16, 0, 4}, init_rng);
  RngStream opt_rng = rng.split("opt");
  p = sgd_epochs(p, train, 40, 0.1, 32, opt_rng);

  std::size_t hits = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const Vec s = raw_scores(p, test.sample(i));
    if (static_cast<int>(argmax(s)) == test.labels[i]) ++hits;
  }
  const double acc = static_cast<double>(hits) / static_cast<double>(test.size());
  CHECK(acc > 0.72);  // regression floor from the oracle run (observed 0.7650)
}

TEST_CASE("blobs at spread 0.9 are learnable past the frozen floor") {
  // Full-batch gradient descent oracle on this instance observed 0.5750,
  // which sits at the nearest-mean reference: radius-1 means at spread 0.9
  // leave roughly 0.55-0.60 attainable for any linear rule.
  RngStream rng(20, "blobs.hard");
  RngStream means_rng = rng.split("means");
  RngStream train_rng = rng.split("train");
  RngStream test_rng = rng.split("test");
  const std::vector<Vec> means = blob_means(4, 16, means_rng);
  const LabeledDataset train = make_blobs_around(means, 0.9, 1000, train_rng);
  const LabeledDataset test = make_blobs_around(means, 0.9, 2000, test_rng);

  RngStream init_rng = rng.split("init");
  ModelParams p = init_params({Arch::linear, 16, 0, 4}, init_rng);
  for (int step = 0; step < 600; ++step) {
    const Gradient g = backward_ce(p, train.x, train.labels);
    axpy_params(p, -0.5, g);
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (static_cast<int>(argmax(raw_scores(p, test.sample(i)))) == test.labels[i]) ++hits;
  }
  const double acc = static_cast<double>(hits) / static_cast<double>(test.size());
  CHECK(acc > 0.55);  // regression floor from the oracle run (observed 0.5750)
}

TEST_CASE("average_params is exact and rejects heterogeneous specs") {
  RngStream rng(11, "avg");
  const ModelSpec spec{Arch::linear, 3, 0, 2};
  const ModelParams a = init_params(spec, rng);
  std::vector<ModelParams> pair{a, a};
  CHECK(average_params(pair) == a);  // bitwise: (x + x) / 2 is exact

  std::vector<ModelParams> same{a, a, a};
  const ModelParams avg3 = average_params(same);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(avg3.layers[0].w.data()[i] ==
          doctest::Approx(a.layers[0].w.data()[i]).epsilon(1e-15));
  }

  const ModelParams b = init_params(spec, rng);
  std::vector<ModelParams> two{a, b};
  const ModelParams mid = average_params(two);
  CHECK(mid.layers[0].w(0, 0) ==
        doctest::Approx(0.5 * (a.layers[0].w(0, 0) + b.layers[0].w(0, 0))).epsilon(1e-15));
  const Vec probe{0.1, -0.4, 0.9};
  CHECK(forward_logits(mid, probe, 1.0).size() == 2);

  const ModelParams other = init_params({Arch::mlp, 3, 2, 2}, rng);
  std::vector<ModelParams> bad{a, other};
  CHECK_THROWS_AS(average_params(bad), std::invalid_argument);
}
