#include "fd/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace fd {

namespace {

// Clamp for logs, same spirit as the usual max(p, tiny) in CE kernels.
constexpr double kTiny = std::numeric_limits<double>::min();

void check_spec(const ModelSpec& spec) {
  if (spec.input_dim < 1 || spec.n_classes < 2) throw std::invalid_argument("model: need input_dim >= 1 and n_classes >= 2");
  if (spec.arch == Arch::mlp && spec.hidden < 1) throw std::invalid_argument("model: mlp needs hidden >= 1");
}

Gradient zero_like(const ModelParams& params) {
  Gradient g;
  g.layers.reserve(params.layers.size());
  for (const Layer& l : params.layers) {
    g.layers.push_back({Mat(l.w.rows(), l.w.cols()), Vec(l.b.size())});
  }
  return g;
}

// Per-sample forward pass keeping the hidden activation for backprop.
struct ForwardState {
  Vec hidden_pre;  // empty for linear
  Vec hidden;      // empty for linear
  Vec scores;
};

ForwardState forward(const ModelParams& params, std::span<const double> x) {
  if (x.size() != params.spec.input_dim) throw std::invalid_argument("model: input dimension mismatch");
  ForwardState st;
  if (params.spec.arch == Arch::linear) {
    const Layer& l = params.layers[0];
    Vec s(params.spec.n_classes);
    for (std::size_t r = 0; r < l.w.rows(); ++r) s[r] = dot(l.w.row(r), x) + l.b[r];
    st.scores = std::move(s);
    return st;
  }
  const Layer& l1 = params.layers[0];
  const Layer& l2 = params.layers[1];
  Vec hp(params.spec.hidden), h(params.spec.hidden);
  for (std::size_t r = 0; r < l1.w.rows(); ++r) {
    hp[r] = dot(l1.w.row(r), x) + l1.b[r];
    h[r] = hp[r] > 0.0 ? hp[r] : 0.0;
  }
  Vec s(params.spec.n_classes);
  for (std::size_t r = 0; r < l2.w.rows(); ++r) s[r] = dot(l2.w.row(r), h) + l2.b[r];
  st.hidden_pre = std::move(hp);
  st.hidden = std::move(h);
  st.scores = std::move(s);
  return st;
}

// Accumulates dL/dscores back through the network into g.
void backprop_sample(const ModelParams& params, std::span<const double> x,
                     const ForwardState& st, const Vec& dscores, Gradient& g) {
  if (params.spec.arch == Arch::linear) {
    Layer& gl = g.layers[0];
    for (std::size_t r = 0; r < gl.w.rows(); ++r) {
      auto wrow = gl.w.row(r);
      for (std::size_t c = 0; c < wrow.size(); ++c) wrow[c] += dscores[r] * x[c];
      gl.b[r] += dscores[r];
    }
    return;
  }
  const Layer& l2 = params.layers[1];
  Layer& g2 = g.layers[1];
  Layer& g1 = g.layers[0];
  Vec dh(params.spec.hidden);
  for (std::size_t r = 0; r < g2.w.rows(); ++r) {
    auto wrow = g2.w.row(r);
    for (std::size_t c = 0; c < wrow.size(); ++c) {
      wrow[c] += dscores[r] * st.hidden[c];
      dh[c] += dscores[r] * l2.w(r, c);
    }
    g2.b[r] += dscores[r];
  }
  for (std::size_t r = 0; r < g1.w.rows(); ++r) {
    if (st.hidden_pre[r] <= 0.0) continue;
    auto wrow = g1.w.row(r);
    for (std::size_t c = 0; c < wrow.size(); ++c) wrow[c] += dh[r] * x[c];
    g1.b[r] += dh[r];
  }
}

void check_ce_batch(const ModelParams& params, const Mat& x, std::span<const int> labels) {
  if (x.rows() == 0) throw std::invalid_argument("model: empty batch");
  if (x.rows() != labels.size()) throw std::invalid_argument("model: batch/label length mismatch");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= params.spec.n_classes) {
      throw std::invalid_argument("model: label out of range");
    }
  }
}

void check_distill_batch(const Mat& teacher, const ModelParams& params, const Mat& x) {
  if (x.rows() == 0) throw std::invalid_argument("model: empty batch");
  if (teacher.rows() != x.rows() || teacher.cols() != params.spec.n_classes) {
    throw std::invalid_argument("model: teacher rows misaligned with batch");
  }
}

}  // namespace

std::size_t ModelParams::param_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers) n += l.w.rows() * l.w.cols() + l.b.size();
  return n;
}

ModelParams init_params(const ModelSpec& spec, RngStream& rng) {
  check_spec(spec);
  auto make_layer = [&rng](std::size_t out, std::size_t in) {
    Layer l{Mat(out, in), Vec(out)};
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    for (std::size_t r = 0; r < out; ++r) {
      auto row = l.w.row(r);
      for (std::size_t c = 0; c < in; ++c) row[c] = scale * rng.normal();
    }
    return l;
  };
  ModelParams p;
  p.spec = spec;
  if (spec.arch == Arch::linear) {
    p.layers.push_back(make_layer(spec.n_classes, spec.input_dim));
  } else {
    p.layers.push_back(make_layer(spec.hidden, spec.input_dim));
    p.layers.push_back(make_layer(spec.n_classes, spec.hidden));
  }
  return p;
}

Vec raw_scores(const ModelParams& params, std::span<const double> x) {
  return forward(params, x).scores;
}

Vec forward_logits(const ModelParams& params, std::span<const double> x, double temperature) {
  return softmax(raw_scores(params, x), temperature);
}

double ce_loss(const ModelParams& params, const Mat& x, std::span<const int> labels,
               double temperature) {
  check_ce_batch(params, x, labels);
  double loss = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const Vec p = forward_logits(params, x.row(i), temperature);
    loss -= std::log(std::max(p[static_cast<std::size_t>(labels[i])], kTiny));
  }
  return loss / static_cast<double>(x.rows());
}

double distill_loss(const Mat& teacher, const ModelParams& student, const Mat& x,
                    double temperature) {
  check_distill_batch(teacher, student, x);
  double loss = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const Vec p = forward_logits(student, x.row(i), temperature);
    auto t = teacher.row(i);
    for (std::size_t n = 0; n < p.size(); ++n) {
      if (t[n] > 0.0) loss -= t[n] * std::log(std::max(p[n], kTiny));
    }
  }
  return loss / static_cast<double>(x.rows());
}

Gradient backward_ce(const ModelParams& params, const Mat& x, std::span<const int> labels,
                     double temperature) {
  check_ce_batch(params, x, labels);
  Gradient g = zero_like(params);
  const double inv = 1.0 / (static_cast<double>(x.rows()) * temperature);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const ForwardState st = forward(params, x.row(i));
    Vec d = softmax(st.scores, temperature);
    d[static_cast<std::size_t>(labels[i])] -= 1.0;
    for (double& v : d) v *= inv;
    backprop_sample(params, x.row(i), st, d, g);
  }
  return g;
}

Gradient backward_distill(const ModelParams& params, const Mat& x, const Mat& teacher,
                          double temperature) {
  check_distill_batch(teacher, params, x);
  Gradient g = zero_like(params);
  const double inv = 1.0 / (static_cast<double>(x.rows()) * temperature);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const ForwardState st = forward(params, x.row(i));
    Vec d = softmax(st.scores, temperature);
    auto t = teacher.row(i);
    for (std::size_t n = 0; n < d.size(); ++n) d[n] = (d[n] - t[n]) * inv;
    backprop_sample(params, x.row(i), st, d, g);
  }
  return g;
}

void axpy_params(ModelParams& params, double a, const Gradient& g) {
  if (g.layers.size() != params.layers.size()) throw std::invalid_argument("axpy_params: layer count mismatch");
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    Layer& pl = params.layers[l];
    const Layer& gl = g.layers[l];
    if (pl.w.rows() != gl.w.rows() || pl.w.cols() != gl.w.cols()) {
      throw std::invalid_argument("axpy_params: shape mismatch");
    }
    double* w = pl.w.data();
    const double* gw = gl.w.data();
    for (std::size_t i = 0; i < pl.w.rows() * pl.w.cols(); ++i) w[i] += a * gw[i];
    for (std::size_t i = 0; i < pl.b.size(); ++i) pl.b[i] += a * gl.b[i];
  }
}

ModelParams average_params(std::span<const ModelParams> ps) {
  if (ps.empty()) throw std::invalid_argument("average_params: empty input");
  for (const ModelParams& p : ps) {
    if (!(p.spec == ps[0].spec)) throw std::invalid_argument("average_params: heterogeneous specs");
  }
  ModelParams out = ps[0];
  const double w = 1.0 / static_cast<double>(ps.size());
  for (std::size_t l = 0; l < out.layers.size(); ++l) {
    Layer& ol = out.layers[l];
    const std::size_t nw = ol.w.rows() * ol.w.cols();
    for (std::size_t i = 0; i < nw; ++i) {
      double s = 0.0;
      for (const ModelParams& p : ps) s += p.layers[l].w.data()[i];
      ol.w.data()[i] = s * w;
    }
    for (std::size_t i = 0; i < ol.b.size(); ++i) {
      double s = 0.0;
      for (const ModelParams& p : ps) s += p.layers[l].b[i];
      ol.b[i] = s * w;
    }
  }
  return out;
}

namespace {

template <typename StepFn>
ModelParams sgd_loop(const ModelParams& params, std::size_t n, std::size_t epochs, double lr,
                     std::size_t batch_size, RngStream& rng, StepFn step) {
  if (lr < 0.0) throw std::invalid_argument("sgd_epochs: negative learning rate");
  if (batch_size == 0) throw std::invalid_argument("sgd_epochs: batch_size must be positive");
  if (n == 0) throw std::invalid_argument("sgd_epochs: empty dataset");
  ModelParams out = params;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t e = 0; e < epochs; ++e) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t stop = std::min(start + batch_size, n);
      step(out, std::span<const std::size_t>(order.data() + start, stop - start), lr);
    }
  }
  return out;
}

}  // namespace

ModelParams sgd_epochs(const ModelParams& params, const LabeledDataset& ds, std::size_t epochs,
                       double lr, std::size_t batch_size, RngStream& rng) {
  return sgd_loop(params, ds.size(), epochs, lr, batch_size, rng,
                  [&ds](ModelParams& p, std::span<const std::size_t> rows, double step_lr) {
                    Mat bx(rows.size(), ds.dim);
                    std::vector<int> by(rows.size());
                    for (std::size_t i = 0; i < rows.size(); ++i) {
                      bx.set_row(i, ds.sample(rows[i]));
                      by[i] = ds.labels[rows[i]];
                    }
                    const Gradient g = backward_ce(p, bx, by);
                    axpy_params(p, -step_lr, g);
                  });
}

ModelParams sgd_epochs(const ModelParams& params, const Mat& x, const Mat& teacher,
                       double temperature, std::size_t epochs, double lr, std::size_t batch_size,
                       RngStream& rng) {
  if (teacher.rows() != x.rows()) throw std::invalid_argument("sgd_epochs: teacher rows misaligned with inputs");
  return sgd_loop(params, x.rows(), epochs, lr, batch_size, rng,
                  [&x, &teacher, temperature](ModelParams& p, std::span<const std::size_t> rows,
                                              double step_lr) {
                    Mat bx(rows.size(), x.cols());
                    Mat bt(rows.size(), teacher.cols());
                    for (std::size_t i = 0; i < rows.size(); ++i) {
                      bx.set_row(i, x.row(rows[i]));
                      bt.set_row(i, teacher.row(rows[i]));
                    }
                    const Gradient g = backward_distill(p, bx, bt, temperature);
                    axpy_params(p, -step_lr, g);
                  });
}

}  // namespace fd
