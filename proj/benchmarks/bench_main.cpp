#include <benchmark/benchmark.h>

#include "fd/data.hpp"
#include "fd/engine.hpp"
#include "fd/model.hpp"
#include "fd/numerics.hpp"
#include "fd/protocol.hpp"
#include "fd/sampling.hpp"
#include "fd/theory.hpp"

namespace {

fd::Vec random_scores(std::size_t n, std::uint64_t seed) {
  fd::RngStream rng(seed, "bench.scores");
  fd::Vec z(n);
  for (auto& v : z) v = rng.normal();
  return z;
}

void BM_Softmax(benchmark::State& state) {
  const fd::Vec z = random_scores(static_cast<std::size_t>(state.range(0)), 7);
  for (auto _ : state) {
    fd::Vec p = fd::softmax(z, 1.0);
    benchmark::DoNotOptimize(p);
  }
}
BENCHMARK(BM_Softmax)->Arg(10)->Arg(100);

void BM_Entropy(benchmark::State& state) {
  const fd::Vec p = fd::softmax(random_scores(static_cast<std::size_t>(state.range(0)), 8), 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fd::entropy(p));
  }
}
BENCHMARK(BM_Entropy)->Arg(10)->Arg(100);

void BM_NormalDraws(benchmark::State& state) {
  fd::RngStream rng(9, "bench.normal");
  for (auto _ : state) {
    double acc = 0.0;
    for (int i = 0; i < 1000; ++i) acc += rng.normal();
    benchmark::DoNotOptimize(acc);
  }
}
BENCHMARK(BM_NormalDraws);

void BM_SgdEpoch(benchmark::State& state) {
  fd::RngStream data_rng(10, "bench.sgd.data");
  const fd::LabeledDataset ds = fd::make_blobs(4, 16, 0.9, 512, data_rng);
  const bool mlp = state.range(0) == 1;
  fd::RngStream init_rng(10, "bench.sgd.init");
  const fd::ModelParams params =
      fd::init_params({mlp ? fd::Arch::mlp : fd::Arch::linear, 16, mlp ? 24u : 0u, 4}, init_rng);
  std::uint64_t round = 0;
  for (auto _ : state) {
    fd::RngStream opt(round++, "bench.sgd.opt");
    fd::ModelParams out = fd::sgd_epochs(params, ds, 1, 0.1, 32, opt);
    benchmark::DoNotOptimize(out);
  }
}
BENCHMARK(BM_SgdEpoch)->Arg(0)->Arg(1);

void BM_AggregateReports(benchmark::State& state) {
  fd::RngStream rng(11, "bench.agg");
  std::vector<fd::LogitReport> reports;
  for (int c = 0; c < 8; ++c) {
    fd::LogitReport r;
    r.client_id = c;
    const auto rows = rng.sample_without_replacement(2000, 400);
    for (auto v : rows) r.indices.push_back(static_cast<std::int64_t>(v));
    r.rows = fd::Mat(400, 10);
    for (std::size_t i = 0; i < 400; ++i) {
      r.rows.set_row(i, fd::softmax(random_scores(10, 1000 + i), 1.0));
    }
    reports.push_back(std::move(r));
  }
  for (auto _ : state) {
    fd::AggregatedTeacher t = fd::aggregate_average(reports);
    benchmark::DoNotOptimize(t);
  }
}
BENCHMARK(BM_AggregateReports);

void BM_EraSharpen(benchmark::State& state) {
  fd::RngStream rng(12, "bench.era");
  fd::LogitReport r;
  r.client_id = 0;
  for (int i = 0; i < 1000; ++i) r.indices.push_back(i);
  r.rows = fd::Mat(1000, 10);
  for (std::size_t i = 0; i < 1000; ++i) {
    r.rows.set_row(i, fd::softmax(random_scores(10, 2000 + i), 1.0));
  }
  std::vector<fd::LogitReport> reports{r};
  const fd::AggregatedTeacher t = fd::aggregate_average(reports);
  for (auto _ : state) {
    fd::AggregatedTeacher sharp = fd::era_sharpen(t, 0.5);
    benchmark::DoNotOptimize(sharp);
  }
}
BENCHMARK(BM_EraSharpen);

void BM_SelectMixed(benchmark::State& state) {
  fd::RngStream rng(13, "bench.mixed");
  fd::RngStream means_rng = rng.split("means");
  const auto means = fd::blob_means(4, 16, means_rng);
  fd::RngStream pool_rng = rng.split("pool");
  const fd::UnlabeledDataset pool =
      fd::drop_labels(fd::make_blobs_around(means, 0.9, 2000, pool_rng));
  fd::RngStream train_rng = rng.split("train");
  const fd::LabeledDataset train = fd::make_blobs_around(means, 0.9, 512, train_rng);
  fd::RngStream init_rng = rng.split("init");
  fd::ModelParams m = fd::init_params({fd::Arch::linear, 16, 0, 4}, init_rng);
  fd::RngStream opt_rng = rng.split("opt");
  m = fd::sgd_epochs(m, train, 2, 0.1, 32, opt_rng);
  const fd::LocalLabelHistogram hist{{0.4, 0.3, 0.2, 0.1}};
  std::uint64_t it = 0;
  for (auto _ : state) {
    fd::RngStream sel(it++, "bench.mixed.sel");
    auto picks = fd::select_mixed(pool, m, hist, sel, 400);
    benchmark::DoNotOptimize(picks);
  }
}
BENCHMARK(BM_SelectMixed);

void BM_SelfTrainTrial(benchmark::State& state) {
  const fd::TheoremParams tp{0.6, 1.0, 0.0, 1.0};
  const auto p = static_cast<std::size_t>(state.range(0));
  std::uint64_t it = 0;
  for (auto _ : state) {
    fd::RngStream rng(it++, "bench.mc");
    fd::McResult r = fd::monte_carlo_cot(tp, p, 10, rng, 1);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_SelfTrainTrial)->Arg(200)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_FdRound(benchmark::State& state) {
  fd::ExperimentConfig cfg;
  cfg.rounds = 1;
  cfg.n_clients = 20;
  cfg.clients_per_round = 8;
  cfg.data = {4, 16, 0.9, 4000, 2000, 2000, "split", 0.0};
  cfg.sampling = {"none", 400};
  cfg.training = {2, 0.1, 32, 2, 0.25, 64, 1.0};
  for (auto _ : state) {
    fd::RunResult r = fd::run_fd(cfg);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_FdRound)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
