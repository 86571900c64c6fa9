#include "fd/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "fd/errors.hpp"

namespace fd {

namespace {

const char* const kStrategies = "none, random, low_entropy, mixed";

}  // namespace

Strategy parse_strategy(const std::string& name) {
  if (name == "none") return Strategy::none;
  if (name == "random") return Strategy::random;
  if (name == "low_entropy") return Strategy::low_entropy;
  if (name == "mixed") return Strategy::mixed;
  throw ConfigError("unknown sampling strategy '" + name + "' (allowed: " + kStrategies + ")");
}

ModelSpec resolve_model_spec(const ModelSpecConfig& mc, const DataConfig& dc) {
  ModelSpec spec;
  if (mc.arch == "linear") {
    spec.arch = Arch::linear;
  } else if (mc.arch == "mlp") {
    spec.arch = Arch::mlp;
  } else {
    throw ConfigError("unknown model arch '" + mc.arch + "' (allowed: linear, mlp)");
  }
  spec.input_dim = dc.dim;
  spec.hidden = mc.hidden;
  spec.n_classes = static_cast<std::size_t>(dc.n_classes);
  if (spec.arch == Arch::mlp && spec.hidden == 0) throw ConfigError("mlp model needs hidden > 0");
  return spec;
}

std::vector<ModelSpec> resolve_client_specs(const ExperimentConfig& cfg) {
  std::vector<ModelSpecConfig> mcs = cfg.client_models;
  if (mcs.empty()) mcs.push_back(cfg.server_model);
  if (mcs.size() == 1) mcs.assign(cfg.n_clients, mcs[0]);
  if (mcs.size() != cfg.n_clients) {
    throw ConfigError("client_models must have 1 or n_clients entries");
  }
  std::vector<ModelSpec> specs;
  specs.reserve(mcs.size());
  for (const ModelSpecConfig& mc : mcs) specs.push_back(resolve_model_spec(mc, cfg.data));
  return specs;
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.algorithm != "fd" && cfg.algorithm != "fedavg") {
    throw ConfigError("unknown algorithm '" + cfg.algorithm + "' (allowed: fd, fedavg)");
  }
  if (cfg.n_clients == 0) throw ConfigError("n_clients must be positive");
  if (cfg.clients_per_round == 0 || cfg.clients_per_round > cfg.n_clients) {
    throw ConfigError("clients_per_round must be in [1, n_clients]");
  }
  if (!(cfg.alpha > 0.0)) throw ConfigError("partition alpha must be positive");
  if (cfg.data.n_classes < 2) throw ConfigError("data.n_classes must be >= 2");
  if (cfg.data.dim == 0) throw ConfigError("data.dim must be positive");
  if (!(cfg.data.spread > 0.0)) throw ConfigError("data.spread must be positive");
  if (cfg.data.n_private == 0 || cfg.data.n_public == 0 || cfg.data.n_test == 0) {
    throw ConfigError("data pool sizes must be positive");
  }
  if (cfg.data.public_source != "split" && cfg.data.public_source != "fresh" &&
      cfg.data.public_source != "mirror_private") {
    throw ConfigError("unknown data.public_source '" + cfg.data.public_source +
                      "' (allowed: split, fresh, mirror_private)");
  }
  if (cfg.data.public_source == "fresh" && !(cfg.data.public_spread > 0.0)) {
    throw ConfigError("data.public_spread must be positive when public_source is fresh");
  }
  if (cfg.aggregation.method != "average" && cfg.aggregation.method != "era") {
    throw ConfigError("unknown aggregation method '" + cfg.aggregation.method +
                      "' (allowed: average, era)");
  }
  if (cfg.aggregation.method == "era" &&
      (!(cfg.aggregation.t_era > 0.0) || cfg.aggregation.t_era > 1.0)) {
    throw ConfigError("aggregation.t_era must be in (0, 1]");
  }
  const Strategy strategy = parse_strategy(cfg.sampling.strategy);
  const std::size_t pool_size =
      cfg.data.public_source == "mirror_private" ? cfg.data.n_private : cfg.data.n_public;
  if (cfg.sampling.n_logit == 0 || cfg.sampling.n_logit > pool_size) {
    throw ConfigError("sampling.n_logit must be in [1, public pool size]");
  }
  if (strategy == Strategy::mixed &&
      (cfg.sampling.n_logit < 2 || cfg.sampling.n_logit % 2 != 0)) {
    throw ConfigError("sampling.n_logit must be even and >= 2 for the mixed strategy");
  }
  if (!(cfg.training.upload_temperature > 0.0)) throw ConfigError("training.upload_temperature must be positive");
  if (cfg.training.local_batch == 0 || cfg.training.distill_batch == 0) {
    throw ConfigError("batch sizes must be positive");
  }
  if (cfg.training.local_lr < 0.0 || cfg.training.distill_lr < 0.0) {
    throw ConfigError("learning rates must be nonnegative");
  }

  const std::vector<ModelSpec> specs = resolve_client_specs(cfg);
  const ModelSpec server = resolve_model_spec(cfg.server_model, cfg.data);
  if (cfg.algorithm == "fedavg") {
    for (const ModelSpec& s : specs) {
      if (!(s == server)) throw ConfigError("fedavg requires homogeneous client and server models");
    }
  }
}

RngStream experiment_root(const ExperimentConfig& cfg) { return {cfg.seed, "experiment"}; }

RngStream round_stream(const RngStream& root, std::size_t round, const std::string& purpose) {
  return root.split("round." + std::to_string(round) + "." + purpose);
}

RngStream client_stream(const RngStream& root, std::size_t round, int client,
                        const std::string& purpose) {
  return root.split("round." + std::to_string(round) + ".client." + std::to_string(client) + "." +
                    purpose);
}

ExperimentData prepare_data(const ExperimentConfig& cfg, const RngStream& root) {
  const DataConfig& dc = cfg.data;
  RngStream means_rng = root.split("data.means");
  const std::vector<Vec> means = blob_means(dc.n_classes, dc.dim, means_rng);

  ExperimentData out;
  LabeledDataset private_ds;
  if (dc.public_source == "split") {
    RngStream master_rng = root.split("data.master");
    LabeledDataset master =
        make_blobs_around(means, dc.spread, dc.n_private + dc.n_public, master_rng);
    RngStream split_rng = root.split("data.split");
    auto [priv, pool] = split_public_private(master, dc.n_private, split_rng);
    private_ds = std::move(priv);
    out.pool = std::move(pool);
  } else {
    RngStream master_rng = root.split("data.master");
    private_ds = make_blobs_around(means, dc.spread, dc.n_private, master_rng);
    if (dc.public_source == "mirror_private") {
      out.pool = drop_labels(private_ds);
    } else {  // fresh
      RngStream pub_rng = root.split("data.public");
      LabeledDataset pub = make_blobs_around(means, dc.public_spread, dc.n_public, pub_rng);
      // Shift indices past the private range so they stay universal.
      for (std::int64_t& idx : pub.indices) idx += static_cast<std::int64_t>(dc.n_private);
      out.pool = drop_labels(pub);
    }
  }

  RngStream test_rng = root.split("data.test");
  out.test = make_blobs_around(means, dc.spread, dc.n_test, test_rng);

  RngStream part_rng = root.split("data.partition");
  out.shards = dirichlet_partition(private_ds, {cfg.n_clients, cfg.alpha}, part_rng);
  out.hists.reserve(out.shards.size());
  for (const LabeledDataset& shard : out.shards) {
    if (shard.size() == 0) {
      out.hists.push_back({});
    } else {
      out.hists.push_back(LocalLabelHistogram::from_dataset(shard));
    }
  }
  return out;
}

std::vector<int> select_clients(std::span<const int> eligible, std::size_t per_round,
                                RngStream& rng) {
  if (eligible.empty()) throw std::invalid_argument("select_clients: no eligible clients");
  if (per_round >= eligible.size()) return {eligible.begin(), eligible.end()};
  const std::vector<std::size_t> rows =
      rng.sample_without_replacement(eligible.size(), per_round);
  std::vector<int> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(eligible[r]);
  std::sort(out.begin(), out.end());
  return out;
}

double evaluate(const ModelParams& params, const LabeledDataset& test) {
  if (test.size() == 0) throw std::invalid_argument("evaluate: empty test set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const Vec s = raw_scores(params, test.sample(i));
    if (static_cast<int>(argmax(s)) == test.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(test.size());
}

namespace {

struct Context {
  ExperimentConfig cfg;
  RngStream root;
  ExperimentData data;
  ModelSpec server_spec;
  std::vector<ModelSpec> client_specs;
  std::vector<int> eligible;
};

Context make_context(const ExperimentConfig& cfg) {
  validate(cfg);
  Context ctx{cfg, experiment_root(cfg), {}, {}, {}, {}};
  ctx.data = prepare_data(cfg, ctx.root);
  ctx.server_spec = resolve_model_spec(cfg.server_model, cfg.data);
  ctx.client_specs = resolve_client_specs(cfg);
  for (std::size_t i = 0; i < cfg.n_clients; ++i) {
    if (ctx.data.shards[i].size() > 0) ctx.eligible.push_back(static_cast<int>(i));
  }
  if (ctx.eligible.empty()) throw ConfigError("partition left every client without data");
  return ctx;
}

std::vector<ModelParams> init_clients(const Context& ctx) {
  std::vector<ModelParams> params;
  params.reserve(ctx.cfg.n_clients);
  for (std::size_t i = 0; i < ctx.cfg.n_clients; ++i) {
    RngStream rng = ctx.root.split("init.client." + std::to_string(i));
    params.push_back(init_params(ctx.client_specs[i], rng));
  }
  return params;
}

double mean_client_accuracy(const std::vector<ModelParams>& clients, const LabeledDataset& test) {
  double sum = 0.0;
  for (const ModelParams& p : clients) sum += evaluate(p, test);
  return sum / static_cast<double>(clients.size());
}

Mat gather_pool_rows(const UnlabeledDataset& pool, std::span<const std::int64_t> indices) {
  // Pool indices are sorted; map global index -> row once.
  Mat out(indices.size(), pool.dim);
  std::size_t row = 0;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto it = std::lower_bound(pool.indices.begin(), pool.indices.end(), indices[i]);
    if (it == pool.indices.end() || *it != indices[i]) {
      throw std::invalid_argument("engine: index not present in the public pool");
    }
    out.set_row(row++, pool.sample(static_cast<std::size_t>(it - pool.indices.begin())));
  }
  return out;
}

}  // namespace

RunResult run_fd(const ExperimentConfig& cfg, const RoundCallback& on_round) {
  Context ctx = make_context(cfg);
  const Strategy strategy = parse_strategy(cfg.sampling.strategy);
  const double upload_t = cfg.training.upload_temperature;

  RngStream server_init = ctx.root.split("init.server");
  ModelParams server = init_params(ctx.server_spec, server_init);
  std::vector<ModelParams> clients = init_clients(ctx);

  RunResult result;
  for (std::size_t round = 0; round < cfg.rounds; ++round) {
    RngStream clients_rng = round_stream(ctx.root, round, "clients");
    const std::vector<int> selected =
        select_clients(ctx.eligible, cfg.clients_per_round, clients_rng);

    std::vector<std::int64_t> shared_subset;
    if (strategy == Strategy::none) {
      RngStream subset_rng = round_stream(ctx.root, round, "subset");
      shared_subset = select_none(ctx.data.pool, subset_rng, cfg.sampling.n_logit);
    }

    std::vector<LogitReport> reports;
    std::vector<std::pair<int, std::int64_t>> downlinks;
    reports.reserve(selected.size());
    for (int id : selected) {
      const auto i = static_cast<std::size_t>(id);
      // Model download: only clients whose architecture matches the server's
      // can start from the distilled weights; the rest continue training
      // their own parameters.
      ModelParams start = ctx.client_specs[i] == ctx.server_spec ? server : clients[i];
      downlinks.emplace_back(id, ctx.client_specs[i] == ctx.server_spec
                                     ? static_cast<std::int64_t>(server.param_count())
                                     : 0);
      RngStream local_rng = client_stream(ctx.root, round, id, "local");
      ModelParams trained =
          sgd_epochs(start, ctx.data.shards[i], cfg.training.local_epochs, cfg.training.local_lr,
                     cfg.training.local_batch, local_rng);

      std::vector<std::int64_t> picks;
      switch (strategy) {
        case Strategy::none:
          picks = shared_subset;
          break;
        case Strategy::random: {
          RngStream sel_rng = client_stream(ctx.root, round, id, "select");
          picks = select_random(ctx.data.pool, sel_rng, cfg.sampling.n_logit);
          break;
        }
        case Strategy::low_entropy:
          picks = select_low_entropy(ctx.data.pool, trained, cfg.sampling.n_logit);
          break;
        case Strategy::mixed: {
          RngStream sel_rng = client_stream(ctx.root, round, id, "select");
          picks = select_mixed(ctx.data.pool, trained, ctx.data.hists[i], sel_rng,
                               cfg.sampling.n_logit);
          break;
        }
      }

      LogitReport report;
      report.client_id = id;
      report.indices = picks;
      report.rows = Mat(picks.size(), static_cast<std::size_t>(cfg.data.n_classes));
      const Mat xs = gather_pool_rows(ctx.data.pool, picks);
      for (std::size_t r = 0; r < xs.rows(); ++r) {
        report.rows.set_row(r, forward_logits(trained, xs.row(r), upload_t));
      }
      reports.push_back(std::move(report));
      clients[i] = std::move(trained);
    }

    AggregatedTeacher teacher = aggregate_average(reports);
    if (cfg.aggregation.method == "era") {
      teacher = era_sharpen(teacher, cfg.aggregation.t_era);
    }

    const Mat distill_x = gather_pool_rows(ctx.data.pool, teacher.indices);
    RngStream distill_rng = round_stream(ctx.root, round, "distill");
    server = sgd_epochs(server, distill_x, teacher.rows, upload_t, cfg.training.distill_epochs,
                        cfg.training.distill_lr, cfg.training.distill_batch, distill_rng);

    const CommEntry comm = account(reports, downlinks);
    result.ledger.rounds.push_back(comm);

    double ent_sum = 0.0;
    for (std::size_t r = 0; r < teacher.rows.rows(); ++r) ent_sum += entropy(teacher.rows.row(r));

    RoundMetrics m;
    m.round = round;
    m.server_acc = evaluate(server, ctx.data.test);
    m.mean_client_acc = mean_client_accuracy(clients, ctx.data.test);
    m.uplink_scalars = comm.uplink_scalars;
    m.downlink_scalars = comm.downlink_scalars;
    m.teacher_mean_entropy = ent_sum / static_cast<double>(teacher.rows.rows());
    m.union_size = teacher.indices.size();
    result.rounds.push_back(m);
    if (on_round) on_round(m);
  }
  return result;
}

RunResult run_fedavg(const ExperimentConfig& cfg, const RoundCallback& on_round) {
  Context ctx = make_context(cfg);

  RngStream server_init = ctx.root.split("init.server");
  ModelParams server = init_params(ctx.server_spec, server_init);
  std::vector<ModelParams> clients = init_clients(ctx);

  RunResult result;
  for (std::size_t round = 0; round < cfg.rounds; ++round) {
    RngStream clients_rng = round_stream(ctx.root, round, "clients");
    const std::vector<int> selected =
        select_clients(ctx.eligible, cfg.clients_per_round, clients_rng);

    std::vector<ModelParams> returned;
    returned.reserve(selected.size());
    CommEntry comm;
    for (int id : selected) {
      const auto i = static_cast<std::size_t>(id);
      RngStream local_rng = client_stream(ctx.root, round, id, "local");
      ModelParams trained =
          sgd_epochs(server, ctx.data.shards[i], cfg.training.local_epochs, cfg.training.local_lr,
                     cfg.training.local_batch, local_rng);
      const auto size = static_cast<std::int64_t>(trained.param_count());
      comm.per_client.push_back({id, size, 0, size});
      comm.uplink_scalars += size;
      comm.downlink_scalars += size;
      clients[i] = trained;
      returned.push_back(std::move(trained));
    }
    server = average_params(returned);
    result.ledger.rounds.push_back(comm);

    RoundMetrics m;
    m.round = round;
    m.server_acc = evaluate(server, ctx.data.test);
    m.mean_client_acc = mean_client_accuracy(clients, ctx.data.test);
    m.uplink_scalars = comm.uplink_scalars;
    m.downlink_scalars = comm.downlink_scalars;
    m.teacher_mean_entropy = 0.0;
    m.union_size = 0;
    result.rounds.push_back(m);
    if (on_round) on_round(m);
  }
  return result;
}

RunResult run_experiment(const ExperimentConfig& cfg, const RoundCallback& on_round) {
  validate(cfg);
  return cfg.algorithm == "fd" ? run_fd(cfg, on_round) : run_fedavg(cfg, on_round);
}

const char* const kMetricsCsvHeader =
    "round,server_acc,mean_client_acc,uplink_scalars,downlink_scalars,"
    "teacher_mean_entropy,union_size\n";

std::string metrics_csv_row(const RoundMetrics& m) {
  std::ostringstream os;
  os << m.round << ',' << format_double(m.server_acc) << ',' << format_double(m.mean_client_acc)
     << ',' << m.uplink_scalars << ',' << m.downlink_scalars << ','
     << format_double(m.teacher_mean_entropy) << ',' << m.union_size << '\n';
  return os.str();
}

std::string metrics_csv(std::span<const RoundMetrics> rounds) {
  std::string out = kMetricsCsvHeader;
  for (const RoundMetrics& m : rounds) out += metrics_csv_row(m);
  return out;
}

}  // namespace fd
