#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fd/data.hpp"
#include "fd/model.hpp"
#include "fd/protocol.hpp"
#include "fd/sampling.hpp"

namespace fd {

struct ModelSpecConfig {
  std::string arch = "linear";  // linear | mlp
  std::size_t hidden = 0;
  bool operator==(const ModelSpecConfig&) const = default;
};

struct DataConfig {
  int n_classes = 4;
  std::size_t dim = 16;
  double spread = 0.9;
  std::size_t n_private = 4000;
  std::size_t n_public = 2000;
  std::size_t n_test = 2000;
  // split: public pool is the held-out part of one master draw.
  // fresh: public pool is a new draw around the same class means with
  //        public_spread (the broader-distribution stand-in).
  // mirror_private: pool repeats the private inputs without labels.
  std::string public_source = "split";
  double public_spread = 0.0;
  bool operator==(const DataConfig&) const = default;
};

struct TrainConfig {
  std::size_t local_epochs = 2;
  double local_lr = 0.05;
  std::size_t local_batch = 32;
  std::size_t distill_epochs = 2;
  double distill_lr = 0.05;
  std::size_t distill_batch = 32;
  double upload_temperature = 1.0;
  bool operator==(const TrainConfig&) const = default;
};

struct AggregationConfig {
  std::string method = "average";  // average | era
  double t_era = 0.5;
  bool operator==(const AggregationConfig&) const = default;
};

struct SamplingConfigText {
  std::string strategy = "none";  // none | random | low_entropy | mixed
  std::size_t n_logit = 400;
  bool operator==(const SamplingConfigText&) const = default;
};

/// Full declarative description of one run. Everything an execution touches
/// derives from these fields plus the seed.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string algorithm = "fd";  // fd | fedavg
  std::size_t rounds = 30;
  std::size_t n_clients = 20;
  std::size_t clients_per_round = 8;
  double alpha = 100.0;  // Dirichlet concentration
  DataConfig data;
  ModelSpecConfig server_model;
  std::vector<ModelSpecConfig> client_models;  // one entry replicates to all
  AggregationConfig aggregation;
  SamplingConfigText sampling;
  TrainConfig training;
  bool operator==(const ExperimentConfig&) const = default;
};

struct RoundMetrics {
  std::size_t round = 0;
  double server_acc = 0.0;
  double mean_client_acc = 0.0;
  std::int64_t uplink_scalars = 0;
  std::int64_t downlink_scalars = 0;
  double teacher_mean_entropy = 0.0;
  std::size_t union_size = 0;
};

struct RunResult {
  std::vector<RoundMetrics> rounds;
  CommLedger ledger;
};

/// Throws ConfigError before any round runs.
void validate(const ExperimentConfig& cfg);

Strategy parse_strategy(const std::string& name);
ModelSpec resolve_model_spec(const ModelSpecConfig& mc, const DataConfig& dc);
/// Per-client specs with the single-entry shorthand expanded.
std::vector<ModelSpec> resolve_client_specs(const ExperimentConfig& cfg);

/// Everything derived from the data section: client shards, public pool,
/// test set, per-client label histograms.
struct ExperimentData {
  std::vector<LabeledDataset> shards;
  UnlabeledDataset pool;
  LabeledDataset test;
  std::vector<LocalLabelHistogram> hists;  // empty histogram for empty shards
};

ExperimentData prepare_data(const ExperimentConfig& cfg, const RngStream& root);

/// Uniform sample of `per_round` ids from `eligible` (all of them when the
/// pool is smaller), ascending.
std::vector<int> select_clients(std::span<const int> eligible, std::size_t per_round,
                                RngStream& rng);

/// Fraction of test samples whose argmax prediction matches the label.
double evaluate(const ModelParams& params, const LabeledDataset& test);

/// Invoked after each completed round; lets callers stream metrics to disk
/// so an aborted run still leaves a partial CSV behind.
using RoundCallback = std::function<void(const RoundMetrics&)>;

RunResult run_fd(const ExperimentConfig& cfg, const RoundCallback& on_round = {});
RunResult run_fedavg(const ExperimentConfig& cfg, const RoundCallback& on_round = {});
RunResult run_experiment(const ExperimentConfig& cfg, const RoundCallback& on_round = {});

// CSV with the fixed header round,server_acc,mean_client_acc,
// uplink_scalars,downlink_scalars,teacher_mean_entropy,union_size.
extern const char* const kMetricsCsvHeader;  // includes the trailing newline
std::string metrics_csv_row(const RoundMetrics& m);
std::string metrics_csv(std::span<const RoundMetrics> rounds);

// Stream labels used by the engine; exposed so tests can reproduce any
// single step of a run.
RngStream experiment_root(const ExperimentConfig& cfg);
RngStream round_stream(const RngStream& root, std::size_t round, const std::string& purpose);
RngStream client_stream(const RngStream& root, std::size_t round, int client,
                        const std::string& purpose);

}  // namespace fd
