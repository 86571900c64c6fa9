#include "fd/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "fd/errors.hpp"

namespace fd {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& j, const std::string& where, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

ModelSpecConfig parse_model(const json& j, const std::string& where) {
  check_keys(j, where, {"arch", "hidden"});
  ModelSpecConfig mc;
  read(j, where, "arch", mc.arch);
  read(j, where, "hidden", mc.hidden);
  return mc;
}

json model_to_json(const ModelSpecConfig& mc) {
  return json{{"arch", mc.arch}, {"hidden", mc.hidden}};
}

}  // namespace

ExperimentConfig parse_config_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  check_keys(j, "config",
             {"seed", "algorithm", "rounds", "clients", "partition", "data", "server_model",
              "client_models", "aggregation", "sampling", "training"});

  ExperimentConfig cfg;
  read(j, "config", "seed", cfg.seed);
  read(j, "config", "algorithm", cfg.algorithm);
  read(j, "config", "rounds", cfg.rounds);

  if (j.contains("clients")) {
    const json& c = j.at("clients");
    check_keys(c, "clients", {"count", "per_round"});
    read(c, "clients", "count", cfg.n_clients);
    read(c, "clients", "per_round", cfg.clients_per_round);
  }
  if (j.contains("partition")) {
    const json& p = j.at("partition");
    check_keys(p, "partition", {"alpha"});
    read(p, "partition", "alpha", cfg.alpha);
  }
  if (j.contains("data")) {
    const json& d = j.at("data");
    check_keys(d, "data",
               {"n_classes", "dim", "spread", "n_private", "n_public", "n_test", "public_source",
                "public_spread"});
    read(d, "data", "n_classes", cfg.data.n_classes);
    read(d, "data", "dim", cfg.data.dim);
    read(d, "data", "spread", cfg.data.spread);
    read(d, "data", "n_private", cfg.data.n_private);
    read(d, "data", "n_public", cfg.data.n_public);
    read(d, "data", "n_test", cfg.data.n_test);
    read(d, "data", "public_source", cfg.data.public_source);
    read(d, "data", "public_spread", cfg.data.public_spread);
  }
  if (j.contains("server_model")) {
    cfg.server_model = parse_model(j.at("server_model"), "server_model");
  }
  if (j.contains("client_models")) {
    const json& cm = j.at("client_models");
    cfg.client_models.clear();
    if (cm.is_object()) {
      cfg.client_models.push_back(parse_model(cm, "client_models"));
    } else if (cm.is_array()) {
      std::size_t i = 0;
      for (const json& one : cm) {
        cfg.client_models.push_back(parse_model(one, "client_models[" + std::to_string(i++) + "]"));
      }
    } else {
      throw ConfigError("client_models: expected an object or an array");
    }
  }
  if (j.contains("aggregation")) {
    const json& a = j.at("aggregation");
    check_keys(a, "aggregation", {"method", "t_era"});
    read(a, "aggregation", "method", cfg.aggregation.method);
    read(a, "aggregation", "t_era", cfg.aggregation.t_era);
  }
  if (j.contains("sampling")) {
    const json& s = j.at("sampling");
    check_keys(s, "sampling", {"strategy", "n_logit"});
    read(s, "sampling", "strategy", cfg.sampling.strategy);
    read(s, "sampling", "n_logit", cfg.sampling.n_logit);
  }
  if (j.contains("training")) {
    const json& t = j.at("training");
    check_keys(t, "training",
               {"local_epochs", "local_lr", "local_batch", "distill_epochs", "distill_lr",
                "distill_batch", "upload_temperature"});
    read(t, "training", "local_epochs", cfg.training.local_epochs);
    read(t, "training", "local_lr", cfg.training.local_lr);
    read(t, "training", "local_batch", cfg.training.local_batch);
    read(t, "training", "distill_epochs", cfg.training.distill_epochs);
    read(t, "training", "distill_lr", cfg.training.distill_lr);
    read(t, "training", "distill_batch", cfg.training.distill_batch);
    read(t, "training", "upload_temperature", cfg.training.upload_temperature);
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config_json(buf.str());
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["algorithm"] = cfg.algorithm;
  j["rounds"] = cfg.rounds;
  j["clients"] = {{"count", cfg.n_clients}, {"per_round", cfg.clients_per_round}};
  j["partition"] = {{"alpha", cfg.alpha}};
  j["data"] = {{"n_classes", cfg.data.n_classes},
               {"dim", cfg.data.dim},
               {"spread", cfg.data.spread},
               {"n_private", cfg.data.n_private},
               {"n_public", cfg.data.n_public},
               {"n_test", cfg.data.n_test},
               {"public_source", cfg.data.public_source},
               {"public_spread", cfg.data.public_spread}};
  j["server_model"] = model_to_json(cfg.server_model);
  json cms = json::array();
  for (const ModelSpecConfig& mc : cfg.client_models) cms.push_back(model_to_json(mc));
  j["client_models"] = cms;
  j["aggregation"] = {{"method", cfg.aggregation.method}, {"t_era", cfg.aggregation.t_era}};
  j["sampling"] = {{"strategy", cfg.sampling.strategy}, {"n_logit", cfg.sampling.n_logit}};
  j["training"] = {{"local_epochs", cfg.training.local_epochs},
                   {"local_lr", cfg.training.local_lr},
                   {"local_batch", cfg.training.local_batch},
                   {"distill_epochs", cfg.training.distill_epochs},
                   {"distill_lr", cfg.training.distill_lr},
                   {"distill_batch", cfg.training.distill_batch},
                   {"upload_temperature", cfg.training.upload_temperature}};
  return j.dump(2) + "\n";
}

}  // namespace fd
