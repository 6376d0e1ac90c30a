// SPDX-License-Identifier: Apache-2.0
#include "dta/trainer.hpp"

#include <cstdlib>
#include <string>

#include <json.hpp>

#include "dta/errors.hpp"

namespace dta {

std::string train_metadata_json(int epoch, int64_t step, const RunConfig& config,
                                double best_val_mse, int best_epoch) {
  nlohmann::json j;
  j["format"] = "train-state-v1";
  j["epoch"] = epoch;
  j["step"] = step;
  j["seed"] = config.seed;
  j["precision"] = config.precision;
  j["config_digest"] = config_digest(config);
  j["best_epoch"] = best_epoch;
  j["best_val_mse"] = format_log_value(best_val_mse);
  return j.dump();
}

TrainStateMeta parse_train_metadata(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    throw DataError("checkpoint metadata is not valid JSON");
  }
  if (!j.is_object() || j.value("format", std::string()) != "train-state-v1") {
    throw DataError("checkpoint metadata is not a training state");
  }
  TrainStateMeta meta;
  try {
    meta.epoch = j.at("epoch").get<int>();
    meta.step = j.at("step").get<int64_t>();
    meta.seed = j.at("seed").get<uint64_t>();
    meta.precision = j.at("precision").get<std::string>();
    meta.config_digest = j.at("config_digest").get<std::string>();
    meta.best_epoch = j.at("best_epoch").get<int>();
    meta.best_val_mse = std::strtod(j.at("best_val_mse").get<std::string>().c_str(), nullptr);
  } catch (const nlohmann::json::exception&) {
    throw DataError("checkpoint metadata is missing training-state fields");
  }
  return meta;
}

}  // namespace dta
