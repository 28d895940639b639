/*
 * Copyright 2026 the iass authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "iass/experiment.hpp"

#include <fstream>

#include "iass/serde.hpp"

namespace iass {

using nlohmann::json;

void ExperimentConfig::validate() const {
  if (dataset_root.empty()) throw ConfigError("experiment: dataset_root is required");
  if (!std::filesystem::exists(dataset_root))
    throw DataError("experiment: dataset_root does not exist: " + dataset_root.string());
  if (target_instrument.empty())
    throw ConfigError("experiment: target_instrument is required");
  frame.validate();
  model.validate();
  train.validate();
  augment.validate();
  inference.validate();
  eval.validate();
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot read experiment config: " + path.string());
  json doc;
  try {
    f >> doc;
  } catch (const json::exception& e) {
    throw ConfigError("malformed experiment config: " + std::string(e.what()));
  }

  ExperimentConfig cfg;
  if (doc.contains("dataset_root"))
    cfg.dataset_root = doc.at("dataset_root").get<std::string>();
  if (doc.contains("target_instrument"))
    cfg.target_instrument = doc.at("target_instrument").get<std::string>();
  if (doc.contains("frame")) doc.at("frame").get_to(cfg.frame);
  if (doc.contains("model")) doc.at("model").get_to(cfg.model);
  if (doc.contains("train")) doc.at("train").get_to(cfg.train);
  if (doc.contains("augment")) doc.at("augment").get_to(cfg.augment);
  if (doc.contains("inference")) doc.at("inference").get_to(cfg.inference);
  if (doc.contains("eval")) doc.at("eval").get_to(cfg.eval);
  if (doc.contains("output_dir")) cfg.output_dir = doc.at("output_dir").get<std::string>();
  if (doc.contains("seed")) cfg.seed = doc.at("seed").get<uint64_t>();

  // paths in the file resolve relative to the file itself
  const auto base = path.parent_path();
  if (!cfg.dataset_root.empty() && cfg.dataset_root.is_relative())
    cfg.dataset_root = base / cfg.dataset_root;
  if (cfg.output_dir.is_relative()) cfg.output_dir = base / cfg.output_dir;
  return cfg;
}

void save_experiment_config(const std::filesystem::path& path,
                            const ExperimentConfig& cfg) {
  json doc{{"dataset_root", cfg.dataset_root.string()},
           {"target_instrument", cfg.target_instrument},
           {"frame", cfg.frame},
           {"model", cfg.model},
           {"train", cfg.train},
           {"augment", cfg.augment},
           {"inference", cfg.inference},
           {"eval", cfg.eval},
           {"output_dir", cfg.output_dir.string()},
           {"seed", cfg.seed}};
  std::ofstream f(path);
  if (!f) throw DataError("cannot write experiment config: " + path.string());
  f << doc.dump(2) << "\n";
}

}  // namespace iass
