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

#include "iass/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "iass/serde.hpp"

namespace iass {

namespace {

constexpr char kMagic[8] = {'I', 'A', 'S', 'S', 'C', 'K', 'P', '1'};

struct TensorRef {
  std::string name;
  const Tensor* tensor;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const SeparatorParams& params,
                     const AdamState& adam, const std::array<uint64_t, 4>& rng_state,
                     int epoch, const std::string& metadata_json) {
  using nlohmann::json;

  std::vector<TensorRef> refs;
  for (const auto& [name, t] : params.tensors) refs.push_back({name, &t});
  for (const auto& [name, t] : adam.m) refs.push_back({"adam.m." + name, &t});
  for (const auto& [name, t] : adam.v) refs.push_back({"adam.v." + name, &t});

  json dir = json::array();
  uint64_t offset = 0;
  for (const auto& r : refs) {
    const uint64_t bytes = static_cast<uint64_t>(r.tensor->numel()) * sizeof(double);
    dir.push_back({{"name", r.name},
                   {"shape", r.tensor->shape},
                   {"dtype", "f64"},
                   {"offset", offset},
                   {"bytes", bytes}});
    offset += bytes;
  }

  json header;
  header["version"] = 1;
  header["model_config"] = params.config;
  header["trainable"] = params.trainable;
  header["init_record"] = params.init_record;
  header["tensors"] = dir;
  header["adam_step"] = adam.step;
  header["rng_state"] = rng_state;
  header["epoch"] = epoch;
  const std::string header_str = header.dump();

  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write checkpoint: " + path.string());
  f.write(kMagic, sizeof(kMagic));
  const uint64_t header_len = header_str.size();
  f.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  f.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (const auto& r : refs)
    f.write(reinterpret_cast<const char*>(r.tensor->ptr()),
            static_cast<std::streamsize>(r.tensor->numel() * sizeof(double)));
  if (!f) throw DataError("failed writing checkpoint: " + path.string());

  std::ofstream meta(path.string() + ".meta.json");
  meta << metadata_json << "\n";
}

CheckpointData load_checkpoint(const std::filesystem::path& path) {
  using nlohmann::json;

  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot read checkpoint: " + path.string());
  char magic[8];
  if (!f.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw DataError("not an iass checkpoint (bad magic): " + path.string());
  uint64_t header_len = 0;
  if (!f.read(reinterpret_cast<char*>(&header_len), sizeof(header_len)))
    throw DataError("truncated checkpoint header: " + path.string());
  std::string header_str(header_len, '\0');
  if (!f.read(header_str.data(), static_cast<std::streamsize>(header_len)))
    throw DataError("truncated checkpoint header: " + path.string());

  json header;
  try {
    header = json::parse(header_str);
  } catch (const json::exception& e) {
    throw DataError("malformed checkpoint header: " + std::string(e.what()));
  }
  if (header.at("version").get<int>() != 1)
    throw DataError("unsupported checkpoint version in " + path.string());

  CheckpointData out;
  out.params.config = header.at("model_config").get<ModelConfig>();
  out.params.trainable = header.at("trainable").get<std::vector<std::string>>();
  if (header.contains("init_record"))
    out.params.init_record =
        header.at("init_record").get<std::map<std::string, std::string>>();
  out.adam.step = header.at("adam_step").get<int64_t>();
  const auto rng = header.at("rng_state").get<std::vector<uint64_t>>();
  if (rng.size() != 4) throw DataError("malformed rng state in " + path.string());
  std::copy(rng.begin(), rng.end(), out.rng_state.begin());
  out.epoch = header.at("epoch").get<int>();

  const std::streampos blob_start = f.tellg();
  for (const auto& entry : header.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    if (entry.at("dtype").get<std::string>() != "f64")
      throw DataError("unsupported tensor dtype in " + path.string());
    Tensor t(entry.at("shape").get<std::vector<int64_t>>());
    const uint64_t bytes = entry.at("bytes").get<uint64_t>();
    if (bytes != static_cast<uint64_t>(t.numel()) * sizeof(double))
      throw DataError("tensor size mismatch for '" + name + "' in " + path.string());
    f.seekg(blob_start + static_cast<std::streamoff>(entry.at("offset").get<uint64_t>()));
    if (!f.read(reinterpret_cast<char*>(t.ptr()), static_cast<std::streamsize>(bytes)))
      throw DataError("truncated tensor data for '" + name + "' in " + path.string());
    if (name.rfind("adam.m.", 0) == 0)
      out.adam.m.emplace(name.substr(7), std::move(t));
    else if (name.rfind("adam.v.", 0) == 0)
      out.adam.v.emplace(name.substr(7), std::move(t));
    else
      out.params.tensors.emplace(name, std::move(t));
  }

  for (const auto& name : out.params.trainable)
    if (!out.params.tensors.count(name))
      throw DataError("checkpoint missing tensor '" + name + "': " + path.string());
  return out;
}

}  // namespace iass
