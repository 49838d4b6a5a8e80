// Copyright 2026 The leakaudit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "leakaudit/checkpoint.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "absl/strings/str_cat.h"

namespace leakaudit {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

void AppendFloatLe(float f, std::string& out) {
  const auto bits = std::bit_cast<uint32_t>(f);
  for (int b = 0; b < 4; ++b)
    out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
}

float ReadFloatLe(const unsigned char* p) {
  uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) bits |= static_cast<uint32_t>(p[b]) << (8 * b);
  return std::bit_cast<float>(bits);
}

}  // namespace

json ModelConfigToJson(const ModelConfig& c) {
  return json{{"n_layers", c.n_layers},
              {"n_heads", c.n_heads},
              {"model_dim", c.model_dim},
              {"ff_dim", c.ff_dim},
              {"vocab_size", c.vocab_size},
              {"seq_len", c.seq_len},
              {"objective", std::string(ObjectiveName(c.objective))},
              {"mask_rate", c.mask_rate}};
}

absl::StatusOr<ModelConfig> ModelConfigFromJson(const json& j) {
  ModelConfig c;
  try {
    c.n_layers = j.at("n_layers").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.model_dim = j.at("model_dim").get<int>();
    c.ff_dim = j.at("ff_dim").get<int>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.seq_len = j.at("seq_len").get<int>();
    auto objective = ParseObjective(j.at("objective").get<std::string>());
    if (!objective.ok()) return objective.status();
    c.objective = *objective;
    c.mask_rate = j.at("mask_rate").get<double>();
  } catch (const json::exception& e) {
    return absl::InvalidArgumentError(
        absl::StrCat("bad model config: ", e.what()));
  }
  if (absl::Status s = ValidateModelConfig(c); !s.ok()) return s;
  return c;
}

absl::Status SaveCheckpoint(const ParameterSet& params, const std::string& dir,
                            const json& lineage) {
  for (const Tensor& t : params.tensors()) {
    for (double v : t.values) {
      if (!std::isfinite(static_cast<float>(v))) {
        return absl::InternalError(absl::StrCat(
            "tensor ", t.name,
            " has a value outside float32 range (model diverged)"));
      }
    }
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    return absl::UnavailableError(
        absl::StrCat("cannot create ", dir, ": ", ec.message()));
  }
  std::string blob;
  blob.reserve(params.ParameterCount() * 4);
  json tensors = json::array();
  for (const Tensor& t : params.tensors()) {
    tensors.push_back({{"name", t.name},
                       {"shape", t.shape},
                       {"dtype", "float32"},
                       {"offset", blob.size()},
                       {"bytes", t.values.size() * 4}});
    for (double v : t.values) AppendFloatLe(static_cast<float>(v), blob);
  }
  json manifest = {{"format", "leakaudit-checkpoint"},
                   {"version", 1},
                   {"config", ModelConfigToJson(params.config())},
                   {"tensors", tensors},
                   {"blob", kCheckpointBlob},
                   {"blob_bytes", blob.size()},
                   {"lineage", lineage}};

  const fs::path base(dir);
  {
    std::ofstream out(base / kCheckpointBlob,
                      std::ios::binary | std::ios::trunc);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) return absl::DataLossError(absl::StrCat("write failed in ", dir));
  }
  std::ofstream out(base / kCheckpointManifest,
                    std::ios::binary | std::ios::trunc);
  out << manifest.dump(2) << '\n';
  if (!out) return absl::DataLossError(absl::StrCat("write failed in ", dir));
  return absl::OkStatus();
}

absl::StatusOr<LoadedCheckpoint> LoadCheckpoint(const std::string& dir) {
  const fs::path base(dir);
  std::ifstream mf(base / kCheckpointManifest);
  if (!mf) {
    return absl::NotFoundError(absl::StrCat(
        "missing checkpoint manifest ", (base / kCheckpointManifest).string()));
  }
  std::ifstream bf(base / kCheckpointBlob, std::ios::binary);
  if (!bf) {
    return absl::NotFoundError(absl::StrCat("missing checkpoint blob ",
                                            (base / kCheckpointBlob).string()));
  }
  const std::string blob((std::istreambuf_iterator<char>(bf)),
                         std::istreambuf_iterator<char>());
  json manifest;
  try {
    manifest = json::parse(mf);
  } catch (const json::exception& e) {
    return absl::InvalidArgumentError(
        absl::StrCat("bad checkpoint manifest in ", dir, ": ", e.what()));
  }
  if (!manifest.contains("config") || !manifest.contains("tensors")) {
    return absl::InvalidArgumentError(
        absl::StrCat("checkpoint manifest in ", dir, " lacks config/tensors"));
  }
  auto config = ModelConfigFromJson(manifest["config"]);
  if (!config.ok()) return config.status();

  LoadedCheckpoint loaded{ParameterSet(*config),
                          manifest.value("lineage", json{})};
  auto tensors = loaded.params.tensors();
  const json& entries = manifest["tensors"];
  if (entries.size() != tensors.size()) {
    return absl::InvalidArgumentError(
        absl::StrCat("checkpoint lists ", entries.size(),
                     " tensors, config implies ", tensors.size()));
  }
  const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
  for (size_t i = 0; i < tensors.size(); ++i) {
    const json& e = entries[i];
    try {
      if (e.at("name").get<std::string>() != tensors[i].name ||
          e.at("shape").get<std::vector<int>>() != tensors[i].shape ||
          e.at("dtype").get<std::string>() != "float32") {
        return absl::InvalidArgumentError(absl::StrCat(
            "tensor ", i, " in ", dir, " does not match the inventory"));
      }
      const auto offset = e.at("offset").get<size_t>();
      const size_t count = tensors[i].values.size();
      if (offset + 4 * count > blob.size()) {
        return absl::OutOfRangeError(
            absl::StrCat("tensor ", tensors[i].name, " overruns blob"));
      }
      for (size_t k = 0; k < count; ++k) {
        tensors[i].values[k] = ReadFloatLe(bytes + offset + 4 * k);
      }
    } catch (const json::exception& ex) {
      return absl::InvalidArgumentError(
          absl::StrCat("bad tensor entry in ", dir, ": ", ex.what()));
    }
  }
  return loaded;
}

bool CheckpointExists(const std::string& dir) {
  const fs::path base(dir);
  return fs::exists(base / kCheckpointManifest) &&
         fs::exists(base / kCheckpointBlob);
}

}  // namespace leakaudit
