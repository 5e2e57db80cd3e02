// Copyright 2026 The Pepita Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pepita/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "pepita/errors.hpp"

namespace pepita {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint container assumes a little-endian host");

constexpr char kMagic[8] = {'P', 'E', 'P', 'I', 'T', 'A', 'C', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::ifstream& in, const std::filesystem::path& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw FormatError("checkpoint " + path.string() + ": truncated");
  return v;
}

void write_tensor(std::ofstream& out, const std::string& name, const Tensor& t) {
  write_pod<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
  for (std::size_t e : t.shape()) write_pod<std::uint64_t>(out, e);
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
}

std::pair<std::string, Tensor> read_tensor(std::ifstream& in,
                                           const std::filesystem::path& path) {
  const auto name_len = read_pod<std::uint16_t>(in, path);
  std::string name(name_len, '\0');
  in.read(name.data(), name_len);
  const auto rank = read_pod<std::uint8_t>(in, path);
  std::vector<std::size_t> shape(rank);
  for (auto& e : shape) e = read_pod<std::uint64_t>(in, path);
  Tensor t(shape);
  in.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.size() * sizeof(double)));
  if (!in) throw FormatError("checkpoint " + path.string() + ": truncated tensor '" + name + "'");
  return {std::move(name), std::move(t)};
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const std::vector<Tensor>& velocities, Rule rule,
                     std::uint64_t master_seed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kMagic, sizeof kMagic);
  write_pod<std::uint32_t>(out, kVersion);

  nlohmann::json meta;
  meta["model"] = model_config_to_json(model.config);
  meta["rule"] = to_string(rule);
  meta["seed"] = master_seed;
  const std::string meta_str = meta.dump();
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(meta_str.size()));
  out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));

  std::uint32_t count = 1;  // F
  for (const auto& w : model.weights) count += w.size() > 0;
  for (const auto& b : model.feedback) count += b.size() > 0;
  for (const auto& v : velocities) count += v.size() > 0;
  write_pod<std::uint32_t>(out, count);

  for (std::size_t i = 0; i < model.weights.size(); ++i) {
    write_tensor(out, "W" + std::to_string(i), model.weights[i]);
  }
  write_tensor(out, "F", model.F);
  for (std::size_t i = 0; i < model.feedback.size(); ++i) {
    if (model.feedback[i].size() > 0) {
      write_tensor(out, "B" + std::to_string(i), model.feedback[i]);
    }
  }
  for (std::size_t i = 0; i < velocities.size(); ++i) {
    if (velocities[i].size() > 0) {
      write_tensor(out, "V" + std::to_string(i), velocities[i]);
    }
  }
  out.flush();
  if (!out) throw IoError("write failure on " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw FormatError("checkpoint " + path.string() + ": bad magic bytes");
  }
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != kVersion) {
    throw FormatError("checkpoint " + path.string() + ": unsupported version " +
                      std::to_string(version) + " (this build reads " +
                      std::to_string(kVersion) + ")");
  }
  const auto meta_len = read_pod<std::uint32_t>(in, path);
  std::string meta_str(meta_len, '\0');
  in.read(meta_str.data(), meta_len);
  if (!in) throw FormatError("checkpoint " + path.string() + ": truncated metadata");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_str);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint " + path.string() + ": metadata: " + e.what());
  }

  Checkpoint ckpt;
  ckpt.rule = rule_from_string(meta.at("rule").get<std::string>());
  ckpt.master_seed = meta.at("seed").get<std::uint64_t>();
  const ModelConfig config = model_config_from_json(meta.at("model"));

  const auto count = read_pod<std::uint32_t>(in, path);
  std::map<std::string, Tensor> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    auto [name, tensor] = read_tensor(in, path);
    tensors.emplace(std::move(name), std::move(tensor));
  }

  // Rebuild with the recorded seed, then overwrite with the stored tensors;
  // this revalidates every shape against the configuration.
  Model model = build_model(config, feedback_kind_for(ckpt.rule), FOptions{}, ckpt.master_seed);
  for (std::size_t i = 0; i < model.weights.size(); ++i) {
    const std::string key = "W" + std::to_string(i);
    auto it = tensors.find(key);
    if (it == tensors.end()) {
      throw FormatError("checkpoint " + path.string() + ": missing tensor " + key);
    }
    if (!model.weights[i].same_shape(it->second)) {
      throw ShapeError("checkpoint " + path.string() + ": tensor " + key + " has shape " +
                       it->second.shape_str() + ", model expects " +
                       model.weights[i].shape_str());
    }
    model.weights[i] = std::move(it->second);
  }
  {
    auto it = tensors.find("F");
    if (it == tensors.end()) {
      throw FormatError("checkpoint " + path.string() + ": missing tensor F");
    }
    if (!model.F.same_shape(it->second)) {
      throw ShapeError("checkpoint " + path.string() + ": tensor F has shape " +
                       it->second.shape_str() + ", model expects " + model.F.shape_str());
    }
    model.F = std::move(it->second);
  }
  for (std::size_t i = 0; i < model.feedback.size(); ++i) {
    auto it = tensors.find("B" + std::to_string(i));
    if (it != tensors.end()) model.feedback[i] = std::move(it->second);
  }
  ckpt.velocities.assign(model.weights.size(), Tensor());
  for (std::size_t i = 0; i < model.weights.size(); ++i) {
    auto it = tensors.find("V" + std::to_string(i));
    ckpt.velocities[i] =
        it != tensors.end() ? std::move(it->second) : Tensor(model.weights[i].shape());
  }
  ckpt.model = std::move(model);
  return ckpt;
}

}  // namespace pepita
