// Copyright 2026 The lerptext Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lerptext/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "lerptext/hashing.hpp"

namespace lerptext {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is stored as little-endian float64");

namespace {

constexpr char kMagic[8] = {'L', 'R', 'P', 'T', 'C', 'K', 'P', 'T'};

using nlohmann::ordered_json;

ordered_json config_json(const ModelConfig& c) {
  return ordered_json{{"vocab_size", c.vocab_size},         {"d_model", c.d_model},
                      {"heads", c.heads},                   {"ff_dim", c.ff_dim},
                      {"encoder_layers", c.encoder_layers}, {"decoder_layers", c.decoder_layers},
                      {"max_length", c.max_length},         {"sigma_init", c.sigma_init}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.d_model = j.at("d_model").get<int>();
  c.heads = j.at("heads").get<int>();
  c.ff_dim = j.at("ff_dim").get<int>();
  c.encoder_layers = j.at("encoder_layers").get<int>();
  c.decoder_layers = j.at("decoder_layers").get<int>();
  c.max_length = j.at("max_length").get<int>();
  c.sigma_init = j.at("sigma_init").get<double>();
  c.validate();
  return c;
}

struct RawCheckpoint {
  int version = 0;
  nlohmann::json header;
  std::string payload;
};

RawCheckpoint read_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto fail = [&](const std::string& msg) {
    return std::runtime_error("checkpoint " + path.string() + ": " + msg);
  };
  constexpr size_t kFixed = sizeof(kMagic) + sizeof(std::uint32_t) + sizeof(std::uint64_t);
  if (bytes.size() < kFixed || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw fail("not a checkpoint file (bad magic)");
  }
  std::uint32_t version = 0;
  std::uint64_t header_size = 0;
  std::memcpy(&version, bytes.data() + sizeof(kMagic), sizeof(version));
  std::memcpy(&header_size, bytes.data() + sizeof(kMagic) + sizeof(version), sizeof(header_size));
  if (version != static_cast<std::uint32_t>(kCheckpointVersion)) {
    throw fail("unsupported version " + std::to_string(version));
  }
  if (header_size > bytes.size() - kFixed) throw fail("truncated header");
  RawCheckpoint raw;
  raw.version = static_cast<int>(version);
  try {
    raw.header = nlohmann::json::parse(bytes.substr(kFixed, header_size));
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("corrupt header: ") + e.what());
  }
  raw.payload = bytes.substr(kFixed + header_size);
  if (sha256_hex(raw.payload) != raw.header.value("payload_sha256", std::string())) {
    throw fail("payload digest mismatch (file corrupted or truncated)");
  }
  return raw;
}

std::vector<ParameterShape> shapes_from_json(const nlohmann::json& j) {
  std::vector<ParameterShape> out;
  for (const auto& p : j.at("parameters")) {
    out.push_back({p.at("name").get<std::string>(), p.at("rows").get<long>(),
                   p.at("cols").get<long>()});
  }
  return out;
}

kv::Entries metadata_from_json(const nlohmann::json& j) {
  kv::Entries out;
  if (!j.contains("metadata")) return out;
  for (const auto& m : j.at("metadata")) {
    out.emplace_back(m.at(0).get<std::string>(), m.at(1).get<std::string>());
  }
  return out;
}

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const InterpModel& model,
                     const Vocabulary& vocab, const kv::Entries& metadata) {
  if (vocab.size() != model.config().vocab_size) {
    throw std::invalid_argument("save_checkpoint: vocabulary size does not match the model");
  }
  std::string payload;
  ordered_json params = ordered_json::array();
  for (const ag::Parameter* p : model.parameters()) {
    params.push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}});
    payload.append(reinterpret_cast<const char*>(p->value.data()),
                   static_cast<size_t>(p->value.size()) * sizeof(double));
  }
  ordered_json meta = ordered_json::array();
  for (const auto& [k, v] : metadata) meta.push_back({k, v});
  ordered_json header{{"format", "lerptext-checkpoint"},
                      {"model", config_json(model.config())},
                      {"vocab", vocab.tokens()},
                      {"vocab_sha256", vocab.hash()},
                      {"parameters", params},
                      {"metadata", meta},
                      {"payload_sha256", sha256_hex(payload)}};
  const std::string header_text = header.dump();
  const std::uint32_t version = kCheckpointVersion;
  const std::uint64_t header_size = header_text.size();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // Write to a sibling file first so a crash never leaves a partial checkpoint.
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    out.write(kMagic, sizeof(kMagic));
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    out.write(reinterpret_cast<const char*>(&header_size), sizeof(header_size));
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const RawCheckpoint raw = read_raw(path);
  auto fail = [&](const std::string& msg) {
    return std::runtime_error("checkpoint " + path.string() + ": " + msg);
  };
  try {
    const ModelConfig config = config_from_json(raw.header.at("model"));
    Vocabulary vocab(raw.header.at("vocab").get<std::vector<std::string>>());
    if (vocab.hash() != raw.header.at("vocab_sha256").get<std::string>()) {
      throw fail("vocabulary digest mismatch");
    }
    if (vocab.size() != config.vocab_size) throw fail("vocabulary size does not match model config");
    const auto shapes = shapes_from_json(raw.header);
    LoadedCheckpoint ck{InterpModel(config, 0), std::move(vocab), metadata_from_json(raw.header)};
    auto params = ck.model.parameters();
    if (params.size() != shapes.size()) {
      throw fail("expected " + std::to_string(params.size()) + " parameter arrays, found " +
                 std::to_string(shapes.size()));
    }
    size_t offset = 0;
    for (size_t i = 0; i < params.size(); ++i) {
      ag::Parameter& p = *params[i];
      if (p.name != shapes[i].name || p.value.rows() != shapes[i].rows ||
          p.value.cols() != shapes[i].cols) {
        throw fail("parameter " + std::to_string(i) + " is " + shapes[i].name + " [" +
                   std::to_string(shapes[i].rows) + "x" + std::to_string(shapes[i].cols) +
                   "], model expects " + p.name + " [" + std::to_string(p.value.rows()) + "x" +
                   std::to_string(p.value.cols()) + "]");
      }
      const size_t n = static_cast<size_t>(p.value.size()) * sizeof(double);
      if (offset + n > raw.payload.size()) throw fail("payload shorter than declared shapes");
      std::memcpy(p.value.data(), raw.payload.data() + offset, n);
      offset += n;
    }
    if (offset != raw.payload.size()) throw fail("payload longer than declared shapes");
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("malformed header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw fail(e.what());
  }
}

CheckpointInfo inspect_checkpoint(const std::filesystem::path& path) {
  const RawCheckpoint raw = read_raw(path);
  CheckpointInfo info;
  try {
    info.version = raw.version;
    info.config = config_from_json(raw.header.at("model"));
    info.vocab_size = static_cast<int>(raw.header.at("vocab").size());
    info.vocab_hash = raw.header.at("vocab_sha256").get<std::string>();
    info.parameters = shapes_from_json(raw.header);
    info.metadata = metadata_from_json(raw.header);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("checkpoint " + path.string() + ": malformed header: " + e.what());
  }
  for (const auto& s : info.parameters) info.parameter_count += s.rows * s.cols;
  if (static_cast<size_t>(info.parameter_count) * sizeof(double) != raw.payload.size()) {
    throw std::runtime_error("checkpoint " + path.string() + ": payload size mismatch");
  }
  // The spread parameter is stored last, as its unconstrained raw value.
  double raw_sigma = 0.0;
  std::memcpy(&raw_sigma, raw.payload.data() + raw.payload.size() - sizeof(double), sizeof(double));
  info.sigma = softplus(raw_sigma);
  return info;
}

}  // namespace lerptext
