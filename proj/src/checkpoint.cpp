#include "capscore/error.h"
#include "capscore/model.h"

#include <json.hpp>

#include <bit>
#include <cmath>

namespace capscore {

namespace {

constexpr char kMagic[4] = {'S', 'V', 'T', 'M'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t& pos) {
  if (bytes.size() - pos < 4) throw Error(ErrorKind::format, "checkpoint truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
  }
  pos += 4;
  return v;
}

}  // namespace

std::string config_to_json(const ModelConfig& c) {
  nlohmann::json j = {
      {"d_clip", c.features.d_clip},   {"d_rb", c.features.d_rb},
      {"d_model", c.features.d_model}, {"max_refs", c.features.max_refs},
      {"mode", to_string(c.features.mode)},
      {"n_layers", c.n_layers},        {"n_heads", c.n_heads},
      {"ffn_mult", c.ffn_mult},        {"head_hidden", c.head_hidden},
      {"arch", to_string(c.arch)},     {"aggregate", to_string(c.aggregate)},
  };
  return j.dump();
}

ModelConfig config_from_json(const std::string& text) {
  ModelConfig c;
  try {
    auto j = nlohmann::json::parse(text);
    c.features.d_clip = j.at("d_clip").get<std::size_t>();
    c.features.d_rb = j.at("d_rb").get<std::size_t>();
    c.features.d_model = j.at("d_model").get<std::size_t>();
    c.features.max_refs = j.at("max_refs").get<std::size_t>();
    c.features.mode = feature_mode_from_string(j.at("mode").get<std::string>());
    c.n_layers = j.at("n_layers").get<std::size_t>();
    c.n_heads = j.at("n_heads").get<std::size_t>();
    c.ffn_mult = j.at("ffn_mult").get<std::size_t>();
    c.head_hidden = j.at("head_hidden").get<std::size_t>();
    c.arch = arch_from_string(j.at("arch").get<std::string>());
    c.aggregate = aggregate_from_string(j.at("aggregate").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, std::string("bad checkpoint config: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorKind::format, std::string("bad checkpoint config: ") + e.what());
  }
  return c;
}

std::string serialize_checkpoint(const ModelParams<double>& params, const ModelConfig& config) {
  const auto expected = zero_params<double>(config);
  auto want = expected.tensors();
  auto have = params.tensors();
  if (want.size() != have.size()) throw Error(ErrorKind::format, "params do not match config");
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (want[i]->rows() != have[i]->rows() || want[i]->cols() != have[i]->cols()) {
      throw Error(ErrorKind::format, "tensor " + params.tensor_names()[i] + " does not match config");
    }
  }

  const std::string cfg = config_to_json(config);
  std::string out(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(cfg.size()));
  out += cfg;
  for (const auto* m : have) {
    for (Eigen::Index i = 0; i < m->size(); ++i) {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(m->data()[i])));
    }
  }
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < 4 || bytes.substr(0, 4) != std::string_view(kMagic, 4)) {
    throw Error(ErrorKind::format, "bad magic: not a checkpoint");
  }
  std::size_t pos = 4;
  const std::uint32_t version = get_u32(bytes, pos);
  if (version != kVersion) {
    throw Error(ErrorKind::format, "unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t cfg_len = get_u32(bytes, pos);
  if (bytes.size() - pos < cfg_len) throw Error(ErrorKind::format, "checkpoint truncated");
  Checkpoint ck;
  ck.config = config_from_json(std::string(bytes.substr(pos, cfg_len)));
  pos += cfg_len;
  try {
    ck.config.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::format, std::string("bad checkpoint config: ") + e.what());
  }

  ck.params = zero_params<double>(ck.config);
  const std::size_t floats = ck.params.parameter_count();
  if (bytes.size() - pos != floats * 4) {
    throw Error(ErrorKind::format, "checkpoint holds " + std::to_string((bytes.size() - pos) / 4) +
                                       " floats but its config implies " + std::to_string(floats));
  }
  for (auto* m : ck.params.tensors()) {
    for (Eigen::Index i = 0; i < m->size(); ++i) {
      m->data()[i] = static_cast<double>(std::bit_cast<float>(get_u32(bytes, pos)));
    }
  }
  return ck;
}

void save_checkpoint(const ModelParams<double>& params, const ModelConfig& config,
                     const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(params, config));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file(path));
}

}  // namespace capscore
