#include <zlib.h>

#include <cstring>
#include <fstream>

#include "fpd/config_json.hpp"
#include "fpd/training.hpp"

namespace fpd {
namespace {

constexpr char kMagic[8] = {'F', 'P', 'D', 'C', 'K', 'P', 'T', '\0'};

uint32_t crc_bytes(uint32_t crc, const void* data, size_t len) {
  return static_cast<uint32_t>(
      crc32(crc, static_cast<const Bytef*>(data), static_cast<uInt>(len)));
}

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& is, T& v, const std::string& path) {
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("load_checkpoint: truncated file " + path);
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  nlohmann::json header;
  header["model"] = ckpt.model_config;
  header["train"] = ckpt.train_config;
  header["epoch"] = ckpt.epoch;
  header["best_metric"] = ckpt.best_metric;
  header["rng_state"] = ckpt.rng_state;
  auto& index = header["tensors"];
  index = nlohmann::json::array();
  for (const auto& [name, tensor] : ckpt.tensors) {
    index.push_back({{"name", name}, {"shape", tensor.shape}});
  }
  const std::string header_str = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("save_checkpoint: cannot open " + path);

  os.write(kMagic, sizeof(kMagic));
  write_pod(os, ckpt.version);
  write_pod(os, static_cast<uint64_t>(header_str.size()));
  os.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));

  uint32_t crc = crc_bytes(0, nullptr, 0);
  for (const auto& [name, tensor] : ckpt.tensors) {
    const size_t bytes = tensor.data.size() * sizeof(float);
    os.write(reinterpret_cast<const char*>(tensor.data.data()),
             static_cast<std::streamsize>(bytes));
    crc = crc_bytes(crc, tensor.data.data(), bytes);
  }
  write_pod(os, crc);
  if (!os) throw IoError("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("load_checkpoint: cannot open " + path);

  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("load_checkpoint: " + path + " is not a checkpoint file");
  }

  Checkpoint ckpt;
  read_pod(is, ckpt.version, path);
  if (ckpt.version != kCheckpointVersion) {
    throw VersionError("load_checkpoint: " + path + " has version " +
                       std::to_string(ckpt.version) + ", this build reads " +
                       std::to_string(kCheckpointVersion));
  }

  uint64_t header_len = 0;
  read_pod(is, header_len, path);
  std::string header_str(header_len, '\0');
  is.read(header_str.data(), static_cast<std::streamsize>(header_len));
  if (!is) throw IoError("load_checkpoint: truncated file " + path);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_str);
    ckpt.model_config = header.at("model").get<HourglassConfig>();
    ckpt.train_config = header.at("train").get<TrainConfig>();
    ckpt.epoch = header.at("epoch").get<int>();
    ckpt.best_metric = header.at("best_metric").get<double>();
    ckpt.rng_state = header.at("rng_state").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("load_checkpoint: bad header in " + path + ": " + e.what());
  }

  uint32_t crc = crc_bytes(0, nullptr, 0);
  for (const auto& entry : header.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<std::array<int, 4>>();
    Tensor t = Tensor::zeros(shape[0], shape[1], shape[2], shape[3]);
    const size_t bytes = t.data.size() * sizeof(float);
    is.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(bytes));
    if (!is) throw IoError("load_checkpoint: truncated file " + path);
    crc = crc_bytes(crc, t.data.data(), bytes);
    ckpt.tensors.emplace_back(name, std::move(t));
  }

  uint32_t stored_crc = 0;
  read_pod(is, stored_crc, path);
  if (stored_crc != crc) {
    throw IoError("load_checkpoint: payload checksum mismatch in " + path);
  }
  return ckpt;
}

void require_model_config(const Checkpoint& ckpt, const HourglassConfig& expected) {
  if (!(ckpt.model_config == expected)) {
    throw ContractError(
        "checkpoint architecture mismatch: file has stages=" +
        std::to_string(ckpt.model_config.num_stages) +
        " channels=" + std::to_string(ckpt.model_config.channels) +
        " joints=" + std::to_string(ckpt.model_config.num_joints) +
        ", expected stages=" + std::to_string(expected.num_stages) +
        " channels=" + std::to_string(expected.channels) +
        " joints=" + std::to_string(expected.num_joints));
  }
}

std::unique_ptr<StackedHourglass> restore_network(const Checkpoint& ckpt) {
  auto net = build_model(ckpt.model_config, 0);
  net->load_state(ckpt.tensors);
  return net;
}

uint32_t weight_digest(StackedHourglass& net) {
  uint32_t crc = crc_bytes(0, nullptr, 0);
  for (const auto& p : net.parameters()) {
    crc = crc_bytes(crc, p.value->data.data(), p.value->data.size() * sizeof(float));
  }
  return crc;
}

}  // namespace fpd
