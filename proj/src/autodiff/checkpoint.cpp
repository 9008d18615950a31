#include "treesmu/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "treesmu/errors.hpp"

namespace treesmu::ad {
namespace {

constexpr std::array<char, 8> kMagic = {'T', 'S', 'M', 'U', 'C', 'K', 'P', 'T'};

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T read_le(std::istream& in) {
  std::array<char, sizeof(T)> bytes;
  if (!in.read(bytes.data(), bytes.size())) throw DataError("truncated checkpoint");
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

void write_tensor(std::ostream& out, const Tensor& t) {
  for (double x : t.data()) write_le(out, x);
}

Tensor read_tensor(std::istream& in, std::size_t rows, std::size_t cols) {
  Tensor t(rows, cols);
  for (double& x : t.data()) x = read_le<double>(in);
  return t;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params,
                     const nlohmann::json& metadata) {
  nlohmann::json header;
  header["metadata"] = metadata;
  header["adam_step"] = params.step();
  auto& entries = header["params"] = nlohmann::json::array();
  for (std::uint32_t i = 0; i < params.size(); ++i) {
    const ParamId id{i};
    entries.push_back({{"key", params.key(id)},
                       {"rows", params.value(id).rows()},
                       {"cols", params.value(id).cols()}});
  }
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(kMagic.data(), kMagic.size());
  write_le<std::uint32_t>(out, kCheckpointVersion);
  write_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (std::uint32_t i = 0; i < params.size(); ++i) {
    const ParamId id{i};
    write_tensor(out, params.value(id));
    write_tensor(out, params.first_moment(id));
    write_tensor(out, params.second_moment(id));
  }
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw DataError(path.string() + " is not a checkpoint (bad magic)");
  }
  const auto version = read_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = read_le<std::uint64_t>(in);
  std::string text(header_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) {
    throw DataError("truncated checkpoint header");
  }
  const auto header = nlohmann::json::parse(text);

  Checkpoint ckpt;
  ckpt.metadata = header.at("metadata");
  for (const auto& entry : header.at("params")) {
    const auto rows = entry.at("rows").get<std::size_t>();
    const auto cols = entry.at("cols").get<std::size_t>();
    Tensor value = read_tensor(in, rows, cols);
    Tensor m = read_tensor(in, rows, cols);
    Tensor v = read_tensor(in, rows, cols);
    const ParamId id = ckpt.params.add(entry.at("key").get<std::string>(), std::move(value));
    ckpt.params.first_moment(id) = std::move(m);
    ckpt.params.second_moment(id) = std::move(v);
  }
  ckpt.params.set_step(header.at("adam_step").get<std::uint64_t>());
  return ckpt;
}

}  // namespace treesmu::ad
