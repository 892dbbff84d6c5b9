#include "fnh/nn/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "fnh/error.hpp"
#include "fnh/io.hpp"

namespace fnh::nn {

namespace {

constexpr char kMagic[4] = {'F', 'N', 'H', 'D'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

}  // namespace

void save_checkpoint(const ToyModel& model, const std::filesystem::path& path) {
  nlohmann::json header;
  header["config"] = model.config();
  nlohmann::json slots = nlohmann::json::array();
  for (const auto& s : model.slots()) {
    slots.push_back({{"name", s.name},
                     {"shape", {s.out_channels, s.in_channels, s.kernel, s.kernel}},
                     {"transposed", s.transposed}});
  }
  header["slots"] = std::move(slots);
  header["param_count"] = model.param_count();
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + 4 * model.param_count());
  for (double v : model.params()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  write_file_bytes(path, out);
}

ToyModel load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  const std::string where = path.string();
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("not a checkpoint: " + where);
  }
  const std::uint32_t version = get_u32(bytes.data() + 4);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version) + " in " + where);
  }
  const std::uint32_t hlen = get_u32(bytes.data() + 8);
  if (bytes.size() < 12 + static_cast<std::size_t>(hlen)) throw FormatError("truncated checkpoint header: " + where);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + hlen);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad checkpoint header in " + where + ": " + e.what());
  }

  ToyModel model(header.at("config").get<ToyNetConfig>());
  const auto count = header.at("param_count").get<std::size_t>();
  if (count != model.param_count()) {
    throw FormatError("checkpoint " + where + " holds " + std::to_string(count) + " parameters, config implies " +
                      std::to_string(model.param_count()));
  }
  const auto& slots = header.at("slots");
  if (slots.size() != model.slots().size()) throw FormatError("checkpoint slot table mismatch: " + where);
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].at("name").get<std::string>() != model.slots()[i].name) {
      throw FormatError("checkpoint slot " + std::to_string(i) + " is '" + slots[i].at("name").get<std::string>() +
                        "', expected '" + model.slots()[i].name + "'");
    }
  }
  const std::size_t payload = 12 + static_cast<std::size_t>(hlen);
  if (bytes.size() != payload + 4 * count) {
    throw FormatError("checkpoint payload size mismatch in " + where);
  }
  auto params = model.params();
  for (std::size_t i = 0; i < count; ++i) {
    params[i] = std::bit_cast<float>(get_u32(bytes.data() + payload + 4 * i));
  }
  return model;
}

}  // namespace fnh::nn
