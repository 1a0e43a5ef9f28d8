#include "splab/serialize.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "splab/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

namespace splab {

namespace {

constexpr char kMagic[4] = {'S', 'P', 'L', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw config_error("serialize: truncated stream");
  return v;
}

// Reflected CRC-64/XZ table for the ECMA-182 polynomial.
const std::array<std::uint64_t, 256>& crc_table() {
  static const std::array<std::uint64_t, 256> table = [] {
    std::array<std::uint64_t, 256> t{};
    constexpr std::uint64_t poly = 0xc96c5795d7870f42ULL;
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint64_t crc = i;
      for (int b = 0; b < 8; ++b) {
        crc = (crc & 1) ? (crc >> 1) ^ poly : crc >> 1;
      }
      t[i] = crc;
    }
    return t;
  }();
  return table;
}

}  // namespace

void Crc64::update(const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  const auto& table = crc_table();
  for (std::size_t i = 0; i < len; ++i) {
    state_ = table[(state_ ^ p[i]) & 0xff] ^ (state_ >> 8);
  }
}

std::uint64_t crc64(const void* data, std::size_t len) {
  Crc64 c;
  c.update(data, len);
  return c.value();
}

void write_tensor(std::ostream& os, const Tensor& t) {
  os.write(kMagic, sizeof(kMagic));
  write_pod(os, kVersion);
  write_pod(os, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape) write_pod(os, static_cast<std::uint64_t>(d));
  os.write(reinterpret_cast<const char*>(t.data.data()),
           static_cast<std::streamsize>(t.data.size() * sizeof(double)));
}

Tensor read_tensor(std::istream& is) {
  char magic[4];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw config_error("tensor block: bad magic");
  }
  const auto version = read_pod<std::uint32_t>(is);
  if (version != kVersion) {
    throw config_error("tensor block: unsupported version");
  }
  const auto rank = read_pod<std::uint32_t>(is);
  std::vector<std::size_t> shape(rank);
  for (auto& d : shape) d = static_cast<std::size_t>(read_pod<std::uint64_t>(is));
  Tensor t = Tensor::zeros(shape);
  is.read(reinterpret_cast<char*>(t.data.data()),
          static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  if (!is) throw config_error("tensor block: truncated payload");
  return t;
}

const Tensor& Archive::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw config_error("archive: missing tensor '" + name + "'");
}

bool Archive::contains(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return true;
  }
  return false;
}

void write_archive(const std::string& path, const Archive& archive) {
  std::ostringstream body;
  const std::string header = archive.header.dump();
  write_pod(body, static_cast<std::uint64_t>(header.size()));
  body.write(header.data(), static_cast<std::streamsize>(header.size()));
  write_pod(body, static_cast<std::uint32_t>(archive.tensors.size()));
  for (const auto& [name, tensor] : archive.tensors) {
    write_pod(body, static_cast<std::uint32_t>(name.size()));
    body.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_tensor(body, tensor);
  }
  const std::string bytes = body.str();
  const std::uint64_t checksum = crc64(bytes.data(), bytes.size());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw config_error("archive: cannot open for write: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  write_pod(out, checksum);
  if (!out) throw config_error("archive: write failed: " + path);
}

Archive read_archive(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("archive: cannot open: " + path);
  std::ostringstream sink;
  sink << in.rdbuf();
  const std::string all = sink.str();
  if (all.size() < sizeof(std::uint64_t)) {
    throw config_error("archive: file too short: " + path);
  }
  const std::size_t body_len = all.size() - sizeof(std::uint64_t);
  std::uint64_t stored = 0;
  std::memcpy(&stored, all.data() + body_len, sizeof(stored));
  if (crc64(all.data(), body_len) != stored) {
    throw config_error("archive: checksum mismatch: " + path);
  }

  std::istringstream body(all.substr(0, body_len));
  const auto header_len = read_pod<std::uint64_t>(body);
  std::string header(header_len, '\0');
  body.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!body) throw config_error("archive: truncated header");
  Archive archive;
  archive.header = nlohmann::json::parse(header, nullptr, false);
  if (archive.header.is_discarded()) {
    throw config_error("archive: invalid JSON header");
  }
  const auto count = read_pod<std::uint32_t>(body);
  archive.tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint32_t>(body);
    std::string name(name_len, '\0');
    body.read(name.data(), static_cast<std::streamsize>(name_len));
    if (!body) throw config_error("archive: truncated tensor name");
    archive.tensors.emplace_back(std::move(name), read_tensor(body));
  }
  return archive;
}

}  // namespace splab
