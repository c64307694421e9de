#include "pgnd/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

#include "pgnd/error.hpp"

// The format is little-endian; this code assumes a little-endian host
// (x86-64 / aarch64), which covers every supported target.

namespace pgnd::tg {

namespace {

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& in, const char* what) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw FormatError(std::string("checkpoint: truncated reading ") + what);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const NamedTensors& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("checkpoint: cannot write '" + path + "'");
  out.write("PGND", 4);
  write_u32(out, 1u);
  write_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (!t.defined()) throw ContractError("checkpoint: undefined tensor '" + name + "'");
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(out, static_cast<std::uint32_t>(t.shape().size()));
    for (auto d : t.shape()) write_u32(out, static_cast<std::uint32_t>(d));
    out.write(reinterpret_cast<const char*>(t.data().data()),
              static_cast<std::streamsize>(t.data().size() * sizeof(double)));
  }
  if (!out) throw FormatError("checkpoint: write failed for '" + path + "'");
}

NamedTensors load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("checkpoint: cannot open '" + path + "'");
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "PGND", 4) != 0) {
    throw FormatError("checkpoint: bad magic in '" + path + "'");
  }
  const std::uint32_t version = read_u32(in, "version");
  if (version != 1u) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  const std::uint32_t count = read_u32(in, "tensor count");

  NamedTensors out;
  out.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint32_t name_len = read_u32(in, "name length");
    if (name_len > (1u << 20)) throw FormatError("checkpoint: absurd name length");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw FormatError("checkpoint: truncated reading name");
    const std::uint32_t rank = read_u32(in, "rank");
    if (rank > 8) throw FormatError("checkpoint: absurd rank");
    std::vector<std::int64_t> shape;
    std::uint64_t total = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      const std::uint32_t d = read_u32(in, "dim");
      shape.push_back(static_cast<std::int64_t>(d));
      total *= d;
    }
    if (total > (1ull << 31)) throw FormatError("checkpoint: absurd tensor size");
    std::vector<double> data(static_cast<std::size_t>(total));
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(total * sizeof(double)));
    if (!in) throw FormatError("checkpoint: truncated reading data of '" + name + "'");
    out.emplace_back(std::move(name), Tensor::from(std::move(data), std::move(shape)));
  }
  return out;
}

}  // namespace pgnd::tg
