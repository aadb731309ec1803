#include "locrel/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "locrel/error.hpp"

namespace locrel::checkpoint {

namespace {

constexpr char kMagic[8] = {'L', 'O', 'C', 'R', 'E', 'L', 'C', 'K'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& out, uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
void write_f64(std::ostream& out, double v) { out.write(reinterpret_cast<const char*>(&v), 8); }

uint32_t read_u32(std::istream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
uint64_t read_u64(std::istream& in) {
  uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
double read_f64(std::istream& in) {
  double v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

void write_name(std::ostream& out, const std::string& name) {
  write_u32(out, static_cast<uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
}

std::string read_name(std::istream& in) {
  const uint32_t len = read_u32(in);
  if (len > 4096) throw IoError("checkpoint: implausible name length");
  std::string name(len, '\0');
  in.read(name.data(), len);
  return name;
}

Meta read_header(std::istream& in, const std::string& path) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw IoError("not a checkpoint file: " + path);
  }
  const uint32_t version = read_u32(in);
  if (version != kVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version) + " in " + path);
  }
  Meta meta;
  meta.net.image_size = static_cast<int>(read_u32(in));
  meta.net.k = static_cast<int>(read_u32(in));
  meta.net.rgb_baseline = read_u32(in) != 0;
  for (int i = 0; i < 3; ++i) meta.net.widths[i] = static_cast<int>(read_u32(in));
  meta.net.seed = read_u64(in);
  meta.alpha = read_f64(in);
  if (!in) throw IoError("truncated checkpoint header in " + path);
  return meta;
}

}  // namespace

void save(const std::string& path, const Meta& meta, const net::ParamStore& store) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(kMagic, 8);
  write_u32(out, kVersion);
  write_u32(out, static_cast<uint32_t>(meta.net.image_size));
  write_u32(out, static_cast<uint32_t>(meta.net.k));
  write_u32(out, meta.net.rgb_baseline ? 1 : 0);
  for (int i = 0; i < 3; ++i) write_u32(out, static_cast<uint32_t>(meta.net.widths[i]));
  write_u64(out, meta.net.seed);
  write_f64(out, meta.alpha);

  write_u32(out, static_cast<uint32_t>(store.params().size()));
  for (const auto& [name, t] : store.params()) {
    write_name(out, name);
    write_u32(out, static_cast<uint32_t>(t.ndim()));
    for (int i = 0; i < t.ndim(); ++i) write_u64(out, static_cast<uint64_t>(t.dim(i)));
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
  write_u32(out, static_cast<uint32_t>(store.buffers().size()));
  for (const auto& [name, buf] : store.buffers()) {
    write_name(out, name);
    write_u64(out, static_cast<uint64_t>(buf->size()));
    out.write(reinterpret_cast<const char*>(buf->data()),
              static_cast<std::streamsize>(buf->size() * sizeof(double)));
  }
  if (!out) throw IoError("short write to " + path);
}

Meta peek(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_header(in, path);
}

void load_into(const std::string& path, net::TwoStreamNet& network) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  const Meta meta = read_header(in, path);
  const net::NetConfig& cfg = network.config();
  if (meta.net.image_size != cfg.image_size || meta.net.k != cfg.k ||
      meta.net.rgb_baseline != cfg.rgb_baseline || meta.net.widths != cfg.widths) {
    throw IoError("checkpoint architecture does not match the constructed network: " + path);
  }

  const uint32_t nparams = read_u32(in);
  const auto& params = network.store().params();
  if (nparams != params.size()) {
    throw IoError("checkpoint parameter count mismatch in " + path);
  }
  for (const auto& [name, t] : params) {
    const std::string stored = read_name(in);
    if (stored != name) {
      throw IoError("checkpoint parameter order mismatch: expected '" + name + "', found '" +
                    stored + "'");
    }
    const uint32_t nd = read_u32(in);
    if (static_cast<int>(nd) != t.ndim()) throw IoError("rank mismatch for " + name);
    for (int i = 0; i < t.ndim(); ++i) {
      if (read_u64(in) != static_cast<uint64_t>(t.dim(i))) {
        throw IoError("shape mismatch for " + name);
      }
    }
    diff::Tensor tt = t;
    in.read(reinterpret_cast<char*>(tt.data()),
            static_cast<std::streamsize>(tt.numel() * sizeof(double)));
  }
  const uint32_t nbuf = read_u32(in);
  const auto& buffers = network.store().buffers();
  if (nbuf != buffers.size()) throw IoError("checkpoint buffer count mismatch in " + path);
  for (const auto& [name, buf] : buffers) {
    const std::string stored = read_name(in);
    if (stored != name) throw IoError("checkpoint buffer order mismatch at '" + name + "'");
    const uint64_t len = read_u64(in);
    if (len != buf->size()) throw IoError("buffer length mismatch for " + name);
    in.read(reinterpret_cast<char*>(buf->data()),
            static_cast<std::streamsize>(buf->size() * sizeof(double)));
  }
  if (!in) throw IoError("truncated checkpoint data in " + path);
}

}  // namespace locrel::checkpoint
