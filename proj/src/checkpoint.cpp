#include "girl/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "girl/errors.hpp"

namespace girl {

namespace {

void put_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw IoError("checkpoint: truncated header field");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

void put_f32_raw(std::ostream& out, const float* data, size_t n) {
  // The build targets little-endian hosts; raw f32 bytes are the format.
  static_assert(sizeof(float) == 4);
  out.write(reinterpret_cast<const char*>(data),
            static_cast<std::streamsize>(n * 4));
}

}  // namespace

void save_checkpoint(
    const std::string& path,
    const std::vector<std::pair<std::string, const NdArray*>>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("checkpoint: cannot write " + path);
  out.write(kCheckpointMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, arr] : tensors) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<uint32_t>(arr->rank()));
    for (int d : arr->shape) put_u32(out, static_cast<uint32_t>(d));
    put_f32_raw(out, arr->data.data(), static_cast<size_t>(arr->size()));
  }
  if (!out) throw IoError("checkpoint: write failed for " + path);
}

std::map<std::string, NdArray> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw IoError("checkpoint: bad magic in " + path);
  const uint32_t version = get_u32(in);
  if (version != kCheckpointVersion)
    throw IoError("checkpoint: unsupported version in " + path);
  const uint32_t count = get_u32(in);
  std::map<std::string, NdArray> out;
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = get_u32(in);
    if (name_len > 4096) throw IoError("checkpoint: implausible name length");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const uint32_t rank = get_u32(in);
    if (rank > 8) throw IoError("checkpoint: implausible tensor rank");
    std::vector<int> shape(rank);
    long total = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      shape[d] = static_cast<int>(get_u32(in));
      total *= shape[d];
    }
    if (total < 0 || total > (1L << 30))
      throw IoError("checkpoint: implausible tensor size");
    NdArray arr = NdArray::zeros(shape);
    in.read(reinterpret_cast<char*>(arr.data.data()),
            static_cast<std::streamsize>(total * 4));
    if (!in) throw IoError("checkpoint: truncated tensor data in " + path);
    if (!out.emplace(std::move(name), std::move(arr)).second)
      throw IoError("checkpoint: duplicate tensor name in " + path);
  }
  return out;
}

void restore_tensors(
    const std::map<std::string, NdArray>& loaded,
    const std::vector<std::pair<std::string, NdArray*>>& dests) {
  for (const auto& [name, dst] : dests) {
    auto it = loaded.find(name);
    if (it == loaded.end())
      throw IoError("checkpoint: missing tensor " + name);
    if (it->second.shape != dst->shape)
      throw IoError("checkpoint: shape mismatch for " + name + ": file " +
                    it->second.shape_str() + " vs model " + dst->shape_str());
    dst->data = it->second.data;
  }
}

}  // namespace girl
