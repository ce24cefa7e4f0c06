#include "sparsepat/io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#include "sparsepat/common.hpp"

namespace sparsepat {

namespace {

// All PTNS integers are little-endian. x86 is little-endian but the byte
// level writer keeps the format well-defined elsewhere too.
template <typename T>
void put_le(std::string& out, T v) {
  for (size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<char>((static_cast<uint64_t>(v) >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(const unsigned char* p) {
  uint64_t v = 0;
  for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
  return static_cast<T>(v);
}

template <typename T>
void write_ptns_impl(const std::string& path, const Tensor<T>& t, PtnsDtype dtype) {
  std::string buf;
  buf.reserve(16 + static_cast<size_t>(t.numel()) * sizeof(T));
  buf += "PTNS";
  buf.push_back(1);  // version
  buf.push_back(static_cast<char>(dtype));
  if (t.rank() > 0xFFFF) throw InvalidArgument("PTNS rank exceeds u16");
  put_le<uint16_t>(buf, static_cast<uint16_t>(t.rank()));
  for (int i = 0; i < t.rank(); ++i) {
    if (t.dim(i) > 0xFFFFFFFFLL) throw InvalidArgument("PTNS dim exceeds u32");
    put_le<uint32_t>(buf, static_cast<uint32_t>(t.dim(i)));
  }
  for (int64_t i = 0; i < t.numel(); ++i) {
    T v = t[i];
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    buf.append(reinterpret_cast<const char*>(raw), sizeof(T));
  }
  write_text_file(path, buf);
}

struct PtnsHeader {
  PtnsDtype dtype;
  std::vector<int64_t> shape;
  size_t payload_offset;
};

PtnsHeader parse_header(const std::string& raw, const std::string& path) {
  if (raw.size() < 8 || raw.compare(0, 4, "PTNS") != 0)
    throw IoError("not a PTNS file: " + path);
  const unsigned char* p = reinterpret_cast<const unsigned char*>(raw.data());
  if (p[4] != 1) throw IoError("unsupported PTNS version in " + path);
  if (p[5] > 1) throw IoError("unsupported PTNS dtype in " + path);
  PtnsHeader h;
  h.dtype = static_cast<PtnsDtype>(p[5]);
  uint16_t rank = get_le<uint16_t>(p + 6);
  size_t off = 8;
  if (raw.size() < off + 4u * rank) throw IoError("truncated PTNS header: " + path);
  for (uint16_t i = 0; i < rank; ++i) {
    h.shape.push_back(static_cast<int64_t>(get_le<uint32_t>(p + off)));
    off += 4;
  }
  h.payload_offset = off;
  return h;
}

template <typename T>
Tensor<T> read_ptns_impl(const std::string& path) {
  std::string raw = read_text_file(path);
  PtnsHeader h = parse_header(raw, path);
  int64_t n = Tensor<T>::count(h.shape);
  size_t elem = h.dtype == PtnsDtype::kF32 ? 4 : 8;
  if (raw.size() != h.payload_offset + static_cast<size_t>(n) * elem)
    throw IoError("PTNS payload size mismatch: " + path);
  Tensor<T> t(h.shape);
  const unsigned char* p =
      reinterpret_cast<const unsigned char*>(raw.data()) + h.payload_offset;
  for (int64_t i = 0; i < n; ++i) {
    if (h.dtype == PtnsDtype::kF32) {
      uint32_t bits = get_le<uint32_t>(p + 4 * i);
      float v;
      std::memcpy(&v, &bits, 4);
      t[i] = static_cast<T>(v);
    } else {
      uint64_t bits = get_le<uint64_t>(p + 8 * i);
      double v;
      std::memcpy(&v, &bits, 8);
      t[i] = static_cast<T>(v);
    }
  }
  return t;
}

}  // namespace

void write_ptns(const std::string& path, const TensorF& t) {
  write_ptns_impl(path, t, PtnsDtype::kF32);
}

void write_ptns(const std::string& path, const TensorD& t) {
  write_ptns_impl(path, t, PtnsDtype::kF64);
}

PtnsDtype peek_ptns_dtype(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char head[6];
  if (!in.read(head, 6) || std::memcmp(head, "PTNS", 4) != 0)
    throw IoError("not a PTNS file: " + path);
  return static_cast<PtnsDtype>(static_cast<unsigned char>(head[5]));
}

TensorF read_ptns_f32(const std::string& path) { return read_ptns_impl<float>(path); }
TensorD read_ptns_f64(const std::string& path) { return read_ptns_impl<double>(path); }

void write_pgm(const std::string& path, const TensorF& img) {
  if (img.rank() != 2) throw InvalidArgument("PGM export expects a rank-2 tensor");
  int64_t h = img.dim(0), w = img.dim(1);
  float mx = 0.0f;
  for (int64_t i = 0; i < img.numel(); ++i) mx = std::max(mx, img[i]);
  float scale = mx > 0.0f ? 255.0f / mx : 0.0f;
  std::string buf = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  buf.reserve(buf.size() + static_cast<size_t>(h * w));
  for (int64_t i = 0; i < img.numel(); ++i) {
    float v = img[i] * scale;
    v = std::min(255.0f, std::max(0.0f, v));
    buf.push_back(static_cast<char>(static_cast<unsigned char>(v + 0.5f)));
  }
  write_text_file(path, buf);
}

uint64_t fnv1a64(const void* data, size_t len) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  uint64_t h = 0xCBF29CE484222325ULL;
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

uint64_t fnv1a64_file(const std::string& path) {
  std::string raw = read_text_file(path);
  return fnv1a64(raw.data(), raw.size());
}

std::string hash_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("short write to " + path);
}

}  // namespace sparsepat
