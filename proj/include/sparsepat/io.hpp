#pragma once

#include <cstdint>
#include <string>

#include "sparsepat/tensor.hpp"

namespace sparsepat {

// PTNS tensor container: magic "PTNS", version byte 1, dtype byte
// (0 = f32, 1 = f64), u16 rank, rank x u32 little-endian dims, then the
// row-major little-endian payload.
void write_ptns(const std::string& path, const TensorF& t);
void write_ptns(const std::string& path, const TensorD& t);

enum class PtnsDtype : uint8_t { kF32 = 0, kF64 = 1 };

PtnsDtype peek_ptns_dtype(const std::string& path);
TensorF read_ptns_f32(const std::string& path);   // converts f64 payloads
TensorD read_ptns_f64(const std::string& path);   // converts f32 payloads

// 8-bit binary P5 PGM, linearly scaled so the image maximum maps to 255.
// Rank-2 tensors only.
void write_pgm(const std::string& path, const TensorF& img);

// FNV-1a 64-bit, used for manifest and weight checksums.
uint64_t fnv1a64(const void* data, size_t len);
uint64_t fnv1a64_file(const std::string& path);
std::string hash_hex(uint64_t h);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace sparsepat
