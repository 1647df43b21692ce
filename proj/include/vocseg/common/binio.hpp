#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <iosfwd>
#include <string>
#include <vector>

namespace vocseg::binio {

static_assert(std::endian::native == std::endian::little,
              "tensor files are little-endian; big-endian hosts are unsupported");

enum class Dtype : uint8_t { f32 = 0, f64 = 1, u8 = 2 };

// One "VSTN" record: magic, u8 dtype, u8 rank, u32 extents, raw payload.
struct TensorRecord {
  Dtype dtype = Dtype::f32;
  std::vector<uint32_t> extents;
  std::vector<std::byte> payload;

  size_t element_count() const {
    size_t n = 1;
    for (uint32_t e : extents) n *= e;
    return n;
  }
};

void write_record(std::ostream& os, const TensorRecord& rec);
TensorRecord read_record(std::istream& is);

TensorRecord make_f32(const std::vector<uint32_t>& extents, const float* data);
TensorRecord make_f64(const std::vector<uint32_t>& extents, const double* data);
TensorRecord make_u8(const std::vector<uint32_t>& extents, const uint8_t* data);

std::vector<float> as_f32(const TensorRecord& rec);
std::vector<double> as_f64(const TensorRecord& rec);
std::vector<uint8_t> as_u8(const TensorRecord& rec);

// Whole-file helpers.
void write_file(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);

}  // namespace vocseg::binio
