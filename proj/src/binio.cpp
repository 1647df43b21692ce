#include "vocseg/common/binio.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace vocseg::binio {

namespace {

constexpr char kMagic[4] = {'V', 'S', 'T', 'N'};

size_t dtype_size(Dtype d) {
  switch (d) {
    case Dtype::f32: return 4;
    case Dtype::f64: return 8;
    case Dtype::u8: return 1;
  }
  throw std::runtime_error("unknown dtype code");
}

}  // namespace

void write_record(std::ostream& os, const TensorRecord& rec) {
  if (rec.extents.size() > 255) throw std::runtime_error("tensor rank exceeds 255");
  os.write(kMagic, 4);
  uint8_t dt = static_cast<uint8_t>(rec.dtype);
  uint8_t rank = static_cast<uint8_t>(rec.extents.size());
  os.write(reinterpret_cast<const char*>(&dt), 1);
  os.write(reinterpret_cast<const char*>(&rank), 1);
  for (uint32_t e : rec.extents) os.write(reinterpret_cast<const char*>(&e), 4);
  const size_t expect = rec.element_count() * dtype_size(rec.dtype);
  if (rec.payload.size() != expect) throw std::runtime_error("payload size mismatch");
  os.write(reinterpret_cast<const char*>(rec.payload.data()),
           static_cast<std::streamsize>(rec.payload.size()));
  if (!os) throw std::runtime_error("tensor write failed");
}

TensorRecord read_record(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("bad tensor magic (expected VSTN)");
  uint8_t dt = 0, rank = 0;
  is.read(reinterpret_cast<char*>(&dt), 1);
  is.read(reinterpret_cast<char*>(&rank), 1);
  if (dt > 2) throw std::runtime_error("unknown dtype code");
  TensorRecord rec;
  rec.dtype = static_cast<Dtype>(dt);
  rec.extents.resize(rank);
  for (int i = 0; i < rank; ++i)
    is.read(reinterpret_cast<char*>(&rec.extents[i]), 4);
  const size_t bytes = rec.element_count() * dtype_size(rec.dtype);
  rec.payload.resize(bytes);
  is.read(reinterpret_cast<char*>(rec.payload.data()), static_cast<std::streamsize>(bytes));
  if (!is) throw std::runtime_error("truncated tensor record");
  return rec;
}

namespace {
template <class T>
TensorRecord make(Dtype dt, const std::vector<uint32_t>& extents, const T* data) {
  TensorRecord rec;
  rec.dtype = dt;
  rec.extents = extents;
  rec.payload.resize(rec.element_count() * sizeof(T));
  std::memcpy(rec.payload.data(), data, rec.payload.size());
  return rec;
}
template <class T>
std::vector<T> unpack(const TensorRecord& rec, Dtype want) {
  if (rec.dtype != want) throw std::runtime_error("tensor dtype mismatch");
  std::vector<T> out(rec.element_count());
  std::memcpy(out.data(), rec.payload.data(), rec.payload.size());
  return out;
}
}  // namespace

TensorRecord make_f32(const std::vector<uint32_t>& e, const float* d) { return make(Dtype::f32, e, d); }
TensorRecord make_f64(const std::vector<uint32_t>& e, const double* d) { return make(Dtype::f64, e, d); }
TensorRecord make_u8(const std::vector<uint32_t>& e, const uint8_t* d) { return make(Dtype::u8, e, d); }

std::vector<float> as_f32(const TensorRecord& rec) { return unpack<float>(rec, Dtype::f32); }
std::vector<double> as_f64(const TensorRecord& rec) { return unpack<double>(rec, Dtype::f64); }
std::vector<uint8_t> as_u8(const TensorRecord& rec) { return unpack<uint8_t>(rec, Dtype::u8); }

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("write failed: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for read: " + path);
  std::string s((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return s;
}

}  // namespace vocseg::binio
