#pragma once

#include "vocseg/common/binio.hpp"
#include "vocseg/numcore/tensor.hpp"

namespace vocseg::nc {

inline std::vector<uint32_t> to_extents(const Shape& s) {
  std::vector<uint32_t> e;
  e.reserve(s.size());
  for (int d : s) e.push_back(static_cast<uint32_t>(d));
  return e;
}

inline Shape from_extents(const std::vector<uint32_t>& e) {
  Shape s;
  s.reserve(e.size());
  for (uint32_t d : e) s.push_back(static_cast<int>(d));
  return s;
}

inline binio::TensorRecord to_record(const TensorT<float>& t) {
  return binio::make_f32(to_extents(t.shape()), t.values().data());
}
inline binio::TensorRecord to_record(const TensorT<double>& t) {
  return binio::make_f64(to_extents(t.shape()), t.values().data());
}

template <class S>
TensorT<S> from_record(const binio::TensorRecord& rec);

template <>
inline TensorT<float> from_record<float>(const binio::TensorRecord& rec) {
  return TensorT<float>::from(from_extents(rec.extents), binio::as_f32(rec));
}
template <>
inline TensorT<double> from_record<double>(const binio::TensorRecord& rec) {
  return TensorT<double>::from(from_extents(rec.extents), binio::as_f64(rec));
}

}  // namespace vocseg::nc
