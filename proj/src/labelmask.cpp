#include "vocseg/metrics/labelmask.hpp"

#include <fstream>
#include <json.hpp>
#include <stdexcept>

#include "vocseg/common/binio.hpp"

namespace vocseg::metrics {

void save_mask(const std::string& path, const LabelMask& mask,
               const std::vector<std::string>& class_names) {
  {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write mask: " + path);
    binio::write_record(os, binio::make_u8({static_cast<uint32_t>(mask.height),
                                            static_cast<uint32_t>(mask.width)},
                                           mask.values.data()));
  }
  nlohmann::json side;
  side["spacing_mm"] = mask.spacing_mm;
  side["class_names"] = class_names;
  std::ofstream js(path + ".json", std::ios::trunc);
  if (!js) throw std::runtime_error("cannot write mask sidecar: " + path + ".json");
  js << side.dump(2) << "\n";
}

LabelMask load_mask(const std::string& path, std::vector<std::string>* class_names) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read mask: " + path);
  const binio::TensorRecord rec = binio::read_record(is);
  if (rec.dtype != binio::Dtype::u8 || rec.extents.size() != 2)
    throw std::runtime_error("mask file must be a rank-2 u8 raster: " + path);
  LabelMask m;
  m.height = static_cast<int>(rec.extents[0]);
  m.width = static_cast<int>(rec.extents[1]);
  m.values = binio::as_u8(rec);

  std::ifstream js(path + ".json");
  if (js) {
    nlohmann::json side = nlohmann::json::parse(js);
    m.spacing_mm = side.value("spacing_mm", 1.0);
    if (class_names && side.contains("class_names"))
      *class_names = side["class_names"].get<std::vector<std::string>>();
  }
  return m;
}

}  // namespace vocseg::metrics
