#pragma once

#include <fstream>
#include <json.hpp>

#include "vocseg/model/network.hpp"
#include "vocseg/numcore/serialize.hpp"

namespace vocseg::model {

inline nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"image_size", c.image_size},
          {"patch_size", c.patch_size},
          {"d_model", c.d_model},
          {"n_heads", c.n_heads},
          {"n_encoder_layers", c.n_encoder_layers},
          {"n_decoder_layers", c.n_decoder_layers},
          {"mlp_ratio", c.mlp_ratio},
          {"n_audio_features", c.n_audio_features},
          {"n_audio_frames", c.n_audio_frames},
          {"n_phono_classes", c.n_phono_classes},
          {"n_seg_classes", c.n_seg_classes},
          {"fusion_mode", to_string(c.fusion_mode)},
          {"modality_dropout_p", c.modality_dropout_p},
          {"projection_dim", c.projection_dim}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.image_size = j.at("image_size").get<int>();
  c.patch_size = j.at("patch_size").get<int>();
  c.d_model = j.at("d_model").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.n_encoder_layers = j.at("n_encoder_layers").get<int>();
  c.n_decoder_layers = j.at("n_decoder_layers").get<int>();
  c.mlp_ratio = j.at("mlp_ratio").get<int>();
  c.n_audio_features = j.at("n_audio_features").get<int>();
  c.n_audio_frames = j.at("n_audio_frames").get<int>();
  c.n_phono_classes = j.at("n_phono_classes").get<int>();
  c.n_seg_classes = j.at("n_seg_classes").get<int>();
  c.fusion_mode = fusion_mode_from_string(j.at("fusion_mode").get<std::string>());
  c.modality_dropout_p = j.at("modality_dropout_p").get<double>();
  c.projection_dim = j.at("projection_dim").get<int>();
  return c;
}

// Checkpoint file: magic "VSCK", u64 manifest length, manifest JSON
// (config, parameter names/shapes/frozen flags, init seed), then one VSTN
// record per parameter in manifest order.
inline void save_checkpoint(const Network<float>& net, const std::string& path) {
  nlohmann::json manifest;
  manifest["config"] = config_to_json(net.config());
  manifest["seed"] = net.params().seed();
  nlohmann::json plist = nlohmann::json::array();
  for (const auto& e : net.params().entries()) {
    nlohmann::json p;
    p["name"] = e.name;
    p["shape"] = e.tensor.shape();
    p["frozen"] = e.frozen;
    plist.push_back(std::move(p));
  }
  manifest["parameters"] = std::move(plist);

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
  const std::string mjson = manifest.dump();
  os.write("VSCK", 4);
  const uint64_t len = mjson.size();
  os.write(reinterpret_cast<const char*>(&len), 8);
  os.write(mjson.data(), static_cast<std::streamsize>(mjson.size()));
  for (const auto& e : net.params().entries())
    binio::write_record(os, nc::to_record(e.tensor));
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

inline Network<float> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "VSCK")
    throw std::runtime_error("bad checkpoint magic: " + path);
  uint64_t len = 0;
  is.read(reinterpret_cast<char*>(&len), 8);
  std::string mjson(len, '\0');
  is.read(mjson.data(), static_cast<std::streamsize>(len));
  const nlohmann::json manifest = nlohmann::json::parse(mjson);

  Network<float> net(config_from_json(manifest.at("config")),
                     manifest.at("seed").get<uint64_t>());
  for (const auto& p : manifest.at("parameters")) {
    const std::string name = p.at("name").get<std::string>();
    const binio::TensorRecord rec = binio::read_record(is);
    const ParamEntry<float>* e = net.params().find(name);
    if (!e) throw std::runtime_error("checkpoint has unknown parameter: " + name);
    auto loaded = nc::from_record<float>(rec);
    if (loaded.shape() != e->tensor.shape())
      throw std::runtime_error("checkpoint shape mismatch for " + name);
    const_cast<ParamEntry<float>*>(e)->tensor.values() = loaded.values();
    if (p.at("frozen").get<bool>() != e->frozen)
      throw std::runtime_error("checkpoint frozen-flag mismatch for " + name);
  }
  return net;
}

}  // namespace vocseg::model
