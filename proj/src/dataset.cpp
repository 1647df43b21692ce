#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

#include "vocseg/common/binio.hpp"
#include "vocseg/common/rng.hpp"
#include "vocseg/common/threads.hpp"
#include "vocseg/numcore/serialize.hpp"
#include "vocseg/synthdata/synthdata.hpp"

namespace vocseg::synth {

namespace {

std::string speaker_blob_name(int speaker) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "speaker_%03d.bin", speaker);
  return buf;
}

void write_sample(std::ostream& os, const RawSample& s) {
  binio::write_record(os, nc::to_record(s.image));
  binio::write_record(os, binio::make_u8({static_cast<uint32_t>(s.mask.height),
                                          static_cast<uint32_t>(s.mask.width)},
                                         s.mask.values.data()));
  binio::write_record(os, nc::to_record(s.audio));
  binio::write_record(os, nc::to_record(s.phono));
}

nlohmann::json manifest_to_json(const Manifest& m) {
  nlohmann::json j;
  j["version"] = m.version;
  j["seed"] = m.seed;
  j["config"] = {{"speakers", m.config.speakers},
                 {"frames_per_speaker", m.config.frames_per_speaker},
                 {"augment", m.config.augment},
                 {"seed", m.config.seed},
                 {"audio_frames", m.config.audio_frames},
                 {"n_audio_features", m.config.n_audio_features},
                 {"n_phono_classes", m.config.n_phono_classes},
                 {"audio_noise", m.config.audio_noise}};
  j["frames_per_speaker"] = m.frames_per_speaker;
  j["norm_min"] = m.norm_min;
  j["norm_max"] = m.norm_max;
  j["spacing_mm"] = m.spacing_mm;
  j["class_names"] = m.class_names;
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : m.records)
    recs.push_back({{"speaker", r.speaker}, {"frame", r.frame}, {"aug", r.aug},
                    {"offset", r.offset}});
  j["records"] = std::move(recs);
  return j;
}

Manifest manifest_from_json(const nlohmann::json& j) {
  Manifest m;
  m.version = j.at("version").get<int>();
  m.seed = j.at("seed").get<uint64_t>();
  const auto& c = j.at("config");
  m.config.speakers = c.at("speakers").get<int>();
  m.config.frames_per_speaker = c.at("frames_per_speaker").get<int>();
  m.config.augment = c.at("augment").get<int>();
  m.config.seed = c.at("seed").get<uint64_t>();
  m.config.audio_frames = c.at("audio_frames").get<int>();
  m.config.n_audio_features = c.at("n_audio_features").get<int>();
  m.config.n_phono_classes = c.at("n_phono_classes").get<int>();
  m.config.audio_noise = c.at("audio_noise").get<double>();
  m.frames_per_speaker = j.at("frames_per_speaker").get<std::vector<int>>();
  m.norm_min = j.at("norm_min").get<double>();
  m.norm_max = j.at("norm_max").get<double>();
  m.spacing_mm = j.at("spacing_mm").get<double>();
  m.class_names = j.at("class_names").get<std::vector<std::string>>();
  for (const auto& r : j.at("records"))
    m.records.push_back({r.at("speaker").get<int>(), r.at("frame").get<int>(),
                         r.at("aug").get<int>(), r.at("offset").get<uint64_t>()});
  return m;
}

}  // namespace

Manifest generate_dataset(const GeneratorConfig& cfg, const std::string& out_dir) {
  if (cfg.speakers < 1 || cfg.frames_per_speaker < 1)
    throw std::invalid_argument("generate_dataset: speakers and frames must be positive");
  std::filesystem::create_directories(out_dir);

  Manifest m;
  m.seed = cfg.seed;
  m.config = cfg;
  m.frames_per_speaker.assign(cfg.speakers, cfg.frames_per_speaker);

  struct SpeakerOut {
    std::string blob;
    std::vector<RecordRef> records;
    float lo = 1e30f, hi = -1e30f;
  };
  std::vector<SpeakerOut> outs(cfg.speakers);

  // speakers are independent; record order inside a speaker is
  // (frame asc, aug asc) so the output is deterministic
  const int nt = threads::kernel_threads();
#pragma omp parallel for num_threads(nt) schedule(dynamic)
  for (int sid = 0; sid < cfg.speakers; ++sid) {
    threads::ScopedSerial serial;
    const SpeakerParams sp = speaker_params(cfg.seed, sid);
    std::ostringstream blob(std::ios::binary);
    SpeakerOut& so = outs[sid];
    for (int f = 0; f < cfg.frames_per_speaker; ++f) {
      RawSample base = generate_frame(sp, f, cfg.seed);
      for (int a = 0; a <= cfg.augment; ++a) {
        RawSample s = a == 0
                          ? base
                          : augment(base, rng::mix(cfg.seed, rng::mix(
                                                                 static_cast<uint64_t>(sid) << 24,
                                                                 static_cast<uint64_t>(f) * 8 + a)));
        s.aug = a;
        so.records.push_back(
            {sid, f, a, static_cast<uint64_t>(blob.tellp())});
        write_sample(blob, s);
        for (float v : s.image.values()) {
          so.lo = std::min(so.lo, v);
          so.hi = std::max(so.hi, v);
        }
      }
    }
    so.blob = blob.str();
  }

  float lo = 1e30f, hi = -1e30f;
  for (int sid = 0; sid < cfg.speakers; ++sid) {
    const SpeakerOut& so = outs[sid];
    binio::write_file(out_dir + "/" + speaker_blob_name(sid), so.blob);
    m.records.insert(m.records.end(), so.records.begin(), so.records.end());
    lo = std::min(lo, so.lo);
    hi = std::max(hi, so.hi);
  }
  m.norm_min = lo;
  m.norm_max = hi;

  std::ofstream js(out_dir + "/manifest.json", std::ios::trunc);
  if (!js) throw std::runtime_error("cannot write manifest: " + out_dir);
  js << manifest_to_json(m).dump(2) << "\n";
  return m;
}

Manifest load_manifest(const std::string& dir) {
  std::ifstream is(dir + "/manifest.json");
  if (!is) throw std::runtime_error("no manifest.json in " + dir);
  return manifest_from_json(nlohmann::json::parse(is));
}

RawSample load_record(const std::string& dir, const Manifest& m, size_t index) {
  if (index >= m.records.size()) throw std::out_of_range("record index out of range");
  const RecordRef& ref = m.records[index];
  std::ifstream is(dir + "/" + speaker_blob_name(ref.speaker), std::ios::binary);
  if (!is) throw std::runtime_error("missing speaker blob for speaker " +
                                    std::to_string(ref.speaker));
  is.seekg(static_cast<std::streamoff>(ref.offset));
  RawSample s;
  s.image = nc::from_record<float>(binio::read_record(is));
  const binio::TensorRecord mask_rec = binio::read_record(is);
  s.mask.height = static_cast<int>(mask_rec.extents.at(0));
  s.mask.width = static_cast<int>(mask_rec.extents.at(1));
  s.mask.values = binio::as_u8(mask_rec);
  s.mask.spacing_mm = m.spacing_mm;
  s.audio = nc::from_record<float>(binio::read_record(is));
  s.phono = nc::from_record<float>(binio::read_record(is));
  s.speaker = ref.speaker;
  s.frame = ref.frame;
  s.aug = ref.aug;
  return s;
}

std::vector<double> class_pixel_frequencies(const std::string& dir, const Manifest& m) {
  std::vector<double> counts(m.class_names.size(), 0.0);
  double total = 0;
  for (size_t i = 0; i < m.records.size(); ++i) {
    const RawSample s = load_record(dir, m, i);
    for (uint8_t v : s.mask.values) {
      if (v < counts.size()) counts[v] += 1;
      total += 1;
    }
  }
  if (total > 0)
    for (auto& c : counts) c /= total;
  return counts;
}

Split split_loso(const Manifest& m, int held_out_speaker) {
  const int n_speakers = m.config.speakers;
  if (n_speakers < 3) throw std::invalid_argument("leave-one-speaker-out needs >= 3 speakers");
  if (held_out_speaker < 0 || held_out_speaker >= n_speakers)
    throw std::invalid_argument("unknown speaker " + std::to_string(held_out_speaker));

  Split sp;
  for (size_t i = 0; i < m.records.size(); ++i) {
    const RecordRef& r = m.records[i];
    if (r.speaker == held_out_speaker) {
      if (r.aug == 0) sp.test.push_back(i);
      continue;
    }
    const int frames = m.frames_per_speaker.at(r.speaker);
    const int val_start = static_cast<int>(std::floor(frames * 0.85));
    if (r.frame >= val_start) {
      // validation keeps originals only; augmented copies of validation
      // frames are dropped so no frame index spans two partitions
      if (r.aug == 0) sp.val.push_back(i);
    } else {
      sp.train.push_back(i);
    }
  }
  return sp;
}

}  // namespace vocseg::synth
