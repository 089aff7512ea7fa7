#include "ctr/sceneio.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace ctr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<double> to_time(const Spectrogram& spec, const StftConfig& cfg,
                            std::size_t num_samples) {
  return istft(spec, cfg, num_samples);
}

json channel_entry(const std::string& file, const std::string& role) {
  return json{{"file", file}, {"role", role}};
}

void write_channel(const fs::path& dir, json& channels, const std::string& name,
                   const std::string& role, const Spectrogram& spec,
                   const StftConfig& cfg, std::size_t num_samples,
                   WavFormat format, json extra = {}) {
  write_wav((dir / name).string(), to_time(spec, cfg, num_samples),
            cfg.sample_rate, format);
  json entry = channel_entry(name, role);
  if (!extra.empty()) entry.update(extra);
  channels.push_back(std::move(entry));
}

std::vector<std::vector<std::uint8_t>> ranges_to_masks(
    const json& speakers, std::size_t num_samples) {
  std::vector<std::vector<std::uint8_t>> out;
  for (const auto& ranges : speakers) {
    std::vector<std::uint8_t> mask(num_samples, 0);
    for (const auto& r : ranges) {
      const std::size_t b = r.at(0).get<std::size_t>();
      const std::size_t e = r.at(1).get<std::size_t>();
      if (b > e || e > num_samples)
        throw std::runtime_error("activity range out of bounds");
      for (std::size_t s = b; s < e; ++s) mask[s] = 1;
    }
    out.push_back(std::move(mask));
  }
  return out;
}

json masks_to_ranges(const std::vector<std::vector<std::uint8_t>>& masks) {
  json speakers = json::array();
  for (const auto& mask : masks) {
    json ranges = json::array();
    std::size_t begin = 0;
    bool open = false;
    for (std::size_t s = 0; s <= mask.size(); ++s) {
      const bool on = s < mask.size() && mask[s];
      if (on && !open) {
        begin = s;
        open = true;
      } else if (!on && open) {
        ranges.push_back({begin, s});
        open = false;
      }
    }
    speakers.push_back(std::move(ranges));
  }
  return speakers;
}

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << text;
  if (!os) throw std::runtime_error("write failed: " + path);
}

std::string activity_to_json(const ActivityTimeline& timeline) {
  json j{{"num_samples", timeline.num_samples},
         {"speakers", masks_to_ranges(timeline.sample_activity)}};
  return j.dump(2);
}

ActivityTimeline activity_from_json(const std::string& json_text) {
  const json j = json::parse(json_text);
  ActivityTimeline t;
  t.num_samples = j.at("num_samples").get<std::size_t>();
  t.sample_activity = ranges_to_masks(j.at("speakers"), t.num_samples);
  t.num_speakers = t.sample_activity.size();
  return t;
}

void write_mixture_set(const std::string& dir, const MixtureSet& set,
                       const StftConfig& cfg, WavFormat format) {
  cfg.validate();
  fs::create_directories(dir);
  const fs::path root(dir);
  const std::size_t N = set.num_samples;
  if (N == 0) throw std::invalid_argument("mixture set has no sample count");

  json channels = json::array();
  for (std::size_t c = 0; c < set.close_talk.size(); ++c)
    write_channel(root, channels, "close_talk_" + std::to_string(c) + ".wav",
                  "close_talk", set.close_talk[c], cfg, N, format,
                  json{{"speaker", c}});
  for (std::size_t a = 0; a < set.far_field.size(); ++a)
    for (std::size_t m = 0; m < set.far_field[a].size(); ++m)
      write_channel(root, channels,
                    "far_a" + std::to_string(a) + "_m" + std::to_string(m) +
                        ".wav",
                    "far", set.far_field[a][m], cfg, N, format,
                    json{{"array", a}, {"mic", m}});

  if (set.ground_truth) {
    const GroundTruth& gt = *set.ground_truth;
    for (std::size_t c = 0; c < gt.close_talk_speech.size(); ++c)
      write_channel(root, channels,
                    "gt_close_speech_" + std::to_string(c) + ".wav",
                    "gt_close_speech", gt.close_talk_speech[c], cfg, N, format,
                    json{{"speaker", c}});
    for (std::size_t c = 0; c < gt.close_talk_direct.size(); ++c)
      write_channel(root, channels,
                    "gt_close_direct_" + std::to_string(c) + ".wav",
                    "gt_close_direct", gt.close_talk_direct[c], cfg, N, format,
                    json{{"speaker", c}});
    for (std::size_t a = 0; a < gt.direct_path.size(); ++a)
      for (std::size_t m = 0; m < gt.direct_path[a].size(); ++m)
        for (std::size_t c = 0; c < gt.direct_path[a][m].size(); ++c)
          write_channel(root, channels,
                        "gt_direct_a" + std::to_string(a) + "_m" +
                            std::to_string(m) + "_s" + std::to_string(c) +
                            ".wav",
                        "gt_direct", gt.direct_path[a][m][c], cfg, N, format,
                        json{{"array", a}, {"mic", m}, {"speaker", c}});
  }

  json manifest{{"sample_rate", cfg.sample_rate},
                {"window_ms", cfg.window_ms},
                {"hop_ms", cfg.hop_ms},
                {"num_samples", N},
                {"num_speakers", set.close_talk.size()},
                {"channels", channels}};
  write_text_file((root / "manifest.json").string(), manifest.dump(2));
  write_text_file((root / "activity.json").string(),
                  activity_to_json(set.activity));
}

MixtureSet read_mixture_set(const std::string& dir, StftConfig* cfg_out) {
  const fs::path root(dir);
  const json manifest =
      json::parse(read_text_file((root / "manifest.json").string()));
  StftConfig cfg;
  cfg.sample_rate = manifest.at("sample_rate").get<double>();
  cfg.window_ms = manifest.at("window_ms").get<double>();
  cfg.hop_ms = manifest.at("hop_ms").get<double>();
  cfg.validate();
  if (cfg_out) *cfg_out = cfg;

  MixtureSet set;
  set.num_samples = manifest.at("num_samples").get<std::size_t>();
  const std::size_t C = manifest.at("num_speakers").get<std::size_t>();
  set.close_talk.resize(C);

  GroundTruth gt;
  bool any_gt = false;
  auto ensure = [](auto& vec, std::size_t idx) -> auto& {
    if (vec.size() <= idx) vec.resize(idx + 1);
    return vec[idx];
  };

  for (const auto& ch : manifest.at("channels")) {
    const std::string role = ch.at("role").get<std::string>();
    const WavData wav = read_wav((root / ch.at("file").get<std::string>()).string());
    if (wav.samples.size() != set.num_samples)
      throw std::runtime_error("channel length mismatch in manifest: " +
                               ch.at("file").get<std::string>());
    Spectrogram spec = stft(wav.samples, cfg);
    if (role == "close_talk") {
      const std::size_t c = ch.at("speaker").get<std::size_t>();
      if (c >= C) throw std::runtime_error("speaker index out of range");
      set.close_talk[c] = std::move(spec);
    } else if (role == "far") {
      const std::size_t a = ch.at("array").get<std::size_t>();
      const std::size_t m = ch.at("mic").get<std::size_t>();
      ensure(ensure(set.far_field, a), m) = std::move(spec);
    } else if (role == "gt_close_speech") {
      ensure(gt.close_talk_speech, ch.at("speaker").get<std::size_t>()) =
          std::move(spec);
      any_gt = true;
    } else if (role == "gt_close_direct") {
      ensure(gt.close_talk_direct, ch.at("speaker").get<std::size_t>()) =
          std::move(spec);
      any_gt = true;
    } else if (role == "gt_direct") {
      const std::size_t a = ch.at("array").get<std::size_t>();
      const std::size_t m = ch.at("mic").get<std::size_t>();
      const std::size_t c = ch.at("speaker").get<std::size_t>();
      ensure(ensure(ensure(gt.direct_path, a), m), c) = std::move(spec);
      any_gt = true;
    } else {
      throw std::runtime_error("unknown channel role: " + role);
    }
  }
  for (const auto& spec : set.close_talk)
    if (spec.frames() == 0)
      throw std::runtime_error("manifest missing a close-talk channel");
  if (any_gt) set.ground_truth = std::move(gt);

  const fs::path act = root / "activity.json";
  if (fs::exists(act)) {
    set.activity = activity_from_json(read_text_file(act.string()));
    if (set.activity.num_samples != set.num_samples)
      throw std::runtime_error("activity sample count mismatch");
  }
  return set;
}

void write_estimates(const std::string& dir,
                     std::span<const Spectrogram> estimates,
                     const StftConfig& cfg, std::size_t num_samples,
                     WavFormat format) {
  cfg.validate();
  fs::create_directories(dir);
  const fs::path root(dir);
  json files = json::array();
  for (std::size_t c = 0; c < estimates.size(); ++c) {
    const std::string name = "estimate_" + std::to_string(c) + ".wav";
    write_wav((root / name).string(), to_time(estimates[c], cfg, num_samples),
              cfg.sample_rate, format);
    files.push_back(name);
  }
  json manifest{{"sample_rate", cfg.sample_rate},
                {"window_ms", cfg.window_ms},
                {"hop_ms", cfg.hop_ms},
                {"num_samples", num_samples},
                {"files", files}};
  write_text_file((root / "estimates.json").string(), manifest.dump(2));
}

std::vector<Spectrogram> read_estimates(const std::string& dir,
                                        StftConfig* cfg_out,
                                        std::size_t* num_samples) {
  const fs::path root(dir);
  const json manifest =
      json::parse(read_text_file((root / "estimates.json").string()));
  StftConfig cfg;
  cfg.sample_rate = manifest.at("sample_rate").get<double>();
  cfg.window_ms = manifest.at("window_ms").get<double>();
  cfg.hop_ms = manifest.at("hop_ms").get<double>();
  cfg.validate();
  if (cfg_out) *cfg_out = cfg;
  const std::size_t N = manifest.at("num_samples").get<std::size_t>();
  if (num_samples) *num_samples = N;
  std::vector<Spectrogram> out;
  for (const auto& f : manifest.at("files")) {
    const WavData wav = read_wav((root / f.get<std::string>()).string());
    if (wav.samples.size() != N)
      throw std::runtime_error("estimate length mismatch: " +
                               f.get<std::string>());
    out.push_back(stft(wav.samples, cfg));
  }
  return out;
}

SceneConfig scene_config_from_json(const std::string& json_text) {
  const json j = json::parse(json_text);
  SceneConfig cfg;
  cfg.num_speakers = j.value("num_speakers", cfg.num_speakers);
  if (j.contains("arrays")) {
    cfg.arrays.clear();
    for (const auto& a : j.at("arrays"))
      cfg.arrays.push_back({a.at("num_mics").get<std::size_t>(),
                            a.value("radius_m", 0.05)});
  }
  cfg.t60_s = j.value("t60_s", cfg.t60_s);
  cfg.close_talk_min_m = j.value("close_talk_min_m", cfg.close_talk_min_m);
  cfg.close_talk_max_m = j.value("close_talk_max_m", cfg.close_talk_max_m);
  cfg.level_db = j.value("level_db", cfg.level_db);
  cfg.snr_db_min = j.value("snr_db_min", cfg.snr_db_min);
  cfg.snr_db_max = j.value("snr_db_max", cfg.snr_db_max);
  cfg.duration_s = j.value("duration_s", cfg.duration_s);
  const std::string pattern = j.value("pattern", std::string("markov"));
  if (pattern == "full_overlap") cfg.pattern = ActivityPattern::FullOverlap;
  else if (pattern == "no_overlap") cfg.pattern = ActivityPattern::NoOverlap;
  else if (pattern == "markov") cfg.pattern = ActivityPattern::Markov;
  else throw std::runtime_error("unknown activity pattern: " + pattern);
  cfg.markov_switch_hz = j.value("markov_switch_hz", cfg.markov_switch_hz);
  cfg.noise_sources = j.value("noise_sources", cfg.noise_sources);
  cfg.close_tail_scale = j.value("close_tail_scale", cfg.close_tail_scale);
  cfg.far_tail_scale = j.value("far_tail_scale", cfg.far_tail_scale);
  if (j.contains("seed")) {
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.seed_set = true;
  }
  if (j.contains("stft")) {
    const auto& s = j.at("stft");
    cfg.stft.window_ms = s.value("window_ms", cfg.stft.window_ms);
    cfg.stft.hop_ms = s.value("hop_ms", cfg.stft.hop_ms);
    cfg.stft.sample_rate = s.value("sample_rate", cfg.stft.sample_rate);
  }
  if (j.contains("clock_offset_frames"))
    cfg.clock_offset_frames =
        j.at("clock_offset_frames").get<std::vector<int>>();
  return cfg;
}

std::string scene_config_to_json(const SceneConfig& cfg) {
  json arrays = json::array();
  for (const auto& a : cfg.arrays)
    arrays.push_back({{"num_mics", a.num_mics}, {"radius_m", a.radius_m}});
  std::string pattern = "markov";
  if (cfg.pattern == ActivityPattern::FullOverlap) pattern = "full_overlap";
  else if (cfg.pattern == ActivityPattern::NoOverlap) pattern = "no_overlap";
  json j{{"num_speakers", cfg.num_speakers},
         {"arrays", arrays},
         {"t60_s", cfg.t60_s},
         {"close_talk_min_m", cfg.close_talk_min_m},
         {"close_talk_max_m", cfg.close_talk_max_m},
         {"level_db", cfg.level_db},
         {"snr_db_min", cfg.snr_db_min},
         {"snr_db_max", cfg.snr_db_max},
         {"duration_s", cfg.duration_s},
         {"pattern", pattern},
         {"markov_switch_hz", cfg.markov_switch_hz},
         {"noise_sources", cfg.noise_sources},
         {"close_tail_scale", cfg.close_tail_scale},
         {"far_tail_scale", cfg.far_tail_scale},
         {"stft",
          {{"window_ms", cfg.stft.window_ms},
           {"hop_ms", cfg.stft.hop_ms},
           {"sample_rate", cfg.stft.sample_rate}}},
         {"clock_offset_frames", cfg.clock_offset_frames}};
  if (cfg.seed_set) j["seed"] = cfg.seed;
  return j.dump(2);
}

std::string loss_breakdown_to_json(const LossBreakdown& breakdown) {
  json j{{"mc_close_talk", breakdown.mc_close_talk},
         {"mc_far_field", breakdown.mc_far_field},
         {"sa", breakdown.sa},
         {"supervised_speech", breakdown.supervised_speech},
         {"supervised_noise", breakdown.supervised_noise},
         {"pl", breakdown.pl},
         {"cte", breakdown.cte},
         {"total", breakdown.total}};
  return j.dump(2);
}

}  // namespace ctr
