#pragma once

// Directory serialization for mixture sets and estimates (one mono WAV per
// channel plus JSON manifests), scene-config JSON, and report JSON.

#include <span>
#include <string>
#include <vector>

#include "ctr/losses.hpp"
#include "ctr/simulator.hpp"
#include "ctr/stft.hpp"
#include "ctr/types.hpp"
#include "ctr/wav.hpp"

namespace ctr {

// Writes mixtures, activity and (when present) ground-truth signals under
// dir: manifest.json, activity.json and one WAV per channel.
void write_mixture_set(const std::string& dir, const MixtureSet& set,
                       const StftConfig& cfg,
                       WavFormat format = WavFormat::Float32);

MixtureSet read_mixture_set(const std::string& dir,
                            StftConfig* cfg_out = nullptr);

void write_estimates(const std::string& dir,
                     std::span<const Spectrogram> estimates,
                     const StftConfig& cfg, std::size_t num_samples,
                     WavFormat format = WavFormat::Float32);

std::vector<Spectrogram> read_estimates(const std::string& dir,
                                        StftConfig* cfg_out = nullptr,
                                        std::size_t* num_samples = nullptr);

SceneConfig scene_config_from_json(const std::string& json_text);
std::string scene_config_to_json(const SceneConfig& cfg);

std::string loss_breakdown_to_json(const LossBreakdown& breakdown);

// Activity helpers shared by the directory format and the CLI --mute flag.
std::string activity_to_json(const ActivityTimeline& timeline);
ActivityTimeline activity_from_json(const std::string& json_text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace ctr
