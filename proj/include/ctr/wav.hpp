#pragma once

// Minimal mono WAV I/O: PCM16 and IEEE float32.

#include <span>
#include <string>
#include <vector>

namespace ctr {

enum class WavFormat { Pcm16, Float32 };

struct WavData {
  std::vector<double> samples;
  double sample_rate = 0.0;
};

void write_wav(const std::string& path, std::span<const double> samples,
               double sample_rate, WavFormat format = WavFormat::Float32);

WavData read_wav(const std::string& path);

}  // namespace ctr
