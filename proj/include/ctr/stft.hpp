#pragma once

// Forward/inverse STFT with a square-root Hann window on both sides.
//
// Edge policy: the input is reflect-padded by half a window on each side, so
// frame t covers original samples [t*hop - win/2, t*hop + win/2). With this
// policy T = floor(N / hop) + 1 for an N-sample signal, and inverse
// transformation crops the padding back out. COLA holds at 50% overlap.

#include <span>
#include <vector>

#include "ctr/types.hpp"

namespace ctr {

struct StftConfig {
  double window_ms = 16.0;
  double hop_ms = 8.0;
  double sample_rate = 16000.0;

  std::size_t window_len() const;
  std::size_t hop_len() const;
  std::size_t fft_size() const;  // next power of two >= window_len
  std::size_t num_bins() const { return fft_size() / 2 + 1; }
  std::size_t num_frames(std::size_t num_samples) const;

  void validate() const;
};

Spectrogram stft(std::span<const double> signal, const StftConfig& cfg);

std::vector<double> istft(const Spectrogram& spec, const StftConfig& cfg,
                          std::size_t out_len);

// In-place radix-2 FFT helpers (power-of-two length).
void fft_forward(std::vector<cdouble>& buf);
void fft_inverse(std::vector<cdouble>& buf);

}  // namespace ctr
