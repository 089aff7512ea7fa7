#include "ctr/stft.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ctr {

namespace {

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void fft_radix2(std::vector<cdouble>& a, bool inverse) {
  const std::size_t n = a.size();
  if (!is_pow2(n)) throw std::invalid_argument("fft size must be a power of two");
  // bit reversal
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang =
        (inverse ? 2.0 : -2.0) * std::numbers::pi / static_cast<double>(len);
    const cdouble wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      cdouble w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        cdouble u = a[i + k];
        cdouble v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= inv;
  }
}

// periodic sqrt-Hann
std::vector<double> make_window(std::size_t len) {
  std::vector<double> w(len);
  for (std::size_t i = 0; i < len; ++i) {
    const double h =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                             static_cast<double>(len));
    w[i] = std::sqrt(h);
  }
  return w;
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

void fft_forward(std::vector<cdouble>& buf) { fft_radix2(buf, false); }
void fft_inverse(std::vector<cdouble>& buf) { fft_radix2(buf, true); }

std::size_t StftConfig::window_len() const {
  return static_cast<std::size_t>(std::lround(window_ms * sample_rate / 1000.0));
}

std::size_t StftConfig::hop_len() const {
  return static_cast<std::size_t>(std::lround(hop_ms * sample_rate / 1000.0));
}

std::size_t StftConfig::fft_size() const { return next_pow2(window_len()); }

std::size_t StftConfig::num_frames(std::size_t num_samples) const {
  const std::size_t win = window_len();
  const std::size_t hop = hop_len();
  const std::size_t padded = num_samples + 2 * (win / 2);
  if (padded < win) return 0;
  return (padded - win) / hop + 1;
}

void StftConfig::validate() const {
  const std::size_t win = window_len();
  const std::size_t hop = hop_len();
  if (win == 0 || hop == 0) throw std::invalid_argument("empty STFT window or hop");
  if (win % hop != 0) throw std::invalid_argument("hop must divide window length");
}

Spectrogram stft(std::span<const double> signal, const StftConfig& cfg) {
  cfg.validate();
  const std::size_t win = cfg.window_len();
  const std::size_t hop = cfg.hop_len();
  const std::size_t nfft = cfg.fft_size();
  const std::size_t half = win / 2;
  if (signal.size() < win)
    throw std::invalid_argument("signal shorter than one STFT window");

  // reflect padding by half a window on each side
  const std::size_t n = signal.size();
  std::vector<double> padded(n + 2 * half);
  for (std::size_t i = 0; i < half; ++i)
    padded[i] = signal[half - i];
  for (std::size_t i = 0; i < n; ++i) padded[half + i] = signal[i];
  for (std::size_t i = 0; i < half; ++i)
    padded[half + n + i] = signal[n - 2 - i];

  const std::size_t T = (padded.size() - win) / hop + 1;
  const std::size_t F = nfft / 2 + 1;
  const std::vector<double> w = make_window(win);

  Spectrogram out(T, F, cfg.sample_rate, cfg.window_ms, cfg.hop_ms);
  std::vector<cdouble> buf(nfft);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < win; ++i)
      buf[i] = cdouble(padded[t * hop + i] * w[i], 0.0);
    for (std::size_t i = win; i < nfft; ++i) buf[i] = cdouble(0.0, 0.0);
    fft_forward(buf);
    for (std::size_t f = 0; f < F; ++f) out.at(t, f) = buf[f];
  }
  return out;
}

std::vector<double> istft(const Spectrogram& spec, const StftConfig& cfg,
                          std::size_t out_len) {
  cfg.validate();
  const std::size_t win = cfg.window_len();
  const std::size_t hop = cfg.hop_len();
  const std::size_t nfft = cfg.fft_size();
  const std::size_t half = win / 2;
  const std::size_t F = nfft / 2 + 1;
  if (spec.bins() != F || spec.window_ms() != cfg.window_ms ||
      spec.hop_ms() != cfg.hop_ms || spec.sample_rate() != cfg.sample_rate)
    throw std::invalid_argument("spectrogram was not produced with this config");

  const std::size_t T = spec.frames();
  const std::vector<double> w = make_window(win);
  std::vector<double> acc((T - 1) * hop + win, 0.0);
  std::vector<double> norm(acc.size(), 0.0);
  std::vector<cdouble> buf(nfft);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t f = 0; f < F; ++f) buf[f] = spec.at(t, f);
    for (std::size_t f = F; f < nfft; ++f) buf[f] = std::conj(spec.at(t, nfft - f));
    fft_inverse(buf);
    for (std::size_t i = 0; i < win; ++i) {
      acc[t * hop + i] += buf[i].real() * w[i];
      norm[t * hop + i] += w[i] * w[i];
    }
  }
  std::vector<double> out(out_len, 0.0);
  for (std::size_t i = 0; i < out_len; ++i) {
    const std::size_t j = i + half;
    if (j < acc.size() && norm[j] > 1e-12) out[i] = acc[j] / norm[j];
  }
  return out;
}

}  // namespace ctr
