#include "ctr/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ctr {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

std::uint32_t get_u32(const char* p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}
std::uint16_t get_u16(const char* p) {
  std::uint16_t v;
  std::memcpy(&v, p, 2);
  return v;
}

}  // namespace

void write_wav(const std::string& path, std::span<const double> samples,
               double sample_rate, WavFormat format) {
  const std::uint16_t bits = format == WavFormat::Pcm16 ? 16 : 32;
  const std::uint16_t fmt_tag = format == WavFormat::Pcm16 ? 1 : 3;
  const std::uint32_t rate = static_cast<std::uint32_t>(std::llround(sample_rate));
  const std::uint16_t block = bits / 8;
  const std::uint32_t data_size =
      static_cast<std::uint32_t>(samples.size()) * block;

  std::string buf;
  buf.reserve(44 + data_size);
  buf += "RIFF";
  put_u32(buf, 36 + data_size);
  buf += "WAVEfmt ";
  put_u32(buf, 16);
  put_u16(buf, fmt_tag);
  put_u16(buf, 1);  // mono
  put_u32(buf, rate);
  put_u32(buf, rate * block);
  put_u16(buf, block);
  put_u16(buf, bits);
  buf += "data";
  put_u32(buf, data_size);
  if (format == WavFormat::Pcm16) {
    for (double s : samples) {
      const double clipped = std::clamp(s, -1.0, 1.0);
      const auto q = static_cast<std::int16_t>(std::lround(clipped * 32767.0));
      put_u16(buf, static_cast<std::uint16_t>(q));
    }
  } else {
    for (double s : samples) {
      const float f = static_cast<float>(s);
      std::uint32_t v;
      std::memcpy(&v, &f, 4);
      put_u32(buf, v);
    }
  }

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!os) throw std::runtime_error("write failed: " + path);
}

WavData read_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  std::string buf((std::istreambuf_iterator<char>(is)),
                  std::istreambuf_iterator<char>());
  if (buf.size() < 44 || buf.compare(0, 4, "RIFF") != 0 ||
      buf.compare(8, 4, "WAVE") != 0)
    throw std::runtime_error("not a RIFF/WAVE file: " + path);

  WavData out;
  std::uint16_t fmt_tag = 0, channels = 0, bits = 0;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const std::string id = buf.substr(pos, 4);
    const std::uint32_t size = get_u32(buf.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > buf.size())
      throw std::runtime_error("truncated chunk in " + path);
    if (id == "fmt ") {
      if (size < 16) throw std::runtime_error("bad fmt chunk in " + path);
      fmt_tag = get_u16(buf.data() + body);
      channels = get_u16(buf.data() + body + 2);
      out.sample_rate = get_u32(buf.data() + body + 4);
      bits = get_u16(buf.data() + body + 14);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw std::runtime_error("data before fmt in " + path);
      if (channels != 1)
        throw std::runtime_error("only mono WAV supported: " + path);
      if (fmt_tag == 1 && bits == 16) {
        const std::size_t n = size / 2;
        out.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
          const auto v =
              static_cast<std::int16_t>(get_u16(buf.data() + body + 2 * i));
          out.samples[i] = static_cast<double>(v) / 32767.0;
        }
      } else if (fmt_tag == 3 && bits == 32) {
        const std::size_t n = size / 4;
        out.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
          const std::uint32_t v = get_u32(buf.data() + body + 4 * i);
          float f;
          std::memcpy(&f, &v, 4);
          out.samples[i] = static_cast<double>(f);
        }
      } else {
        throw std::runtime_error("unsupported WAV format in " + path);
      }
      return out;
    }
    pos = body + size + (size & 1);  // chunks are word aligned
  }
  throw std::runtime_error("no data chunk in " + path);
}

}  // namespace ctr
