#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace wpeloc {

struct WavData {
  std::vector<double> samples;  // mono, nominally in [-1, 1]
  double sample_rate{0.0};
};

namespace detail {

inline std::uint32_t read_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}
inline std::uint16_t read_u16(const unsigned char* p) {
  return std::uint16_t(p[0]) | (std::uint16_t(p[1]) << 8);
}
inline void put_u32(std::string& s, std::uint32_t v) {
  s.push_back(char(v & 0xff));
  s.push_back(char((v >> 8) & 0xff));
  s.push_back(char((v >> 16) & 0xff));
  s.push_back(char((v >> 24) & 0xff));
}
inline void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(char(v & 0xff));
  s.push_back(char((v >> 8) & 0xff));
}

}  // namespace detail

// Reads a mono RIFF/WAVE file. Accepts 16-bit PCM (format 1) and 32-bit float
// (format 3), any sample rate. Unknown chunks are skipped.
inline WavData read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open wav file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw std::runtime_error("not a RIFF/WAVE file: " + path);

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data_ptr = nullptr;
  std::uint32_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    const std::uint32_t chunk_len = detail::read_u32(hdr + 4);
    const unsigned char* body = hdr + 8;
    if (pos + 8 + chunk_len > bytes.size()) break;
    if (std::memcmp(hdr, "fmt ", 4) == 0 && chunk_len >= 16) {
      format = detail::read_u16(body);
      channels = detail::read_u16(body + 2);
      rate = detail::read_u32(body + 4);
      bits = detail::read_u16(body + 14);
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data_ptr = body;
      data_len = chunk_len;
    }
    pos += 8 + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }
  if (!data_ptr || rate == 0) throw std::runtime_error("wav missing fmt/data chunk: " + path);
  if (channels != 1) throw std::runtime_error("wav must be mono: " + path);

  WavData out;
  out.sample_rate = static_cast<double>(rate);
  if (format == 1 && bits == 16) {
    const std::size_t n = data_len / 2;
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::int16_t v = static_cast<std::int16_t>(detail::read_u16(data_ptr + 2 * i));
      out.samples[i] = static_cast<double>(v) / 32768.0;
    }
  } else if (format == 3 && bits == 32) {
    const std::size_t n = data_len / 4;
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t u = detail::read_u32(data_ptr + 4 * i);
      float f;
      std::memcpy(&f, &u, 4);
      out.samples[i] = static_cast<double>(f);
    }
  } else {
    throw std::runtime_error("unsupported wav encoding (want PCM16 or float32): " + path);
  }
  return out;
}

enum class WavFormat { Pcm16, Float32 };

// Writes a mono WAV file. Pcm16 clips and rounds; Float32 stores values as-is.
inline void write_wav(const std::string& path, const std::vector<double>& samples, double sample_rate,
                      WavFormat format = WavFormat::Pcm16) {
  const std::uint16_t bits = (format == WavFormat::Pcm16) ? 16 : 32;
  const std::uint16_t fmt_code = (format == WavFormat::Pcm16) ? 1 : 3;
  const std::uint32_t bytes_per_sample = bits / 8;
  const std::uint32_t data_len = static_cast<std::uint32_t>(samples.size() * bytes_per_sample);

  std::string out;
  out.reserve(44 + data_len);
  out += "RIFF";
  detail::put_u32(out, 36 + data_len);
  out += "WAVEfmt ";
  detail::put_u32(out, 16);
  detail::put_u16(out, fmt_code);
  detail::put_u16(out, 1);  // mono
  const std::uint32_t rate = static_cast<std::uint32_t>(std::lround(sample_rate));
  detail::put_u32(out, rate);
  detail::put_u32(out, rate * bytes_per_sample);
  detail::put_u16(out, static_cast<std::uint16_t>(bytes_per_sample));
  detail::put_u16(out, bits);
  out += "data";
  detail::put_u32(out, data_len);

  if (format == WavFormat::Pcm16) {
    for (double s : samples) {
      double v = s * 32768.0;
      if (v > 32767.0) v = 32767.0;
      if (v < -32768.0) v = -32768.0;
      detail::put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(v))));
    }
  } else {
    for (double s : samples) {
      const float f = static_cast<float>(s);
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      detail::put_u32(out, u);
    }
  }
  std::ofstream of(path, std::ios::binary);
  if (!of) throw std::runtime_error("cannot write wav file: " + path);
  of.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace wpeloc
