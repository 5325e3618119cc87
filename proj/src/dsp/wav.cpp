#include <cstdint>
#include <cstring>
#include <fstream>

#include "rfgml/dsp.hpp"

namespace rfgml {

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& s, std::uint32_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
  s.push_back(static_cast<char>((v >> 16) & 0xff));
  s.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

AudioBuffer load_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractError("load_wav: cannot open '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t n = bytes.size();
  if (n < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
    throw ContractError("load_wav: '" + path + "' is not a RIFF/WAVE file");

  int format = -1, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t data_off = 0, data_len = 0;
  std::size_t off = 12;
  while (off + 8 <= n) {
    const std::uint32_t chunk_len = read_u32(p + off + 4);
    const std::size_t body = off + 8;
    if (body + chunk_len > n)
      throw ContractError("load_wav: truncated chunk in '" + path + "'");
    if (std::memcmp(p + off, "fmt ", 4) == 0) {
      if (chunk_len < 16) throw ContractError("load_wav: malformed fmt chunk");
      format = read_u16(p + body);
      channels = read_u16(p + body + 2);
      rate = read_u32(p + body + 4);
      bits = read_u16(p + body + 14);
    } else if (std::memcmp(p + off, "data", 4) == 0) {
      data_off = body;
      data_len = chunk_len;
    }
    off = body + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }
  if (format < 0) throw ContractError("load_wav: missing fmt chunk");
  if (data_off == 0) throw ContractError("load_wav: missing data chunk");
  if (rate != kSampleRate)
    throw ContractError("load_wav: sample rate " + std::to_string(rate) +
                        " unsupported (expected " + std::to_string(kSampleRate) +
                        ")");
  if (channels < 1 || channels > 2)
    throw ContractError("load_wav: channel count " + std::to_string(channels) +
                        " unsupported (expected 1 or 2)");
  const bool pcm16 = format == 1 && bits == 16;
  const bool pcm24 = format == 1 && bits == 24;
  const bool f32 = format == 3 && bits == 32;
  if (!pcm16 && !pcm24 && !f32)
    throw ContractError("load_wav: sample format (tag " + std::to_string(format) +
                        ", " + std::to_string(bits) +
                        " bit) unsupported (expected PCM16, PCM24 or float32)");

  const int bytes_per = bits / 8;
  const std::size_t count = data_len / bytes_per;
  AudioBuffer out;
  out.channels = channels;
  out.samples.resize(count);
  const unsigned char* d = p + data_off;
  if (pcm16) {
    for (std::size_t i = 0; i < count; ++i) {
      const auto v = static_cast<std::int16_t>(d[2 * i] | (d[2 * i + 1] << 8));
      out.samples[i] = static_cast<double>(v) / 32768.0;
    }
  } else if (pcm24) {
    for (std::size_t i = 0; i < count; ++i) {
      std::int32_t v = d[3 * i] | (d[3 * i + 1] << 8) | (d[3 * i + 2] << 16);
      if (v & 0x800000) v |= ~0xffffff;  // sign extend
      out.samples[i] = static_cast<double>(v) / 8388608.0;
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      std::uint32_t u = read_u32(d + 4 * i);
      float f;
      std::memcpy(&f, &u, 4);
      out.samples[i] = static_cast<double>(f);
    }
  }
  return out;
}

void write_wav(const std::string& path, const AudioBuffer& buffer) {
  if (buffer.channels < 1 || buffer.channels > 2)
    throw ContractError("write_wav: channel count must be 1 or 2");
  if (buffer.samples.size() % buffer.channels != 0)
    throw ContractError("write_wav: sample count not divisible by channels");
  std::string s;
  s.reserve(buffer.samples.size() * 4 + 64);
  const std::uint32_t data_len =
      static_cast<std::uint32_t>(buffer.samples.size() * 4);
  s += "RIFF";
  put_u32(s, 4 + (8 + 16) + (8 + 4) + (8 + data_len));
  s += "WAVE";
  s += "fmt ";
  put_u32(s, 16);
  put_u16(s, 3);  // IEEE float
  put_u16(s, static_cast<std::uint16_t>(buffer.channels));
  put_u32(s, kSampleRate);
  put_u32(s, kSampleRate * buffer.channels * 4);
  put_u16(s, static_cast<std::uint16_t>(buffer.channels * 4));
  put_u16(s, 32);
  s += "fact";
  put_u32(s, 4);
  put_u32(s, static_cast<std::uint32_t>(buffer.frames()));
  s += "data";
  put_u32(s, data_len);
  for (double v : buffer.samples) {
    const float f = static_cast<float>(v);
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    put_u32(s, u);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ContractError("write_wav: cannot open '" + path + "'");
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!out) throw ContractError("write_wav: short write to '" + path + "'");
}

void mid_side(const AudioBuffer& stereo, std::vector<double>& mid,
              std::vector<double>& side) {
  if (stereo.channels != 2)
    throw ContractError("mid_side: buffer must be stereo");
  const std::size_t n = stereo.frames();
  mid.resize(n);
  side.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double l = stereo.samples[2 * i];
    const double r = stereo.samples[2 * i + 1];
    mid[i] = 0.5 * (l + r);
    side[i] = 0.5 * (l - r);
  }
}

AudioBuffer ensure_stereo(const AudioBuffer& buffer) {
  if (buffer.channels == 2) return buffer;
  if (buffer.channels != 1)
    throw ContractError("ensure_stereo: buffer must be mono or stereo");
  AudioBuffer out;
  out.channels = 2;
  out.samples.resize(buffer.samples.size() * 2);
  for (std::size_t i = 0; i < buffer.samples.size(); ++i) {
    out.samples[2 * i] = buffer.samples[i];
    out.samples[2 * i + 1] = buffer.samples[i];
  }
  return out;
}

}  // namespace rfgml
