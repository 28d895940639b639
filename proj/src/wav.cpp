/*
 * Copyright 2026 the iass authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "iass/wav.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

namespace iass {

namespace {

struct FmtChunk {
  uint16_t format = 0;  // 1 = PCM, 3 = IEEE float
  uint16_t channels = 0;
  uint32_t sample_rate = 0;
  uint16_t bits = 0;
};

uint32_t read_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}
uint16_t read_u16(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

// Walks RIFF chunks; fills fmt and locates the data payload.
void parse_wav(const std::filesystem::path& path, FmtChunk* fmt,
               std::vector<uint8_t>* data, int64_t* data_bytes_only) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open WAV file: " + path.string());

  uint8_t hdr[12];
  if (!f.read(reinterpret_cast<char*>(hdr), 12) || std::memcmp(hdr, "RIFF", 4) != 0 ||
      std::memcmp(hdr + 8, "WAVE", 4) != 0)
    throw DataError("not a RIFF/WAVE file: " + path.string());

  bool have_fmt = false;
  while (true) {
    uint8_t chdr[8];
    if (!f.read(reinterpret_cast<char*>(chdr), 8)) break;
    const uint32_t size = read_u32(chdr + 4);
    if (std::memcmp(chdr, "fmt ", 4) == 0) {
      std::vector<uint8_t> body(size);
      if (!f.read(reinterpret_cast<char*>(body.data()), size))
        throw DataError("truncated fmt chunk: " + path.string());
      if (size < 16) throw DataError("malformed fmt chunk: " + path.string());
      fmt->format = read_u16(body.data());
      fmt->channels = read_u16(body.data() + 2);
      fmt->sample_rate = read_u32(body.data() + 4);
      fmt->bits = read_u16(body.data() + 14);
      if (fmt->format == 0xFFFE && size >= 40)  // WAVE_FORMAT_EXTENSIBLE
        fmt->format = read_u16(body.data() + 24);
      have_fmt = true;
    } else if (std::memcmp(chdr, "data", 4) == 0) {
      if (data_bytes_only) {
        *data_bytes_only = size;
        return;  // probe only
      }
      data->resize(size);
      if (!f.read(reinterpret_cast<char*>(data->data()), size))
        throw DataError("truncated data chunk: " + path.string());
      if (!have_fmt) throw DataError("data chunk before fmt: " + path.string());
      return;
    } else {
      f.seekg(size + (size & 1), std::ios::cur);
    }
  }
  throw DataError("no data chunk found: " + path.string());
}

}  // namespace

WavInfo probe_wav(const std::filesystem::path& path) {
  FmtChunk fmt;
  int64_t data_bytes = 0;
  parse_wav(path, &fmt, nullptr, &data_bytes);
  if (fmt.channels == 0 || fmt.bits == 0)
    throw DataError("malformed WAV header: " + path.string());
  WavInfo info;
  info.channels = fmt.channels;
  info.sample_rate = static_cast<int>(fmt.sample_rate);
  info.num_samples = data_bytes / (fmt.channels * (fmt.bits / 8));
  return info;
}

AudioClip read_wav(const std::filesystem::path& path) {
  FmtChunk fmt;
  std::vector<uint8_t> data;
  parse_wav(path, &fmt, &data, nullptr);

  if (fmt.channels < 1 || fmt.channels > 2)
    throw DataError("unsupported channel count in " + path.string());
  const int bytes_per = fmt.bits / 8;
  if (bytes_per == 0) throw DataError("malformed WAV header: " + path.string());
  const int64_t n = static_cast<int64_t>(data.size()) / (fmt.channels * bytes_per);

  AudioClip clip;
  clip.channels = fmt.channels;
  clip.sample_rate = static_cast<int>(fmt.sample_rate);
  clip.samples.resize(static_cast<size_t>(n) * fmt.channels);

  const uint8_t* p = data.data();
  for (int64_t i = 0; i < n; ++i) {
    for (int c = 0; c < fmt.channels; ++c) {
      double v;
      if (fmt.format == 1 && fmt.bits == 16) {
        int16_t s;
        std::memcpy(&s, p, 2);
        v = static_cast<double>(s) / 32768.0;
      } else if (fmt.format == 1 && fmt.bits == 24) {
        int32_t s = p[0] | (p[1] << 8) | (p[2] << 16);
        if (s & 0x800000) s |= ~0xFFFFFF;
        v = static_cast<double>(s) / 8388608.0;
      } else if (fmt.format == 3 && fmt.bits == 32) {
        float s;
        std::memcpy(&s, p, 4);
        v = static_cast<double>(s);
      } else {
        throw DataError("unsupported WAV encoding (" + std::to_string(fmt.format) +
                        "/" + std::to_string(fmt.bits) + " bit) in " + path.string());
      }
      clip.samples[static_cast<size_t>(c) * n + i] = v;
      p += bytes_per;
    }
  }
  return clip;
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip,
               WavFormat format) {
  const int64_t n = clip.num_samples();
  const int bytes_per = format == WavFormat::Int16 ? 2
                        : format == WavFormat::Int24 ? 3
                                                     : 4;
  const uint32_t data_bytes =
      static_cast<uint32_t>(n * clip.channels * bytes_per);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write WAV file: " + path.string());

  auto put_u32 = [&](uint32_t v) {
    uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                    static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
    f.write(reinterpret_cast<char*>(b), 4);
  };
  auto put_u16 = [&](uint16_t v) {
    uint8_t b[2] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8)};
    f.write(reinterpret_cast<char*>(b), 2);
  };

  f.write("RIFF", 4);
  put_u32(36 + data_bytes);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  put_u32(16);
  put_u16(format == WavFormat::Float32 ? 3 : 1);
  put_u16(static_cast<uint16_t>(clip.channels));
  put_u32(static_cast<uint32_t>(clip.sample_rate));
  put_u32(static_cast<uint32_t>(clip.sample_rate * clip.channels * bytes_per));
  put_u16(static_cast<uint16_t>(clip.channels * bytes_per));
  put_u16(static_cast<uint16_t>(bytes_per * 8));
  f.write("data", 4);
  put_u32(data_bytes);

  for (int64_t i = 0; i < n; ++i) {
    for (int c = 0; c < clip.channels; ++c) {
      const double v = clip.samples[static_cast<size_t>(c) * n + i];
      if (format == WavFormat::Float32) {
        const float s = static_cast<float>(v);
        f.write(reinterpret_cast<const char*>(&s), 4);
      } else if (format == WavFormat::Int16) {
        const double clamped = std::clamp(v, -1.0, 32767.0 / 32768.0);
        const int16_t s = static_cast<int16_t>(std::lrint(clamped * 32768.0));
        uint8_t b[2] = {static_cast<uint8_t>(s & 0xFF),
                        static_cast<uint8_t>((s >> 8) & 0xFF)};
        f.write(reinterpret_cast<char*>(b), 2);
      } else {
        const double clamped = std::clamp(v, -1.0, 8388607.0 / 8388608.0);
        const int32_t s = static_cast<int32_t>(std::lrint(clamped * 8388608.0));
        uint8_t b[3] = {static_cast<uint8_t>(s & 0xFF),
                        static_cast<uint8_t>((s >> 8) & 0xFF),
                        static_cast<uint8_t>((s >> 16) & 0xFF)};
        f.write(reinterpret_cast<char*>(b), 3);
      }
    }
  }
  if (!f) throw DataError("failed writing WAV file: " + path.string());
}

AudioClip load_audio(const std::filesystem::path& path, int target_rate) {
  AudioClip clip = read_wav(path);
  for (double s : clip.samples)
    if (!std::isfinite(s)) throw DataError("non-finite sample in " + path.string());
  return resample(clip, target_rate);
}

}  // namespace iass
