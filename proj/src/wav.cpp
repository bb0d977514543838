// Copyright (c) 2026 The MFCon Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mfcon/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "mfcon/errors.hpp"

namespace mfcon {

namespace {

uint32_t read_u32(const char* p) {
  return static_cast<uint32_t>(static_cast<uint8_t>(p[0])) |
         static_cast<uint32_t>(static_cast<uint8_t>(p[1])) << 8 |
         static_cast<uint32_t>(static_cast<uint8_t>(p[2])) << 16 |
         static_cast<uint32_t>(static_cast<uint8_t>(p[3])) << 24;
}

uint16_t read_u16(const char* p) {
  return static_cast<uint16_t>(static_cast<uint8_t>(p[0]) |
                               static_cast<uint8_t>(p[1]) << 8);
}

void put_u32(std::ostream& os, uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff),
                     static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff),
                     static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

void put_u16(std::ostream& os, uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff),
                     static_cast<char>((v >> 8) & 0xff)};
  os.write(b, 2);
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(is)),
                   std::istreambuf_iterator<char>());
  const auto fail = [&](const std::string& why) {
    throw DataError(path.string() + ": " + why);
  };
  if (data.size() < 12 || data.compare(0, 4, "RIFF") != 0 ||
      data.compare(8, 4, "WAVE") != 0) {
    fail("not a RIFF/WAVE file");
  }
  size_t pos = 12;
  int channels = 0, rate = 0, bits = 0, format = 0;
  const char* pcm = nullptr;
  size_t pcm_bytes = 0;
  while (pos + 8 <= data.size()) {
    const std::string id = data.substr(pos, 4);
    const uint32_t size = read_u32(data.data() + pos + 4);
    const size_t body = pos + 8;
    if (body + size > data.size() && id != "data") fail("truncated chunk");
    if (id == "fmt ") {
      if (size < 16) fail("short fmt chunk");
      format = read_u16(data.data() + body);
      channels = read_u16(data.data() + body + 2);
      rate = static_cast<int>(read_u32(data.data() + body + 4));
      bits = read_u16(data.data() + body + 14);
    } else if (id == "data") {
      pcm = data.data() + body;
      pcm_bytes = std::min<size_t>(size, data.size() - body);
      break;
    }
    pos = body + size + (size & 1);
  }
  if (format != 1 || bits != 16) fail("only 16-bit PCM is supported");
  if (channels != 1) {
    fail("expected mono audio, got " + std::to_string(channels) +
         " channels");
  }
  if (rate <= 0) fail("invalid sample rate");
  if (pcm == nullptr) fail("missing data chunk");
  Waveform w;
  w.sample_rate = rate;
  w.utterance_id = path.stem().string();
  w.samples.resize(pcm_bytes / 2);
  for (size_t i = 0; i < w.samples.size(); ++i) {
    const auto v = static_cast<int16_t>(read_u16(pcm + 2 * i));
    w.samples[i] = static_cast<double>(v) / 32768.0;
  }
  if (w.samples.empty()) fail("no samples");
  return w;
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  const auto n = static_cast<uint32_t>(w.samples.size());
  os.write("RIFF", 4);
  put_u32(os, 36 + 2 * n);
  os.write("WAVEfmt ", 8);
  put_u32(os, 16);
  put_u16(os, 1);
  put_u16(os, 1);
  put_u32(os, static_cast<uint32_t>(w.sample_rate));
  put_u32(os, static_cast<uint32_t>(w.sample_rate) * 2);
  put_u16(os, 2);
  put_u16(os, 16);
  os.write("data", 4);
  put_u32(os, 2 * n);
  for (double v : w.samples) {
    const double c = std::clamp(v, -1.0, 32767.0 / 32768.0);
    put_u16(os, static_cast<uint16_t>(
                    static_cast<int16_t>(std::lround(c * 32768.0))));
  }
  if (!os) throw DataError("write failed: " + path.string());
}

std::vector<std::filesystem::path> list_wav_files(
    const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw DataError("not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (ext == ".wav") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace mfcon
