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

#include "mfcon/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "mfcon/config.hpp"
#include "mfcon/errors.hpp"

namespace mfcon {

namespace {

constexpr char kMagic[] = "MFCONCKPT1\n";
constexpr size_t kMagicLen = sizeof(kMagic) - 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& is, const std::filesystem::path& path) {
  T v;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw DataError("truncated checkpoint " + path.string());
  }
  return v;
}

std::string take_string(std::istream& is, size_t n,
                        const std::filesystem::path& path) {
  // Guard against garbage lengths before allocating.
  if (n > (1u << 30)) throw DataError("corrupt checkpoint " + path.string());
  std::string s(n, '\0');
  if (n > 0 && !is.read(s.data(), static_cast<std::streamsize>(n))) {
    throw DataError("truncated checkpoint " + path.string());
  }
  return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write " + tmp.string());
    os.write(kMagic, kMagicLen);
    const std::string cfg = to_json(model.config());
    put<uint64_t>(os, cfg.size());
    os.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
    put<uint64_t>(os, model.params().size());
    for (const auto& [name, p] : model.params()) {
      put<uint32_t>(os, static_cast<uint32_t>(name.size()));
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      put<uint8_t>(os, p.trainable ? 1 : 0);
      put<uint64_t>(os, static_cast<uint64_t>(p.value.rows()));
      put<uint64_t>(os, static_cast<uint64_t>(p.value.cols()));
      os.write(reinterpret_cast<const char*>(p.value.data()),
               static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    }
    if (!os) throw DataError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  char magic[kMagicLen];
  if (!is.read(magic, kMagicLen) || std::memcmp(magic, kMagic, kMagicLen)) {
    throw DataError(path.string() + " is not a checkpoint");
  }
  const std::string cfg_text =
      take_string(is, take<uint64_t>(is, path), path);
  ModelConfig cfg = model_config_from_json(cfg_text);
  const auto count = take<uint64_t>(is, path);
  ParameterStore params;
  for (uint64_t i = 0; i < count; ++i) {
    const std::string name = take_string(is, take<uint32_t>(is, path), path);
    const bool trainable = take<uint8_t>(is, path) != 0;
    const auto rows = take<uint64_t>(is, path);
    const auto cols = take<uint64_t>(is, path);
    if (rows > (1u << 24) || cols > (1u << 24)) {
      throw DataError("corrupt checkpoint " + path.string());
    }
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    if (!is.read(reinterpret_cast<char*>(m.data()),
                 static_cast<std::streamsize>(m.size() * sizeof(double)))) {
      throw DataError("truncated checkpoint " + path.string());
    }
    params.add(name, std::move(m), trainable);
  }
  return Model(std::move(cfg), std::move(params));
}

}  // namespace mfcon
