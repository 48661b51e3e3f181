// Copyright 2026 The Causal-IMT Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cimt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "cimt/error.hpp"

namespace cimt::harness {

namespace {

constexpr char kMagic[4] = {'C', 'I', 'M', 'T'};
// Guards against allocating absurd sizes from a corrupt header.
constexpr std::uint32_t kMaxCount = 1u << 16;
constexpr std::uint64_t kMaxElements = 1ull << 28;

template <typename T>
void put_le(std::ostream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes, bytes + sizeof(T));
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw ValidationError("checkpoint truncated");
  }
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes, bytes + sizeof(T));
  }
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

loss::ParamGroup group_for(const std::string& name) {
  if (name.rfind("enc.", 0) == 0) return loss::ParamGroup::image_encoder;
  if (name.rfind("cls.", 0) == 0) return loss::ParamGroup::classifier;
  if (name.rfind("txt.", 0) == 0) return loss::ParamGroup::text_encoder;
  throw ValidationError("checkpoint parameter with unknown prefix: " + name);
}

}  // namespace

void save_checkpoint(std::ostream& out, const model::ParameterSet& params) {
  out.write(kMagic, 4);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.items().size()));
  for (const auto& p : params.items()) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    const auto& shape = p.tensor.shape();
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (double v : p.tensor.values()) put_le<double>(out, v);
  }
}

void save_checkpoint(const std::string& path, const model::ParameterSet& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  save_checkpoint(out, params);
  if (!out) throw std::runtime_error("failed writing checkpoint " + path);
}

model::ParameterSet load_checkpoint(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw ValidationError("not a checkpoint file (bad magic)");
  }
  const auto version = get_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw ValidationError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = get_le<std::uint32_t>(in);
  if (count > kMaxCount) throw ValidationError("checkpoint parameter count is implausible");
  model::ParameterSet params;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get_le<std::uint32_t>(in);
    if (len == 0 || len > 4096) throw ValidationError("checkpoint name length is implausible");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw ValidationError("checkpoint truncated");
    const auto rank = get_le<std::uint32_t>(in);
    if (rank == 0 || rank > 8) throw ValidationError("checkpoint rank is implausible");
    Shape shape(rank);
    std::uint64_t elements = 1;
    for (auto& d : shape) {
      d = get_le<std::uint32_t>(in);
      if (d == 0) throw ValidationError("checkpoint has a zero dimension");
      elements *= d;
      if (elements > kMaxElements) throw ValidationError("checkpoint tensor is implausibly large");
    }
    std::vector<double> values(elements);
    for (auto& v : values) v = get_le<double>(in);
    params.add(name, group_for(name), Tensor::from(std::move(shape), std::move(values), true));
  }
  return params;
}

model::ParameterSet load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint " + path);
  return load_checkpoint(in);
}

}  // namespace cimt::harness
