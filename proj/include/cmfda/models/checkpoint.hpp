// Copyright 2026 The cmfda Authors.
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

// Checkpoint layout (little-endian):
//   "CMFDACK1" | u32 version | u32 scalar bytes | u64 n | n bytes JSON spec
//   | u32 tensor count | per tensor: u32 rank, u64 dims[rank], raw values
// Tensors follow TwoHeadNetwork::parameters() order.

#ifndef CMFDA_MODELS_CHECKPOINT_HPP_
#define CMFDA_MODELS_CHECKPOINT_HPP_

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmfda/error.hpp"
#include "cmfda/models/network.hpp"

namespace cmfda::models {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline constexpr char kCheckpointMagic[8] = {'C', 'M', 'F', 'D', 'A', 'C', 'K', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename V>
void put(std::string& buf, V v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof(V));
}

class Reader {
 public:
  explicit Reader(std::string data, std::string origin) : data_(std::move(data)), origin_(std::move(origin)) {}

  template <typename V>
  V get() {
    V v;
    std::memcpy(&v, take(sizeof(V)), sizeof(V));
    return v;
  }
  const char* take(std::size_t n) {
    if (data_.size() - pos_ < n) throw DataError("checkpoint " + origin_ + ": truncated");
    const char* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::string data_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace detail

template <typename T>
std::string serialize_checkpoint(TwoHeadNetwork<T>& net) {
  std::string buf(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put<std::uint32_t>(buf, kCheckpointVersion);
  detail::put<std::uint32_t>(buf, sizeof(T));
  const std::string spec = to_json(net.spec()).dump();
  detail::put<std::uint64_t>(buf, spec.size());
  buf += spec;
  const auto params = net.parameters();
  detail::put<std::uint32_t>(buf, static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    detail::put<std::uint32_t>(buf, static_cast<std::uint32_t>(p->rank()));
    for (std::size_t d : p->shape()) detail::put<std::uint64_t>(buf, d);
    buf.append(reinterpret_cast<const char*>(p->ptr()), p->size() * sizeof(T));
  }
  return buf;
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, TwoHeadNetwork<T>& net) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  const std::string buf = serialize_checkpoint(net);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

/// Rebuilds the network from the embedded NetworkSpec and overwrites every parameter.
template <typename T>
TwoHeadNetwork<T> deserialize_checkpoint(std::string data, const std::string& origin = "<memory>") {
  detail::Reader r(std::move(data), origin);
  if (std::memcmp(r.take(sizeof(kCheckpointMagic)), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw DataError("checkpoint " + origin + ": bad magic");
  }
  if (const auto v = r.get<std::uint32_t>(); v != kCheckpointVersion) {
    throw DataError("checkpoint " + origin + ": unsupported version " + std::to_string(v));
  }
  if (r.get<std::uint32_t>() != sizeof(T)) throw DataError("checkpoint " + origin + ": scalar width mismatch");
  const auto spec_len = r.get<std::uint64_t>();
  const char* spec_ptr = r.take(spec_len);
  NetworkSpec spec;
  try {
    spec = spec_from_json(nlohmann::json::parse(std::string(spec_ptr, spec_len)));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + origin + ": " + e.what());
  }
  TwoHeadNetwork<T> net = build_network<T>(spec, 0);
  const auto params = net.parameters();
  if (r.get<std::uint32_t>() != params.size()) throw DataError("checkpoint " + origin + ": tensor count mismatch");
  for (auto* p : params) {
    const auto rank = r.get<std::uint32_t>();
    nn::Shape shape(rank);
    for (auto& d : shape) d = r.get<std::uint64_t>();
    if (shape != p->shape()) throw DataError("checkpoint " + origin + ": tensor shape mismatch");
    std::memcpy(p->ptr(), r.take(p->size() * sizeof(T)), p->size() * sizeof(T));
  }
  if (!r.done()) throw DataError("checkpoint " + origin + ": trailing bytes");
  return net;
}

template <typename T>
TwoHeadNetwork<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint<T>(std::move(data), path.string());
}

}  // namespace cmfda::models

#endif  // CMFDA_MODELS_CHECKPOINT_HPP_
