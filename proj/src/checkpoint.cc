// Copyright 2026 The relnas Authors.
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

#include "relnas/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace relnas {

using nlohmann::json;

namespace {

constexpr int kCheckpointVersion = 1;

struct Entry {
  std::string name;
  Shape shape;
  std::vector<double>* buffer = nullptr;  // batch-norm statistics
  Tensor tensor;
};

std::vector<Entry> entries(Network& net) {
  std::vector<Entry> out;
  for (auto& [name, t] : net.named_weights()) out.push_back({name, t.shape(), nullptr, t});
  auto& h = net.head();
  auto buf = [&](const char* name, std::vector<double>& v) {
    out.push_back({name, Shape{v.size()}, &v, Tensor()});
  };
  buf("head.bn_v.running_mean", h.bn_v.running_mean());
  buf("head.bn_v.running_var", h.bn_v.running_var());
  buf("head.bn_e.running_mean", h.bn_e.running_mean());
  buf("head.bn_e.running_var", h.bn_e.running_var());
  return out;
}

void put_le(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  char b[8];
  std::memcpy(b, &bits, 8);
  out.write(b, 8);
}

double get_le(const char* p) {
  std::uint64_t bits;
  std::memcpy(&bits, p, 8);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  return std::bit_cast<double>(bits);
}

std::filesystem::path blob_path(const std::filesystem::path& p) {
  return std::filesystem::path(p.string() + ".bin");
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Network& net) {
  auto list = entries(const_cast<Network&>(net));
  json params = json::array();
  std::ofstream blob(blob_path(path), std::ios::binary);
  if (!blob) throw Error("checkpoint: cannot write " + blob_path(path).string());
  std::size_t offset = 0;
  for (const auto& e : list) {
    const std::span<const double> d =
        e.buffer ? std::span<const double>(*e.buffer) : e.tensor.data();
    params.push_back({{"name", e.name}, {"shape", e.shape}, {"offset", offset},
                      {"kind", e.buffer ? "buffer" : "weight"}});
    for (double v : d) put_le(blob, v);
    offset += d.size();
  }
  json j = {{"version", kCheckpointVersion},
            {"format", "float64-le"},
            {"blob", blob_path(path).filename().string()},
            {"count", offset},
            {"params", params}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("checkpoint: cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void load_checkpoint(const std::filesystem::path& path, Network& net) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("checkpoint: cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw Error("checkpoint: malformed JSON at byte " + std::to_string(e.byte));
  }
  if (j.value("version", 0) != kCheckpointVersion) throw Error("checkpoint: unsupported version");
  std::ifstream bin(path.parent_path() / j.at("blob").get<std::string>(), std::ios::binary);
  if (!bin) throw Error("checkpoint: cannot read weight blob");
  std::stringstream bs;
  bs << bin.rdbuf();
  const std::string raw = bs.str();
  auto list = entries(net);
  const json& params = j.at("params");
  if (params.size() != list.size())
    throw Error("checkpoint: " + std::to_string(params.size()) + " tensors stored, network has " +
                std::to_string(list.size()));
  for (std::size_t i = 0; i < list.size(); ++i) {
    const json& p = params[i];
    auto& e = list[i];
    if (p.at("name").get<std::string>() != e.name || p.at("shape").get<Shape>() != e.shape)
      throw Error("checkpoint: entry " + std::to_string(i) + " is " +
                  p.at("name").get<std::string>() + ", expected " + e.name + " " +
                  shape_str(e.shape));
    const auto offset = p.at("offset").get<std::size_t>();
    std::size_t n = 1;
    for (auto s : e.shape) n *= s;
    if ((offset + n) * 8 > raw.size()) throw Error("checkpoint: weight blob is truncated");
    std::span<double> dst = e.buffer ? std::span<double>(*e.buffer) : e.tensor.mutable_data();
    for (std::size_t k = 0; k < n; ++k) dst[k] = get_le(raw.data() + (offset + k) * 8);
  }
}

}  // namespace relnas
