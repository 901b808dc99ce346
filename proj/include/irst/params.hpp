#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "irst/errors.hpp"
#include "irst/nd.hpp"

namespace irst {

// Named, ordered collection of weight arrays. Every trainable component
// (segmentation net, semantic codec, each channel-codec tier, regressor)
// serializes through this one archive format.
class ParamBundle {
 public:
  void put(const std::string& name, NdArray a) {
    auto it = index_.find(name);
    if (it != index_.end()) {
      entries_[it->second].second = std::move(a);
    } else {
      index_[name] = entries_.size();
      entries_.emplace_back(name, std::move(a));
    }
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }

  const NdArray& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("ParamBundle: missing entry '" + name + "'");
    return entries_[it->second].second;
  }

  const std::vector<std::pair<std::string, NdArray>>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }

  // Binary archive: magic, entry count, then per entry a name, its shape and
  // the raw little-endian doubles. Bit-exact within one platform/build.
  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("ParamBundle: cannot open '" + path + "' for writing");
    f.write("IRSTPB1\n", 8);
    write_u64(f, entries_.size());
    for (const auto& [name, arr] : entries_) {
      write_u64(f, name.size());
      f.write(name.data(), static_cast<std::streamsize>(name.size()));
      write_u64(f, arr.shape.size());
      for (int d : arr.shape) write_u64(f, static_cast<uint64_t>(d));
      f.write(reinterpret_cast<const char*>(arr.data.data()),
              static_cast<std::streamsize>(arr.data.size() * sizeof(double)));
    }
    if (!f) throw ConfigError("ParamBundle: write failed for '" + path + "'");
  }

  static ParamBundle load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("ParamBundle: cannot open '" + path + "'");
    char magic[8];
    f.read(magic, 8);
    if (!f || std::string(magic, 8) != "IRSTPB1\n")
      throw ConfigError("ParamBundle: bad magic in '" + path + "'");
    ParamBundle b;
    uint64_t count = read_u64(f);
    for (uint64_t i = 0; i < count; ++i) {
      uint64_t nlen = read_u64(f);
      std::string name(nlen, '\0');
      f.read(name.data(), static_cast<std::streamsize>(nlen));
      uint64_t rank = read_u64(f);
      Shape shape(rank);
      for (auto& d : shape) d = static_cast<int>(read_u64(f));
      NdArray arr(shape);
      f.read(reinterpret_cast<char*>(arr.data.data()),
             static_cast<std::streamsize>(arr.data.size() * sizeof(double)));
      if (!f) throw ConfigError("ParamBundle: truncated archive '" + path + "'");
      b.put(name, std::move(arr));
    }
    return b;
  }

 private:
  static void write_u64(std::ofstream& f, uint64_t v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  static uint64_t read_u64(std::ifstream& f) {
    uint64_t v = 0;
    f.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
  }

  std::vector<std::pair<std::string, NdArray>> entries_;
  std::map<std::string, size_t> index_;
};

}  // namespace irst
