#pragma once

// DLT bundle: a flat little-endian container of named f32 tensors plus
// string metadata.
//
//   "DLT1"
//   u32 entry_count
//   entry_count x { u32 name_len, name bytes, u8 rank, rank x u32 dims, f32 payload }
//   u32 metadata_count
//   metadata_count x { u32 key_len, key bytes, u32 value_len, value bytes }

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "duolens/errors.hpp"
#include "duolens/tensor.hpp"

namespace duolens {

static_assert(std::endian::native == std::endian::little, "DLT I/O assumes a little-endian host");

class TensorBundle {
 public:
  using Entry = std::pair<std::string, Tensor>;

  void add(std::string name, Tensor t) {
    if (name.empty()) throw BundleError("bundle entry names must be non-empty");
    if (t.rank() == 0) throw BundleError("bundle entry '" + name + "' has no shape");
    if (t.rank() > 255) throw BundleError("bundle entry '" + name + "' has rank > 255");
    if (index_.count(name)) throw BundleError("duplicate bundle entry '" + name + "'");
    index_.emplace(name, entries_.size());
    entries_.emplace_back(std::move(name), std::move(t));
  }

  // Inserts or overwrites.
  void set(const std::string& name, Tensor t) {
    if (auto it = index_.find(name); it != index_.end()) {
      entries_[it->second].second = std::move(t);
    } else {
      add(name, std::move(t));
    }
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  const Tensor& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw BundleError("bundle is missing parameter '" + name + "'");
    return entries_[it->second].second;
  }

  const Tensor* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &entries_[it->second].second;
  }

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  std::map<std::string, std::string>& metadata() noexcept { return metadata_; }
  const std::map<std::string, std::string>& metadata() const noexcept { return metadata_; }

  std::optional<std::string> meta(const std::string& key) const {
    auto it = metadata_.find(key);
    if (it == metadata_.end()) return std::nullopt;
    return it->second;
  }

  std::string require_meta(const std::string& key) const {
    auto v = meta(key);
    if (!v) throw BundleError("bundle metadata is missing '" + key + "'");
    return *v;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  std::map<std::string, std::string> metadata_;
};

namespace detail {

inline void put_u32(std::string& buf, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  buf.append(b, 4);
}

inline void put_str(std::string& buf, std::string_view s) {
  put_u32(buf, static_cast<std::uint32_t>(s.size()));
  buf.append(s);
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  bool u32(std::uint32_t& v) {
    if (remaining() < 4) return false;
    std::memcpy(&v, bytes_.data() + pos_, 4);
    pos_ += 4;
    return true;
  }
  bool u8(std::uint8_t& v) {
    if (remaining() < 1) return false;
    v = static_cast<std::uint8_t>(bytes_[pos_++]);
    return true;
  }
  bool str(std::string& s) {
    std::uint32_t n = 0;
    if (!u32(n) || remaining() < n) return false;
    s.assign(bytes_.data() + pos_, n);
    pos_ += n;
    return true;
  }
  bool raw(void* dst, std::size_t n) {
    if (remaining() < n) return false;
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
    return true;
  }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_bundle(const TensorBundle& b) {
  std::string buf = "DLT1";
  detail::put_u32(buf, static_cast<std::uint32_t>(b.size()));
  for (const auto& [name, t] : b.entries()) {
    detail::put_str(buf, name);
    buf.push_back(static_cast<char>(static_cast<std::uint8_t>(t.rank())));
    for (std::size_t d : t.shape()) detail::put_u32(buf, static_cast<std::uint32_t>(d));
    buf.append(reinterpret_cast<const char*>(t.data().data()), t.byte_len());
  }
  detail::put_u32(buf, static_cast<std::uint32_t>(b.metadata().size()));
  for (const auto& [k, v] : b.metadata()) {
    detail::put_str(buf, k);
    detail::put_str(buf, v);
  }
  return buf;
}

inline TensorBundle deserialize_bundle(std::string_view bytes) {
  if (bytes.size() < 4 || bytes.substr(0, 4) != "DLT1") throw BundleError("not a DLT bundle");
  detail::ByteReader rd(bytes.substr(4));
  TensorBundle b;
  std::uint32_t count = 0;
  if (!rd.u32(count)) throw BundleError("corrupt bundle: missing entry count");
  std::string last = "<header>";
  for (std::uint32_t e = 0; e < count; ++e) {
    std::string name;
    if (!rd.str(name)) throw BundleError("corrupt bundle at entry " + last);
    std::uint8_t rank = 0;
    if (!rd.u8(rank) || rank == 0) throw BundleError("corrupt bundle at entry " + name);
    Tensor::Shape shape(rank);
    std::uint64_t numel = 1;
    for (auto& d : shape) {
      std::uint32_t v = 0;
      if (!rd.u32(v) || v == 0) throw BundleError("corrupt bundle at entry " + name);
      d = v;
      numel *= v;
    }
    if (numel * 4 > rd.remaining()) throw BundleError("corrupt bundle at entry " + name);
    Tensor t(shape);
    rd.raw(t.data().data(), t.byte_len());
    if (b.contains(name)) throw BundleError("bundle validation failed: duplicate entry '" + name + "'");
    b.add(name, std::move(t));
    last = name;
  }
  std::uint32_t meta_count = 0;
  if (!rd.u32(meta_count)) throw BundleError("corrupt bundle: missing metadata count");
  for (std::uint32_t i = 0; i < meta_count; ++i) {
    std::string k, v;
    if (!rd.str(k) || !rd.str(v)) throw BundleError("corrupt bundle: truncated metadata");
    if (!b.metadata().emplace(std::move(k), std::move(v)).second) {
      throw BundleError("bundle validation failed: duplicate metadata key");
    }
  }
  return b;
}

inline void save_bundle(const TensorBundle& b, const std::filesystem::path& path) {
  const std::string bytes = serialize_bundle(b);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw BundleError("cannot open bundle for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw BundleError("failed writing bundle: " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline TensorBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BundleError("cannot open bundle: " + path.string());
  const std::string bytes = read_file(path);
  try {
    return deserialize_bundle(bytes);
  } catch (const BundleError& e) {
    throw BundleError(std::string(e.what()) + " (" + path.string() + ")");
  }
}

}  // namespace duolens
