#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "biasamp/dataset.hpp"
#include "biasamp/model.hpp"
#include "biasamp/version.hpp"

namespace biasamp {

namespace bytes {

inline std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "0x%08x", v);
  return buf;
}

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<std::uint8_t> data(size);
  if (size > 0) in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(size));
  if (!in) throw FormatError("failed reading " + path);
  return data;
}

inline void write_file(const std::string& path, const std::vector<std::uint8_t>& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
  if (!out) throw FormatError("failed writing " + path);
}

inline std::uint32_t read_u32_be(const std::vector<std::uint8_t>& d, std::size_t off,
                                 const std::string& path) {
  if (off + 4 > d.size()) {
    throw FormatError(path + ": truncated at offset " + std::to_string(off));
  }
  return (std::uint32_t{d[off]} << 24) | (std::uint32_t{d[off + 1]} << 16) |
         (std::uint32_t{d[off + 2]} << 8) | std::uint32_t{d[off + 3]};
}

struct Writer {
  std::vector<std::uint8_t> out;

  void u8(std::uint8_t v) { out.push_back(v); }
  void u32(std::uint32_t v) { // little-endian
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  }
};

struct Reader {
  const std::vector<std::uint8_t>& data;
  std::size_t pos = 0;
  std::string path;

  void need(std::size_t n) const {
    if (pos + n > data.size()) {
      throw FormatError(path + ": truncated at offset " + std::to_string(pos));
    }
  }
  std::uint8_t u8() {
    need(1);
    return data[pos++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{data[pos + i]} << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{data[pos + i]} << (8 * i);
    pos += 8;
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  void raw(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, data.data() + pos, n);
    pos += n;
  }
};

} // namespace bytes

// ---------------------------------------------------------------------------
// IDX (big-endian header):
//   images  0x00000803, u32 count, u32 rows, u32 cols, count*rows*cols bytes
//   labels  0x00000801, u32 count, count bytes
// ---------------------------------------------------------------------------
inline RawDataset ingest_idx(const std::string& images_path,
                             const std::string& labels_path, Split split) {
  const auto img = bytes::read_file(images_path);
  const std::uint32_t magic = bytes::read_u32_be(img, 0, images_path);
  if (magic != 0x00000803u) {
    throw FormatError(images_path + ": bad magic " + bytes::hex32(magic) +
                      " at offset 0 (want 0x00000803)");
  }
  const std::uint32_t count = bytes::read_u32_be(img, 4, images_path);
  const std::uint32_t rows = bytes::read_u32_be(img, 8, images_path);
  const std::uint32_t cols = bytes::read_u32_be(img, 12, images_path);
  const std::size_t expected = 16 + static_cast<std::size_t>(count) * rows * cols;
  if (img.size() != expected) {
    throw FormatError(images_path + ": size " + std::to_string(img.size()) +
                      " does not match header (expected " + std::to_string(expected) +
                      " bytes; mismatch detected at offset " +
                      std::to_string(std::min(img.size(), expected)) + ")");
  }

  const auto lab = bytes::read_file(labels_path);
  const std::uint32_t lmagic = bytes::read_u32_be(lab, 0, labels_path);
  if (lmagic != 0x00000801u) {
    throw FormatError(labels_path + ": bad magic " + bytes::hex32(lmagic) +
                      " at offset 0 (want 0x00000801)");
  }
  const std::uint32_t lcount = bytes::read_u32_be(lab, 4, labels_path);
  if (lcount != count) {
    throw FormatError(labels_path + ": label count " + std::to_string(lcount) +
                      " at offset 4 does not match image count " + std::to_string(count));
  }
  if (lab.size() != 8 + static_cast<std::size_t>(count)) {
    throw FormatError(labels_path + ": truncated at offset " +
                      std::to_string(std::min(lab.size(), std::size_t{8} + count)));
  }

  RawDataset ds;
  ds.split = split;
  ds.shape = ImageShape{1, rows, cols};
  ds.labels.resize(count);
  std::int32_t max_label = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    ds.labels[i] = lab[8 + i];
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.class_count = static_cast<std::uint32_t>(max_label) + 1;
  ds.pixels.assign(img.begin() + 16, img.end());
  return ds;
}

// ---------------------------------------------------------------------------
// CIFAR binary records, 3x32x32 pixels:
//   cifar10:  <1 label byte><3072 pixel bytes>
//   cifar100: <coarse byte><fine byte><3072 pixel bytes>, fine label used
// Multiple batch files concatenate into one split.
// ---------------------------------------------------------------------------
inline RawDataset ingest_cifar(const std::vector<std::string>& paths, bool cifar100,
                               Split split) {
  if (paths.empty()) throw ConfigError("ingest: no input files");
  const std::size_t label_bytes = cifar100 ? 2 : 1;
  const std::size_t record = label_bytes + 3072;
  const std::uint32_t class_count = cifar100 ? 100 : 10;

  RawDataset ds;
  ds.split = split;
  ds.shape = ImageShape{3, 32, 32};
  ds.class_count = class_count;
  for (const auto& path : paths) {
    const auto data = bytes::read_file(path);
    if (data.empty() || data.size() % record != 0) {
      throw FormatError(path + ": size " + std::to_string(data.size()) +
                        " is not a multiple of the record size " +
                        std::to_string(record) + " (mismatch at offset " +
                        std::to_string(data.size() - data.size() % record) + ")");
    }
    const std::size_t count = data.size() / record;
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t off = i * record;
      const std::uint8_t label = cifar100 ? data[off + 1] : data[off];
      if (label >= class_count) {
        throw FormatError(path + ": label " + std::to_string(label) +
                          " out of range at offset " +
                          std::to_string(off + label_bytes - 1));
      }
      ds.labels.push_back(label);
      ds.pixels.insert(ds.pixels.end(), data.begin() + static_cast<std::ptrdiff_t>(off + label_bytes),
                       data.begin() + static_cast<std::ptrdiff_t>(off + record));
    }
  }
  return ds;
}

enum class IngestFormat { idx, cifar10, cifar100 };

inline RawDataset ingest(const std::vector<std::string>& paths, IngestFormat format,
                         Split split) {
  switch (format) {
    case IngestFormat::idx:
      if (paths.size() != 2) {
        throw ConfigError("idx ingestion needs exactly two files: images, labels");
      }
      return ingest_idx(paths[0], paths[1], split);
    case IngestFormat::cifar10:
      return ingest_cifar(paths, false, split);
    case IngestFormat::cifar100:
      return ingest_cifar(paths, true, split);
  }
  throw ConfigError("unknown ingest format");
}

// ---------------------------------------------------------------------------
// Dataset cache container (little-endian), bit-exact round-trip:
//   offset 0   8 bytes  magic "BAMPDATA"
//   offset 8   u32      version
//   offset 12  u8       kind: 0 = raw split, 1 = built train/test pair
//   raw:   u8 split, u32 class_count, u32 channels/height/width, u64 count,
//          count * i32 labels, count*shape u8 pixels
//   built: u8 image_like, u8 synthetic, u32 channels/height/width,
//          u32 channels, per channel f64 mean + f64 stddev,
//          per split (train, test): u64 count,
//            per example: i8 class, u8 group, shape * f64 features
// ---------------------------------------------------------------------------
inline constexpr char kCacheMagic[8] = {'B', 'A', 'M', 'P', 'D', 'A', 'T', 'A'};

namespace detail {

inline void check_cache_header(bytes::Reader& r, std::uint8_t expected_kind) {
  char magic[8];
  r.raw(magic, 8);
  if (std::memcmp(magic, kCacheMagic, 8) != 0) {
    throw FormatError(r.path + ": bad magic at offset 0");
  }
  const std::uint32_t version = r.u32();
  if (version != static_cast<std::uint32_t>(kDatasetCacheVersion)) {
    throw FormatError(r.path + ": unsupported cache version " + std::to_string(version) +
                      " at offset 8");
  }
  const std::uint8_t kind = r.u8();
  if (kind != expected_kind) {
    throw FormatError(r.path + ": unexpected payload kind " + std::to_string(kind) +
                      " at offset 12");
  }
}

} // namespace detail

inline void write_raw_cache(const std::string& path, const RawDataset& ds) {
  bytes::Writer w;
  w.raw(kCacheMagic, 8);
  w.u32(static_cast<std::uint32_t>(kDatasetCacheVersion));
  w.u8(0);
  w.u8(static_cast<std::uint8_t>(ds.split));
  w.u32(ds.class_count);
  w.u32(ds.shape.channels);
  w.u32(ds.shape.height);
  w.u32(ds.shape.width);
  w.u64(ds.size());
  for (std::int32_t label : ds.labels) w.i32(label);
  w.raw(ds.pixels.data(), ds.pixels.size());
  bytes::write_file(path, w.out);
}

inline RawDataset read_raw_cache(const std::string& path) {
  const auto data = bytes::read_file(path);
  bytes::Reader r{data, 0, path};
  detail::check_cache_header(r, 0);
  RawDataset ds;
  ds.split = static_cast<Split>(r.u8());
  ds.class_count = r.u32();
  ds.shape.channels = r.u32();
  ds.shape.height = r.u32();
  ds.shape.width = r.u32();
  const std::uint64_t count = r.u64();
  ds.labels.resize(count);
  for (auto& label : ds.labels) label = r.i32();
  ds.pixels.resize(count * ds.shape.size());
  r.raw(ds.pixels.data(), ds.pixels.size());
  if (r.pos != data.size()) {
    throw FormatError(path + ": trailing bytes at offset " + std::to_string(r.pos));
  }
  return ds;
}

inline void write_built_cache(const std::string& path, const BuiltDataset& ds) {
  bytes::Writer w;
  w.raw(kCacheMagic, 8);
  w.u32(static_cast<std::uint32_t>(kDatasetCacheVersion));
  w.u8(1);
  w.u8(ds.image_like ? 1 : 0);
  w.u8(ds.synthetic ? 1 : 0);
  w.u32(ds.shape.channels);
  w.u32(ds.shape.height);
  w.u32(ds.shape.width);
  w.u32(static_cast<std::uint32_t>(ds.stats.mean.size()));
  for (std::size_t c = 0; c < ds.stats.mean.size(); ++c) {
    w.f64(ds.stats.mean[c]);
    w.f64(ds.stats.stddev[c]);
  }
  for (const auto* split : {&ds.train, &ds.test}) {
    w.u64(split->size());
    for (const auto& ex : *split) {
      w.u8(static_cast<std::uint8_t>(ex.class_label));
      w.u8(static_cast<std::uint8_t>(ex.group));
      for (double f : ex.features) w.f64(f);
    }
  }
  bytes::write_file(path, w.out);
}

inline BuiltDataset read_built_cache(const std::string& path) {
  const auto data = bytes::read_file(path);
  bytes::Reader r{data, 0, path};
  detail::check_cache_header(r, 1);
  BuiltDataset ds;
  ds.image_like = r.u8() != 0;
  ds.synthetic = r.u8() != 0;
  ds.shape.channels = r.u32();
  ds.shape.height = r.u32();
  ds.shape.width = r.u32();
  const std::uint32_t channels = r.u32();
  ds.stats.mean.resize(channels);
  ds.stats.stddev.resize(channels);
  for (std::uint32_t c = 0; c < channels; ++c) {
    ds.stats.mean[c] = r.f64();
    ds.stats.stddev[c] = r.f64();
  }
  for (auto* split : {&ds.train, &ds.test}) {
    const std::uint64_t count = r.u64();
    split->resize(count);
    for (auto& ex : *split) {
      ex.class_label = static_cast<std::int8_t>(r.u8());
      ex.group = static_cast<Group>(r.u8());
      ex.features.resize(ds.shape.size());
      for (double& f : ex.features) f = r.f64();
    }
  }
  if (r.pos != data.size()) {
    throw FormatError(path + ": trailing bytes at offset " + std::to_string(r.pos));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Model checkpoint (little-endian), bit-exact round-trip:
//   magic "BAMPCKPT", u32 version, u8 family, u32 depth/width/input_dim,
//   u32 layer count, per layer: u32 out/in dims, f64 weights, f64 biases,
//   then the velocity tensors in the same order, u32 epoch.
// ---------------------------------------------------------------------------
inline constexpr char kCheckpointMagic[8] = {'B', 'A', 'M', 'P', 'C', 'K', 'P', 'T'};

inline void save_checkpoint(const std::string& path, const ModelState& model) {
  bytes::Writer w;
  w.raw(kCheckpointMagic, 8);
  w.u32(static_cast<std::uint32_t>(kCheckpointVersion));
  w.u8(model.arch.family == ModelFamily::mlp ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(model.arch.depth));
  w.u32(static_cast<std::uint32_t>(model.arch.width));
  w.u32(static_cast<std::uint32_t>(model.arch.input_dim));
  w.u32(static_cast<std::uint32_t>(model.layers.size()));
  const auto write_tensors = [&](const std::vector<Layer>& layers) {
    for (const auto& layer : layers) {
      w.u32(static_cast<std::uint32_t>(layer.out_dim));
      w.u32(static_cast<std::uint32_t>(layer.in_dim));
      for (double v : layer.weights) w.f64(v);
      for (double v : layer.bias) w.f64(v);
    }
  };
  write_tensors(model.layers);
  write_tensors(model.velocity);
  w.u32(static_cast<std::uint32_t>(model.epoch));
  bytes::write_file(path, w.out);
}

inline ModelState load_checkpoint(const std::string& path) {
  const auto data = bytes::read_file(path);
  bytes::Reader r{data, 0, path};
  char magic[8];
  r.raw(magic, 8);
  if (std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw FormatError(path + ": bad magic at offset 0");
  }
  const std::uint32_t version = r.u32();
  if (version != static_cast<std::uint32_t>(kCheckpointVersion)) {
    throw FormatError(path + ": unsupported checkpoint version " +
                      std::to_string(version) + " at offset 8");
  }
  ModelState model;
  model.arch.family = r.u8() == 1 ? ModelFamily::mlp : ModelFamily::linear;
  model.arch.depth = static_cast<int>(r.u32());
  model.arch.width = static_cast<int>(r.u32());
  model.arch.input_dim = static_cast<int>(r.u32());
  const std::uint32_t layer_count = r.u32();
  const auto read_tensors = [&](std::vector<Layer>& layers) {
    layers.resize(layer_count);
    for (auto& layer : layers) {
      layer.out_dim = static_cast<int>(r.u32());
      layer.in_dim = static_cast<int>(r.u32());
      layer.weights.resize(static_cast<std::size_t>(layer.out_dim) * layer.in_dim);
      layer.bias.resize(static_cast<std::size_t>(layer.out_dim));
      for (double& v : layer.weights) v = r.f64();
      for (double& v : layer.bias) v = r.f64();
    }
  };
  read_tensors(model.layers);
  read_tensors(model.velocity);
  model.epoch = static_cast<int>(r.u32());
  if (r.pos != data.size()) {
    throw FormatError(path + ": trailing bytes at offset " + std::to_string(r.pos));
  }
  return model;
}

} // namespace biasamp
