#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "biasamp/io.hpp"
#include "biasamp/transforms.hpp"

using namespace biasamp;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir() {
  const fs::path dir = fs::temp_directory_path() / "biasamp_io_tests";
  fs::create_directories(dir);
  return dir;
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
}

void push_u32_be(std::vector<std::uint8_t>& v, std::uint32_t x) {
  v.push_back(static_cast<std::uint8_t>(x >> 24));
  v.push_back(static_cast<std::uint8_t>(x >> 16));
  v.push_back(static_cast<std::uint8_t>(x >> 8));
  v.push_back(static_cast<std::uint8_t>(x));
}

std::vector<std::uint8_t> idx_images(std::uint32_t count, std::uint32_t rows,
                                     std::uint32_t cols) {
  std::vector<std::uint8_t> v;
  push_u32_be(v, 0x00000803);
  push_u32_be(v, count);
  push_u32_be(v, rows);
  push_u32_be(v, cols);
  for (std::uint32_t i = 0; i < count * rows * cols; ++i) {
    v.push_back(static_cast<std::uint8_t>(i % 251));
  }
  return v;
}

std::vector<std::uint8_t> idx_labels(const std::vector<std::uint8_t>& labels) {
  std::vector<std::uint8_t> v;
  push_u32_be(v, 0x00000801);
  push_u32_be(v, static_cast<std::uint32_t>(labels.size()));
  v.insert(v.end(), labels.begin(), labels.end());
  return v;
}

} // namespace

TEST_CASE("idx ingestion decodes headers and pixels") {
  const auto dir = tmp_dir();
  write_bytes(dir / "imgs", idx_images(4, 2, 3));
  write_bytes(dir / "labels", idx_labels({0, 1, 1, 0}));

  const auto ds = ingest_idx((dir / "imgs").string(), (dir / "labels").string(), Split::train);
  REQUIRE(ds.size() == 4);
  REQUIRE(ds.shape == ImageShape{1, 2, 3});
  REQUIRE(ds.class_count == 2);
  REQUIRE(ds.labels == std::vector<std::int32_t>{0, 1, 1, 0});
  REQUIRE(ds.pixels.size() == 24);
  REQUIRE(ds.pixels[0] == 0);
  REQUIRE(ds.pixels[7] == 7);
}

TEST_CASE("idx ingestion rejects bad magic and truncation") {
  const auto dir = tmp_dir();
  auto broken = idx_images(2, 2, 2);
  broken[3] = 0x07; // wrong magic
  write_bytes(dir / "bad_magic", broken);
  write_bytes(dir / "labels2", idx_labels({0, 1}));
  REQUIRE_THROWS_AS(
      ingest_idx((dir / "bad_magic").string(), (dir / "labels2").string(), Split::train),
      FormatError);
  REQUIRE_THROWS_WITH(
      ingest_idx((dir / "bad_magic").string(), (dir / "labels2").string(), Split::train),
      Catch::Matchers::ContainsSubstring("offset 0"));

  auto truncated = idx_images(2, 2, 2);
  truncated.resize(truncated.size() - 3);
  write_bytes(dir / "trunc", truncated);
  REQUIRE_THROWS_AS(
      ingest_idx((dir / "trunc").string(), (dir / "labels2").string(), Split::train),
      FormatError);

  // label count mismatch
  write_bytes(dir / "imgs2", idx_images(2, 2, 2));
  write_bytes(dir / "labels3", idx_labels({0, 1, 0}));
  REQUIRE_THROWS_WITH(
      ingest_idx((dir / "imgs2").string(), (dir / "labels3").string(), Split::train),
      Catch::Matchers::ContainsSubstring("offset 4"));
}

TEST_CASE("cifar10 ingestion uses 1 label byte + 3072 pixels") {
  const auto dir = tmp_dir();
  std::vector<std::uint8_t> file;
  for (int rec = 0; rec < 3; ++rec) {
    file.push_back(static_cast<std::uint8_t>(rec + 2));
    for (int i = 0; i < 3072; ++i) file.push_back(static_cast<std::uint8_t>((rec + i) % 256));
  }
  write_bytes(dir / "c10.bin", file);
  const auto ds = ingest({(dir / "c10.bin").string()}, IngestFormat::cifar10, Split::test);
  REQUIRE(ds.size() == 3);
  REQUIRE(ds.class_count == 10);
  REQUIRE(ds.shape == ImageShape{3, 32, 32});
  REQUIRE(ds.labels == std::vector<std::int32_t>{2, 3, 4});
  REQUIRE(ds.split == Split::test);

  // truncated record
  file.pop_back();
  write_bytes(dir / "c10_bad.bin", file);
  REQUIRE_THROWS_AS(ingest({(dir / "c10_bad.bin").string()}, IngestFormat::cifar10, Split::test),
                    FormatError);
}

TEST_CASE("cifar100 ingestion uses the fine label") {
  const auto dir = tmp_dir();
  std::vector<std::uint8_t> file;
  for (int rec = 0; rec < 2; ++rec) {
    file.push_back(static_cast<std::uint8_t>(rec));      // coarse
    file.push_back(static_cast<std::uint8_t>(90 + rec)); // fine
    for (int i = 0; i < 3072; ++i) file.push_back(7);
  }
  write_bytes(dir / "c100.bin", file);
  const auto ds = ingest({(dir / "c100.bin").string()}, IngestFormat::cifar100, Split::train);
  REQUIRE(ds.size() == 2);
  REQUIRE(ds.class_count == 100);
  REQUIRE(ds.labels == std::vector<std::int32_t>{90, 91});
}

TEST_CASE("raw cache round-trips bit-exactly") {
  const auto dir = tmp_dir();
  RawDataset ds;
  ds.split = Split::test;
  ds.shape = ImageShape{3, 4, 5};
  ds.class_count = 17;
  Rng rng(123);
  for (int i = 0; i < 31; ++i) {
    ds.labels.push_back(static_cast<std::int32_t>(rng.uniform_below(17)));
    for (std::size_t k = 0; k < ds.shape.size(); ++k) {
      ds.pixels.push_back(static_cast<std::uint8_t>(rng.uniform_below(256)));
    }
  }
  const auto path = (dir / "raw.bampdata").string();
  write_raw_cache(path, ds);
  const auto loaded = read_raw_cache(path);
  REQUIRE(loaded.split == ds.split);
  REQUIRE(loaded.shape == ds.shape);
  REQUIRE(loaded.class_count == ds.class_count);
  REQUIRE(loaded.labels == ds.labels);
  REQUIRE(loaded.pixels == ds.pixels);

  // rewriting the loaded dataset reproduces the file byte for byte
  const auto path2 = (dir / "raw2.bampdata").string();
  write_raw_cache(path2, loaded);
  REQUIRE(bytes::read_file(path) == bytes::read_file(path2));
}

TEST_CASE("built cache round-trips bit-exactly including stats") {
  const auto dir = tmp_dir();
  SynthConfig cfg;
  cfg.dimension = 5;
  cfg.class_margin = 1.5;
  cfg.group_margin = 0.5;
  cfg.noise_sigma = 1.0;
  cfg.train_size = 40;
  cfg.test_size = 20;
  BiasConfig bias;
  bias.epsilon = 0.2;
  const auto ds = synth_generate(cfg, bias, 99);

  const auto path = (dir / "built.bampdata").string();
  write_built_cache(path, ds);
  const auto loaded = read_built_cache(path);
  REQUIRE(loaded.train.size() == ds.train.size());
  REQUIRE(loaded.test.size() == ds.test.size());
  REQUIRE(loaded.shape == ds.shape);
  REQUIRE(loaded.synthetic == ds.synthetic);
  REQUIRE(loaded.stats.mean == ds.stats.mean);
  REQUIRE(loaded.stats.stddev == ds.stats.stddev);
  for (std::size_t i = 0; i < ds.train.size(); ++i) {
    REQUIRE(loaded.train[i].features == ds.train[i].features);
    REQUIRE(loaded.train[i].class_label == ds.train[i].class_label);
    REQUIRE(loaded.train[i].group == ds.train[i].group);
  }
  const auto path2 = (dir / "built2.bampdata").string();
  write_built_cache(path2, loaded);
  REQUIRE(bytes::read_file(path) == bytes::read_file(path2));
}

TEST_CASE("cache rejects foreign files") {
  const auto dir = tmp_dir();
  write_bytes(dir / "junk", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13});
  REQUIRE_THROWS_AS(read_raw_cache((dir / "junk").string()), FormatError);
  REQUIRE_THROWS_AS(read_raw_cache((dir / "missing").string()), FormatError);
}
