#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "gseg/checkpoint.hpp"
#include "gseg/dataset.hpp"
#include "gseg/metrics.hpp"
#include "gseg/train.hpp"

using namespace gseg;
namespace fs = std::filesystem;

namespace {

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("gseg_ckpt_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                        "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& b) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

std::vector<double> snapshot(const Segmenter& m) {
  std::vector<double> out;
  for (const auto& p : m.parameters()) out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

template <typename F>
CheckpointError::Kind error_kind(F&& f) {
  try {
    f();
  } catch (const CheckpointError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected CheckpointError";
  return CheckpointError::Kind::io;
}

SegmenterConfig small_config() {
  SegmenterConfig c;
  c.steps = 20;
  return c;
}

}  // namespace

TEST_F(CheckpointTest, RoundTripIsBitExact) {
  Segmenter m(small_config());
  train(m, training_set(small_config()), TrainOptions::from_config(small_config()));
  save_checkpoint(m, dir_ / "m.wgts");
  SegmenterConfig other = small_config();
  other.seed = 99;  // different init, overwritten by the load
  Segmenter loaded(other);
  load_checkpoint(dir_ / "m.wgts", loaded);
  EXPECT_TRUE(bit_equal(snapshot(m), snapshot(loaded)));
  EXPECT_TRUE(bit_equal(snapshot(m), snapshot(load_checkpoint(dir_ / "m.wgts", small_config()))));
}

TEST_F(CheckpointTest, EvaluationBeforeSaveEqualsAfterLoad) {
  const SegmenterConfig c = small_config();
  Segmenter m(c);
  train(m, training_set(c), TrainOptions::from_config(c));
  const auto before = evaluate_miou(m, test_set(c));
  save_checkpoint(m, dir_ / "m.wgts");
  const auto after = evaluate_miou(load_checkpoint(dir_ / "m.wgts", c), test_set(c));
  EXPECT_EQ(before.miou.mean, after.miou.mean);
  EXPECT_EQ(before.miou.confusion.counts, after.miou.confusion.counts);
  EXPECT_EQ(before.boundary_accuracy, after.boundary_accuracy);
}

TEST_F(CheckpointTest, LayoutFollowsDeclaredFormat) {
  Segmenter m(small_config());
  save_checkpoint(m, dir_ / "m.wgts");
  const auto b = read_bytes(dir_ / "m.wgts");
  ASSERT_GE(b.size(), 10u);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "WGTS");
  EXPECT_EQ(b[4] | (b[5] << 8), 1);
  const std::uint32_t count = b[6] | (b[7] << 8) | (b[8] << 16) | (static_cast<std::uint32_t>(b[9]) << 24);
  EXPECT_EQ(count, m.parameters().size());
  // First entry: name, dtype 0, rank 4, extents, offset 0, length in bytes.
  std::size_t pos = 10;
  auto u = [&](std::size_t n) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b[pos + i]) << (8 * i);
    pos += n;
    return v;
  };
  const auto len = u(2);
  EXPECT_EQ(std::string(b.begin() + pos, b.begin() + pos + len), "stem");
  pos += len;
  EXPECT_EQ(u(1), 0u);
  EXPECT_EQ(u(1), 4u);
  EXPECT_EQ(u(8), 16u);
  EXPECT_EQ(u(8), 3u);
  EXPECT_EQ(u(8), 3u);
  EXPECT_EQ(u(8), 3u);
  EXPECT_EQ(u(8), 0u);
  EXPECT_EQ(u(8), 16u * 27u * 8u);
  // Blob length equals the sum of tensor byte sizes.
  std::size_t manifest = 10;
  for (const auto& p : m.parameters()) manifest += 2 + p.name.size() + 2 + 8 * p.tensor.rank() + 16;
  EXPECT_EQ(b.size(), manifest + m.parameter_count() * 8);
}

TEST_F(CheckpointTest, TruncatedFileLeavesModelUntouched) {
  Segmenter m(small_config());
  save_checkpoint(m, dir_ / "m.wgts");
  auto b = read_bytes(dir_ / "m.wgts");
  for (std::size_t cut : {b.size() - 1, b.size() / 2, std::size_t{20}, std::size_t{7}}) {
    write_bytes(dir_ / "cut.wgts", std::vector<std::uint8_t>(b.begin(), b.begin() + static_cast<long>(cut)));
    SegmenterConfig other = small_config();
    other.seed = 5;
    Segmenter target(other);
    const auto before = snapshot(target);
    EXPECT_EQ(error_kind([&] { load_checkpoint(dir_ / "cut.wgts", target); }), CheckpointError::Kind::truncated)
        << "cut=" << cut;
    EXPECT_TRUE(bit_equal(snapshot(target), before));
  }
}

TEST_F(CheckpointTest, BadMagicAndVersion) {
  Segmenter m(small_config());
  save_checkpoint(m, dir_ / "m.wgts");
  auto b = read_bytes(dir_ / "m.wgts");
  auto bad = b;
  bad[0] = 'X';
  write_bytes(dir_ / "bad.wgts", bad);
  EXPECT_EQ(error_kind([&] { load_checkpoint(dir_ / "bad.wgts", m); }), CheckpointError::Kind::bad_magic);
  bad = b;
  bad[4] = 9;
  write_bytes(dir_ / "ver.wgts", bad);
  EXPECT_EQ(error_kind([&] { load_checkpoint(dir_ / "ver.wgts", m); }), CheckpointError::Kind::unsupported_version);
  EXPECT_EQ(error_kind([&] { load_checkpoint(dir_ / "missing.wgts", m); }), CheckpointError::Kind::io);
}

TEST_F(CheckpointTest, ManifestMismatchLeavesModelUntouched) {
  Segmenter m(small_config());
  save_checkpoint(m, dir_ / "m.wgts");
  SegmenterConfig no_ba = small_config();
  no_ba.enable_ba = false;
  Segmenter other(no_ba);
  const auto before = snapshot(other);
  EXPECT_EQ(error_kind([&] { load_checkpoint(dir_ / "m.wgts", other); }), CheckpointError::Kind::manifest_mismatch);
  EXPECT_TRUE(bit_equal(snapshot(other), before));

  SegmenterConfig wide = small_config();
  wide.channels = 32;
  Segmenter w(wide);
  EXPECT_EQ(error_kind([&] { load_checkpoint(dir_ / "m.wgts", w); }), CheckpointError::Kind::manifest_mismatch);
}

TEST_F(CheckpointTest, TrailingBytesAndBadDtypeAreMalformed) {
  Segmenter m(small_config());
  save_checkpoint(m, dir_ / "m.wgts");
  auto b = read_bytes(dir_ / "m.wgts");
  auto extra = b;
  extra.push_back(0);
  write_bytes(dir_ / "extra.wgts", extra);
  EXPECT_EQ(error_kind([&] { load_checkpoint(dir_ / "extra.wgts", m); }), CheckpointError::Kind::malformed);
  auto dtype = b;
  dtype[10 + 2 + 4] = 7;  // dtype byte of the first entry ("stem")
  write_bytes(dir_ / "dtype.wgts", dtype);
  EXPECT_EQ(error_kind([&] { load_checkpoint(dir_ / "dtype.wgts", m); }), CheckpointError::Kind::malformed);
}

TEST(CheckpointCodec, OverlappingRangesRejected) {
  std::vector<Parameter> params{{"a", Tensor::full({2}, 1.0)}, {"b", Tensor::full({2}, 2.0)}};
  auto bytes = encode_checkpoint(params);
  // Entry b's offset sits after name(1)+dtype+rank+extent(8)+offset(8)+length(8) of entry a.
  const std::size_t b_offset = 10 + (2 + 1 + 2 + 8 + 16) + (2 + 1 + 2 + 8);
  bytes[b_offset] = 0;  // now both entries start at 0
  try {
    decode_checkpoint(bytes);
    FAIL() << "expected malformed";
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::malformed) << e.what();
  }
  auto entries = decode_checkpoint(encode_checkpoint(params));
  ASSERT_EQ(entries.size(), 2u);
  EXPECT_EQ(entries[1].values, (std::vector<double>{2.0, 2.0}));
}
