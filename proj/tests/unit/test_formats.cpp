#include <gtest/gtest.h>

#include <filesystem>

#include "fguap/attack.hpp"
#include "fguap/binary_io.hpp"
#include "fguap/dataset.hpp"
#include "fguap/errors.hpp"
#include "fguap/model.hpp"
#include "fixtures.hpp"

namespace fguap {
namespace {

using Kind = FormatError::Kind;
using io::Bytes;

template <typename Fn>
Kind kind_of(Fn fn) {
  try {
    fn();
  } catch (const FormatError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no FormatError thrown";
  return Kind::kIo;
}

template <typename Fn>
std::string message_of(Fn fn) {
  try {
    fn();
  } catch (const FormatError& e) {
    return e.what();
  }
  return {};
}

// Rewrites the trailing CRC so that only the intended corruption is seen.
void refresh_crc(Bytes& b) {
  b.resize(b.size() - 4);
  const std::uint32_t crc = io::crc32(b.data() + 8, b.size() - 8);
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(crc >> (8 * i)));
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("fguap_fmt_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::filesystem::path dir_;
};

// ---- UAPDATA1 ---------------------------------------------------------------

using DatasetFile = TempDir;

TEST_F(DatasetFile, RoundTripIsBitExact) {
  const auto ds = testing::tiny_split(3, 4, 8, 1);
  data::save_dataset(ds, dir_ / "d.uapdata");
  const auto back = data::load_dataset(dir_ / "d.uapdata");
  EXPECT_EQ(back, ds);
  EXPECT_EQ(data::encode_dataset(back), data::encode_dataset(ds));
}

TEST(DatasetFormat, CorruptionsGiveDistinctErrors) {
  const Bytes good = data::encode_dataset(testing::tiny_split(3, 2, 8, 2));

  Bytes cut(good.begin(), good.begin() + good.size() / 2);
  EXPECT_EQ(kind_of([&] { data::decode_dataset(cut); }), Kind::kTruncated);
  EXPECT_NE(message_of([&] { data::decode_dataset(cut); }).find("truncated payload"),
            std::string::npos);

  Bytes magic = good;
  magic[0] = 'X';
  EXPECT_EQ(kind_of([&] { data::decode_dataset(magic); }), Kind::kBadMagic);
  EXPECT_NE(message_of([&] { data::decode_dataset(magic); }).find("not a dataset file"),
            std::string::npos);

  Bytes flipped = good;
  flipped[good.size() / 2] ^= 0x01;
  EXPECT_EQ(kind_of([&] { data::decode_dataset(flipped); }), Kind::kChecksum);

  Bytes header = good;
  header[8] = 1;  // K = 1
  header[9] = header[10] = header[11] = 0;
  EXPECT_EQ(kind_of([&] { data::decode_dataset(header); }), Kind::kMalformedHeader);

  Bytes label = good;
  label[28] = 9;  // first label out of range for K = 3
  refresh_crc(label);
  EXPECT_EQ(kind_of([&] { data::decode_dataset(label); }), Kind::kValidation);

  Bytes trailing = good;
  trailing.push_back(0);
  EXPECT_EQ(kind_of([&] { data::decode_dataset(trailing); }), Kind::kMalformedHeader);
}

// ---- UAPCKPT1 ---------------------------------------------------------------

using CheckpointFile = TempDir;

TEST_F(CheckpointFile, RoundTripIsBitExactForEveryArch) {
  for (auto arch : {nn::Arch::kConvNet, nn::Arch::kMlp, nn::Arch::kAttnNet}) {
    nn::Model m = nn::Model::build(arch, 8, 5);
    nn::TrainingRecord rec;
    rec.epochs = 3;
    rec.batch_size = 16;
    rec.learning_rate = 1e-3;
    rec.weight_decay = 1e-4;
    rec.seed = 5;
    rec.train_accuracy = 0.1 + 0.2;
    rec.test_accuracy = 1.0 / 3.0;
    m.set_training(rec);
    const auto path = dir_ / "m.uapckpt";
    nn::save_checkpoint(m, path);
    const nn::Model back = nn::load_checkpoint(path, arch);
    EXPECT_EQ(back.arch(), arch);
    EXPECT_EQ(back.init_seed(), 5u);
    ASSERT_TRUE(back.training().has_value());
    EXPECT_EQ(*back.training(), rec);
    const auto a = m.parameters();
    const auto b = back.parameters();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].first, b[i].first);
      EXPECT_EQ(*a[i].second, *b[i].second);
    }
    EXPECT_EQ(nn::encode_checkpoint(back), nn::encode_checkpoint(m));
  }
}

TEST(CheckpointFormat, CorruptionsGiveDistinctErrors) {
  const nn::Model mlp = nn::Model::build(nn::Arch::kMlp, 8, 1);
  const Bytes good = nn::encode_checkpoint(mlp);

  Bytes magic = good;
  magic[3] ^= 0xff;
  EXPECT_EQ(kind_of([&] { nn::decode_checkpoint(magic); }), Kind::kBadMagic);

  Bytes version = good;
  version[8] = 2;
  EXPECT_EQ(kind_of([&] { nn::decode_checkpoint(version); }), Kind::kVersion);

  Bytes cut(good.begin(), good.end() - 100);
  EXPECT_EQ(kind_of([&] { nn::decode_checkpoint(cut); }), Kind::kTruncated);

  Bytes flipped = good;
  flipped[good.size() - 50] ^= 0x10;
  EXPECT_EQ(kind_of([&] { nn::decode_checkpoint(flipped); }), Kind::kChecksum);

  EXPECT_EQ(kind_of([&] { nn::decode_checkpoint(good, nn::Arch::kConvNet); }),
            Kind::kArchitectureMismatch);

  // A well-formed container with one tensor too many.
  io::Container c = io::decode_container("UAPCKPT1", good, "checkpoint");
  c.tensors.push_back({"extra", Tensor::vector({1.0})});
  EXPECT_EQ(kind_of([&] { nn::decode_checkpoint(io::encode_container("UAPCKPT1", c)); }),
            Kind::kTensorCount);

  // Right count, wrong length for one tensor.
  c.tensors.pop_back();
  c.tensors[0].tensor = Tensor({2, 2});
  EXPECT_EQ(kind_of([&] { nn::decode_checkpoint(io::encode_container("UAPCKPT1", c)); }),
            Kind::kTensorShape);
}

// ---- UAPPERT1 ---------------------------------------------------------------

using PerturbationFile = TempDir;

TEST_F(PerturbationFile, RoundTripIsBitExact) {
  for (bool targeted : {false, true}) {
    auto p = attack::uniform_random_perturbation({1, 24, 24}, 10.0 / 255.0, 3);
    p.method = targeted ? attack::Method::kFeatureGathering : attack::Method::kLogitCosine;
    if (targeted) p.target = 4;
    p.surrogate = "convnet";
    p.seed = 99;
    attack::save_perturbation(p, dir_ / "p.uappert");
    EXPECT_EQ(attack::load_perturbation(dir_ / "p.uappert"), p);
  }
}

TEST(PerturbationFormat, CorruptionsGiveDistinctErrors) {
  const auto p = attack::uniform_random_perturbation({1, 8, 8}, 0.1, 4);
  const Bytes good = attack::encode_perturbation(p);

  Bytes magic = good;
  magic[0] = 'Z';
  EXPECT_EQ(kind_of([&] { attack::decode_perturbation(magic); }), Kind::kBadMagic);

  Bytes cut(good.begin(), good.end() - 9);
  EXPECT_EQ(kind_of([&] { attack::decode_perturbation(cut); }), Kind::kTruncated);

  Bytes flipped = good;
  flipped[good.size() - 20] ^= 0x04;
  EXPECT_EQ(kind_of([&] { attack::decode_perturbation(flipped); }), Kind::kChecksum);

  io::Container c = io::decode_container("UAPPERT1", good, "perturbation");
  c.tensors.push_back(c.tensors[0]);
  EXPECT_EQ(kind_of([&] { attack::decode_perturbation(io::encode_container("UAPPERT1", c)); }),
            Kind::kTensorCount);

  // Budget violation written by someone else's tool.
  c.tensors.pop_back();
  c.tensors[0].tensor[0] = 0.2;
  EXPECT_EQ(kind_of([&] { attack::decode_perturbation(io::encode_container("UAPPERT1", c)); }),
            Kind::kValidation);
}

TEST(FormatIo, MissingFileIsAnIoError) {
  EXPECT_EQ(kind_of([] { data::load_dataset("/nonexistent/fguap/x.uapdata"); }), Kind::kIo);
}

TEST(FormatIo, RealTextRoundTrips) {
  for (double v : {0.0, 1.0 / 3.0, 10.0 / 255.0, 1e-300, -2.5e17, 0.1 + 0.2}) {
    EXPECT_EQ(io::parse_real(io::format_real(v)), v);
  }
  const io::Metadata meta = {{"a", "1"}, {"key", "some value"}};
  EXPECT_EQ(io::parse_metadata(io::format_metadata(meta)), meta);
}

}  // namespace
}  // namespace fguap
