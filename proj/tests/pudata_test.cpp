#include "hdpan/pudata.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace hdpan {
namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / "hdpan_pudata_test" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

LabeledImageSet random_set(std::size_t n, std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed,
                           int classes = 2) {
  std::mt19937_64 rng(seed);
  LabeledImageSet ds;
  ds.name = "random";
  ds.images = ImageSet{n, h, w, c, std::vector<std::uint8_t>(n * h * w * c)};
  for (auto& p : ds.images.pixels) p = static_cast<std::uint8_t>(rng() & 0xff);
  for (std::size_t i = 0; i < n; ++i) ds.labels.push_back(static_cast<std::uint8_t>(rng() % classes));
  return ds;
}

LabeledImageSet with_labels(std::vector<std::uint8_t> labels) {
  LabeledImageSet ds;
  ds.name = "fixed";
  ds.images = ImageSet{labels.size(), 1, 1, 1, std::vector<std::uint8_t>(labels.size())};
  for (std::size_t i = 0; i < labels.size(); ++i) ds.images.pixels[i] = static_cast<std::uint8_t>(i);
  ds.labels = std::move(labels);
  return ds;
}

TEST(Parity, EvenClassesArePositive) {
  const std::vector<std::uint8_t> labels{1, 2, 3, 4};
  EXPECT_EQ(binarize_by_parity(labels), (std::vector<std::uint8_t>{0, 1, 0, 1}));
  const std::vector<std::uint8_t> even{2, 4, 6, 8};
  EXPECT_EQ(binarize_by_parity(even), (std::vector<std::uint8_t>{1, 1, 1, 1}));
}

TEST(Parity, FlipsBinaryLabelsSoBinarySetsBypassIt) {
  const std::vector<std::uint8_t> bin{0, 1};
  EXPECT_EQ(binarize_by_parity(bin), (std::vector<std::uint8_t>{1, 0}));
  EXPECT_EQ(binarize(with_labels({0, 1, 1}), LabelMode::kAuto).labels, (std::vector<std::uint8_t>{0, 1, 1}));
}

TEST(Parity, OffsetConvertsZeroIndexedStorage) {
  // Stored 0..3 are classes 1..4.
  const std::vector<std::uint8_t> stored{0, 1, 2, 3};
  EXPECT_EQ(binarize_by_parity(stored, 1), (std::vector<std::uint8_t>{0, 1, 0, 1}));
  auto ds = with_labels({0, 1, 2, 3});
  ds.label_offset = 1;
  EXPECT_EQ(binarize(ds, LabelMode::kAuto).labels, (std::vector<std::uint8_t>{0, 1, 0, 1}));
  EXPECT_THROW(binarize(ds, LabelMode::kBinary), DataError);
}

TEST(PuSplit, BreastMnistSizes) {
  // 546 training images; enough positives to draw 100.
  auto train = with_labels(std::vector<std::uint8_t>(546, 0));
  for (std::size_t i = 0; i < 546; i += 2) train.labels[i] = 1;
  const auto split = make_pu_split(train, with_labels({0, 1}), with_labels({1, 0}), 100, 3);
  EXPECT_EQ(split.positives().n, 100u);
  EXPECT_EQ(split.unlabeled().n, 446u);
  EXPECT_EQ(split.positives().n + split.unlabeled().n, train.size());
}

TEST(PuSplit, SeededAndDisjoint) {
  auto train = binarize(random_set(300, 2, 2, 1, 1), LabelMode::kBinary);
  const auto a = make_pu_split(train, train, train, 40, 9);
  const auto b = make_pu_split(train, train, train, 40, 9);
  const auto c = make_pu_split(train, train, train, 40, 10);
  EXPECT_EQ(a.positive_indices(), b.positive_indices());
  EXPECT_NE(a.positive_indices(), c.positive_indices());
  std::set<std::size_t> pos(a.positive_indices().begin(), a.positive_indices().end());
  for (std::size_t i : a.unlabeled_indices()) EXPECT_FALSE(pos.count(i));
  for (std::size_t i : a.positive_indices()) EXPECT_EQ(train.labels[i], 1);
}

TEST(PuSplit, AllPositivesLeavesOnlyNegativesUnlabeled) {
  auto train = with_labels({1, 0, 1, 0, 0, 1});
  const auto split = make_pu_split(train, train, train, 3, 0);
  const std::vector<double> say_negative(split.unlabeled().n, 0.0);
  const auto rep = evaluate_unlabeled(split, say_negative);
  EXPECT_EQ(rep.cm.tn, 3u);
  EXPECT_EQ(rep.cm.fn, 0u);
}

TEST(PuSplit, InsufficientPositives) {
  auto train = with_labels({1, 0, 0});
  EXPECT_THROW(make_pu_split(train, train, train, 2, 0), DataError);
}

TEST(PuSplit, ExplicitIndicesValidated) {
  auto train = with_labels({1, 0, 1});
  EXPECT_THROW(PUSplit(train, train, train, {0}, {1}, 0), DataError);        // does not cover
  EXPECT_THROW(PUSplit(train, train, train, {0}, {0, 1, 2}, 0), DataError);  // overlap
  EXPECT_THROW(PUSplit(train, train, train, {1}, {0, 2}, 0), DataError);     // negative as positive
  EXPECT_NO_THROW(PUSplit(train, train, train, {2}, {0, 1}, 0));
}

TEST(DatasetIo, RoundTripIsByteIdentical) {
  const auto dir = scratch("roundtrip");
  for (std::size_t c : {1u, 3u}) {
    auto ds = random_set(17, 5, 4, c, 42 + c, 8);
    ds.label_offset = 1;
    save_dataset(ds, dir / std::to_string(c));
    const auto back = load_dataset(dir / std::to_string(c));
    EXPECT_EQ(back.images.pixels, ds.images.pixels);
    EXPECT_EQ(back.labels, ds.labels);
    EXPECT_EQ(back.name, ds.name);
    EXPECT_EQ(back.label_offset, 1);
    EXPECT_EQ(back.images.c, c);
  }
}

TEST(DatasetIo, MetaFormat) {
  const auto dir = scratch("meta");
  auto ds = random_set(2, 3, 3, 1, 1);
  ds.name = "tiny";
  save_dataset(ds, dir);
  std::ifstream in(dir / "meta");
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), "name=tiny\nn=2\nh=3\nw=3\nc=1\nlabel_offset=0\n");
  EXPECT_EQ(fs::file_size(dir / "images.bin"), 18u);
  EXPECT_EQ(fs::file_size(dir / "labels.bin"), 2u);
}

TEST(DatasetIo, CorruptLengthIsAnError) {
  const auto dir = scratch("corrupt");
  save_dataset(random_set(4, 2, 2, 1, 1), dir);
  {
    std::ofstream meta(dir / "meta", std::ios::trunc);
    meta << "name=x\nn=5\nh=2\nw=2\nc=1\nlabel_offset=0\n";
  }
  EXPECT_THROW(load_dataset(dir), DataError);
}

TEST(DatasetIo, TruncatedImagesIsAnError) {
  const auto dir = scratch("truncated");
  save_dataset(random_set(4, 2, 2, 1, 1), dir);
  fs::resize_file(dir / "images.bin", 10);
  EXPECT_THROW(load_dataset(dir), DataError);
}

TEST(DatasetIo, RejectsTwoChannels) {
  const auto dir = scratch("twochannel");
  auto ds = random_set(3, 2, 2, 2, 1);
  save_dataset(ds, dir);
  EXPECT_THROW(load_dataset(dir), DataError);
}

TEST(DatasetIo, MissingDirectory) { EXPECT_THROW(load_dataset("/nonexistent/hdpan"), DataError); }

TEST(Normalize, Values) {
  ImageSet im{1, 1, 4, 1, {0, 255, 51, 128}};
  const Tensor t = normalize(im);
  EXPECT_EQ(t.shape(), (Shape{1, 1, 4, 1}));
  EXPECT_EQ(t[0], 0.0f);
  EXPECT_EQ(t[1], 1.0f);
  EXPECT_FLOAT_EQ(t[2], 0.2f);
  for (int b = 0; b < 256; ++b) {
    ImageSet one{1, 1, 1, 1, {static_cast<std::uint8_t>(b)}};
    const float x = normalize(one)[0];
    const float back = x * 255.0f;
    EXPECT_LE(std::abs(back - static_cast<float>(b)), std::nextafter(static_cast<float>(b), 1e9f) - static_cast<float>(b));
  }
}

TEST(Synthetic, SeedDeterminism) {
  const auto a = synth_gaussians(50, 3, 4.0, 1);
  const auto b = synth_gaussians(50, 3, 4.0, 1);
  EXPECT_EQ(a.images.pixels, b.images.pixels);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.images.h, 1u);
  EXPECT_EQ(a.images.w, 3u);
  EXPECT_EQ(std::count(a.labels.begin(), a.labels.end(), 1), 50);
}

// Bayes rule on the first coordinate: positive iff x > 0, i.e. byte >= 128.
double bayes_accuracy(const LabeledImageSet& ds) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const bool pred = ds.images.pixels[i * ds.images.w] >= 128;
    correct += pred == (ds.labels[i] == 1);
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

TEST(Synthetic, BayesAccuracyMatchesGaussianTail) {
  // Phi(3) = 0.5 * erfc(-3 / sqrt 2)
  const double phi3 = 0.5 * std::erfc(-3.0 / std::sqrt(2.0));
  EXPECT_NEAR(phi3, 0.99865010196836990547, 1e-15);
  const auto ds = synth_gaussians(50000, 2, 6.0, 7);
  EXPECT_NEAR(bayes_accuracy(ds), phi3, 1.5e-3);
}

TEST(Synthetic, ZeroSeparationIsChance) {
  const auto ds = synth_gaussians(50000, 2, 0.0, 7);
  EXPECT_NEAR(bayes_accuracy(ds), 0.5, 0.01);
}

}  // namespace
}  // namespace hdpan
