#include <gtest/gtest.h>

#include <cstring>
#include <limits>

#include "support.hpp"

using namespace hitlor;
using hitlor::testing::temp_dir;

namespace {

DescriptorSet make_set(GridSpec g, std::size_t n, std::size_t d, std::uint64_t seed = 1, std::string tag = "tag") {
  Rng rng(seed);
  std::vector<float> data(n * static_cast<std::size_t>(g.cells()) * d);
  for (auto& v : data) v = static_cast<float>(rng.normal());
  return DescriptorSet(g, n, d, std::move(data), std::move(tag));
}

ImageManifest manifest_of(std::size_t n) {
  std::vector<ImageEntry> images;
  for (std::size_t i = 0; i < n; ++i) images.push_back({hitlor::testing::image_id(i), std::nullopt, 64, 48});
  return ImageManifest("m", std::move(images));
}

}  // namespace

TEST(Hitlorf1, RoundTripIsBitIdentical) {
  const auto set = make_set({2, 3}, 5, 7, 3, "dinov2-small/avg");
  const auto bytes = encode_descriptors(set);
  EXPECT_EQ(bytes.size(), kDescriptorHeaderBytes + 5 * 6 * 7 * 4);
  const auto back = decode_descriptors(bytes);
  EXPECT_EQ(back.grid(), set.grid());
  EXPECT_EQ(back.images(), 5u);
  EXPECT_EQ(back.dim(), 7u);
  EXPECT_EQ(back.source_tag(), "dinov2-small/avg");
  ASSERT_EQ(back.data().size(), set.data().size());
  EXPECT_EQ(std::memcmp(back.data().data(), set.data().data(), set.data().size() * 4), 0);
}

TEST(Hitlorf1, SpecialFloatBitsSurvive) {
  std::vector<float> data{0.0f, -0.0f, std::numeric_limits<float>::denorm_min(), std::numeric_limits<float>::max()};
  const DescriptorSet set({1, 1}, 1, 4, data, "");
  const auto back = decode_descriptors(encode_descriptors(set));
  EXPECT_EQ(std::memcmp(back.data().data(), data.data(), 16), 0);
}

TEST(Hitlorf1, HeaderLayoutIsLittleEndian) {
  const auto bytes = encode_descriptors(make_set({2, 2}, 3, 4));
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 8), "HITLORF1");
  EXPECT_EQ(bytes[8], 1);   // version
  EXPECT_EQ(bytes[12], 3);  // N
  EXPECT_EQ(bytes[16], 4);  // d
  EXPECT_EQ(bytes[20], 2);  // rows
  EXPECT_EQ(bytes[22], 2);  // cols
  EXPECT_EQ(bytes[24], 't');
}

TEST(Hitlorf1, RejectsCorruptInput) {
  const auto good = encode_descriptors(make_set({1, 1}, 3, 4));
  auto bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_descriptors(bad_magic), LoadError);
  auto bad_version = good;
  bad_version[8] = 2;
  EXPECT_THROW(decode_descriptors(bad_version), LoadError);
  auto truncated = good;
  truncated.pop_back();
  EXPECT_THROW(decode_descriptors(truncated), LoadError);
  auto trailing = good;
  trailing.push_back(0);
  EXPECT_THROW(decode_descriptors(trailing), LoadError);
  EXPECT_THROW(decode_descriptors(std::vector<unsigned char>(good.begin(), good.begin() + 10)), LoadError);
}

TEST(Hitlorf1, NanNamesTheRow) {
  auto bytes = encode_descriptors(make_set({1, 1}, 3, 4));
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::uint32_t bits;
  std::memcpy(&bits, &nan, 4);
  const std::size_t offset = kDescriptorHeaderBytes + (2 * 4 + 1) * 4;  // row 2, value 1
  for (int i = 0; i < 4; ++i) bytes[offset + i] = static_cast<unsigned char>(bits >> (8 * i));
  try {
    decode_descriptors(bytes);
    FAIL() << "expected an error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }
}

TEST(Hitlorf1, FileRoundTrip) {
  const auto dir = temp_dir("fs-roundtrip");
  const auto set = make_set({4, 4}, 6, 3);
  write_descriptors(dir / "f.bin", set);
  const auto back = read_descriptors(dir / "f.bin");
  EXPECT_EQ(std::memcmp(back.data().data(), set.data().data(), set.data().size() * 4), 0);
  EXPECT_THROW(read_descriptors(dir / "missing.bin"), LoadError);
}

TEST(Manifest, RejectsDuplicatesAndBadSizes) {
  EXPECT_THROW(ImageManifest("m", {{"a", std::nullopt, 1, 1}, {"a", std::nullopt, 1, 1}}), ValidationError);
  EXPECT_THROW(ImageManifest("m", {{"a", std::nullopt, 0, 1}}), ValidationError);
  const auto m = manifest_of(3);
  EXPECT_EQ(m.row_of("im002"), 2u);
  EXPECT_FALSE(m.find("nope"));
}

TEST(Dataset, SmallestConsistentBundle) {
  std::vector<DescriptorSet> sets;
  sets.push_back(make_set({1, 1}, 3, 4));
  const Dataset ds(manifest_of(3), std::nullopt, std::move(sets));
  EXPECT_EQ(ds.grids().size(), 1u);
  EXPECT_EQ(ds.descriptors({1, 1}).cells(), 1u);
  EXPECT_FALSE(ds.has_annotations());
  EXPECT_THROW(ds.annotations(), ConfigError);
  EXPECT_THROW(ds.descriptors({2, 2}), ConfigError);
}

TEST(Dataset, CountMismatchIsAnError) {
  std::vector<DescriptorSet> sets;
  sets.push_back(make_set({1, 1}, 4, 4));
  EXPECT_THROW(Dataset(manifest_of(3), std::nullopt, std::move(sets)), LoadError);
}

TEST(Dataset, MultiGridLoadFromFiles) {
  const auto dir = temp_dir("fs-multigrid");
  const auto manifest = manifest_of(3);
  write_json_file(dir / "manifest.json", manifest_to_json(manifest));
  write_descriptors(dir / "g1.bin", make_set({1, 1}, 3, 4));
  write_descriptors(dir / "g2.bin", make_set({2, 2}, 3, 4));
  const std::vector<std::filesystem::path> paths{dir / "g1.bin", dir / "g2.bin"};
  const auto ds = load_dataset(dir / "manifest.json", std::nullopt, paths);
  const auto grids = ds->grids();
  EXPECT_EQ(grids, (std::vector<GridSpec>{{1, 1}, {2, 2}}));
  // Deterministic: loading twice gives identical data.
  const auto again = load_dataset(dir / "manifest.json", std::nullopt, paths);
  EXPECT_EQ(std::memcmp(ds->descriptors({2, 2}).data().data(), again->descriptors({2, 2}).data().data(), 3 * 16 * 4), 0);
}

TEST(Dataset, DimensionMismatchAcrossGridsIsAnError) {
  std::vector<DescriptorSet> sets;
  sets.push_back(make_set({1, 1}, 3, 4));
  sets.push_back(make_set({2, 2}, 3, 5));
  EXPECT_THROW(Dataset(manifest_of(3), std::nullopt, std::move(sets)), LoadError);
}

TEST(Annotations, JsonRoundTripAndValidation) {
  const auto manifest = manifest_of(2);
  AnnotationStore store;
  store.add("im000", {"cat", {1, 2, 30, 40}});
  store.add("im000", {"dog", {0, 0, 64, 48}});
  const auto back = annotations_from_json(annotations_to_json(store), manifest);
  EXPECT_EQ(back.instances("im000").size(), 2u);
  EXPECT_TRUE(back.contains_class("im000", "dog"));
  EXPECT_FALSE(back.contains_class("im001", "dog"));
  EXPECT_EQ(back.classes(), (std::set<std::string>{"cat", "dog"}));

  const nlohmann::json outside{{"annotations", {{"im000", {{{"class", "cat"}, {"bbox", {0, 0, 65, 10}}}}}}}};
  EXPECT_THROW(annotations_from_json(outside, manifest), LoadError);
  const nlohmann::json unknown{{"annotations", {{"zzz", nlohmann::json::array()}}}};
  EXPECT_THROW(annotations_from_json(unknown, manifest), LoadError);
}

TEST(Manifest, JsonRoundTripKeepsPaths) {
  ImageManifest m("set", {{"a", std::string("imgs/a.jpg"), 10, 20}, {"b", std::nullopt, 5, 5}});
  const auto back = manifest_from_json(manifest_to_json(m));
  EXPECT_EQ(back.name(), "set");
  EXPECT_EQ(back[0].path.value(), "imgs/a.jpg");
  EXPECT_FALSE(back[1].path);
  EXPECT_EQ(back[0].height, 20);
  EXPECT_THROW(manifest_from_json(nlohmann::json{{"images", {{{"id", "x"}}}}}), LoadError);
}
