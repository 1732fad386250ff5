#include <naptron/io/store_file.hpp>

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace naptron;

namespace {

PatternStore random_store(std::mt19937_64& rng, std::size_t length, int classes) {
  StoreConfig cfg{static_cast<std::int32_t>(rng() % 4), 0.45, 0.7, 0.25};
  PatternStore s(cfg);
  for (int c = 0; c < classes; ++c) {
    s.register_class(c * 3);
    const std::size_t n = rng() % 20;
    for (std::size_t i = 0; i < n; ++i) {
      BinaryPattern p(length);
      for (std::size_t b = 0; b < length; ++b) p.set(b, (rng() >> 63) != 0);
      s.insert(c * 3, p);
    }
  }
  s.freeze();
  return s;
}

std::string serialize(const PatternStore& s) {
  std::ostringstream out;
  io::write_store(out, s);
  return out.str();
}

PatternStore deserialize(const std::string& bytes) {
  std::istringstream in(bytes);
  return io::read_store(in);
}

}  // namespace

TEST(StoreFile, RoundTripIsStructurallyEqualAndBitExact) {
  std::mt19937_64 rng(17);
  for (std::size_t len : {1u, 63u, 64u, 65u, 300u}) {
    auto s = random_store(rng, len, 5);
    if (s.total_count() == 0) continue;
    const std::string bytes = serialize(s);
    const auto back = deserialize(bytes);
    EXPECT_EQ(back, s);
    EXPECT_EQ(serialize(back), bytes);
  }
}

TEST(StoreFile, HeaderLayout) {
  PatternStore s(StoreConfig{2, 0.5, 0.9, 0.1});
  s.insert(7, BinaryPattern::from_string("101"));
  s.freeze();
  const std::string b = serialize(s);
  ASSERT_EQ(b.size(), 4 + 4 + 4 + 4 + 4 + 24 + 4 + 8 + 8u);
  EXPECT_EQ(b.substr(0, 4), "NAPS");
  EXPECT_EQ(static_cast<unsigned char>(b[4]), 1);   // version
  EXPECT_EQ(static_cast<unsigned char>(b[8]), 3);   // pattern length
  EXPECT_EQ(static_cast<unsigned char>(b[12]), 1);  // class count
  EXPECT_EQ(static_cast<unsigned char>(b[16]), 2);  // layer
  EXPECT_EQ(static_cast<unsigned char>(b[44]), 7);  // first class id
  EXPECT_EQ(static_cast<unsigned char>(b[48]), 1);  // pattern count
  EXPECT_EQ(static_cast<unsigned char>(b[56]), 0b101);
}

TEST(StoreFile, EmptyClassRoundTrips) {
  PatternStore s(StoreConfig{}, 16);
  s.register_class(0);
  s.register_class(4);
  s.insert(4, BinaryPattern(16));
  s.freeze();
  const auto back = deserialize(serialize(s));
  EXPECT_TRUE(back.has_class(0));
  EXPECT_EQ(back.count(0), 0u);
  EXPECT_EQ(back, s);
}

TEST(StoreFile, CorruptionIsRejected) {
  PatternStore s;
  s.insert(1, BinaryPattern::from_string("1100110011"));
  s.freeze();
  const std::string good = serialize(s);

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(deserialize(bad_magic), ValidationError);

  std::string bad_version = good;
  bad_version[4] = 9;
  EXPECT_THROW(deserialize(bad_version), ValidationError);

  for (std::size_t cut : {0u, 3u, 20u, 45u})
    EXPECT_THROW(deserialize(good.substr(0, cut)), ValidationError) << cut;
  EXPECT_THROW(deserialize(good.substr(0, good.size() - 1)), ValidationError);
  EXPECT_THROW(deserialize(good + "x"), ValidationError);

  std::string padding = good;
  padding[good.size() - 1] = static_cast<char>(0x80);  // bit 63 of a 10-bit pattern
  EXPECT_THROW(deserialize(padding), ValidationError);
}

TEST(StoreFile, UnfrozenStoreCannotBeSaved) {
  PatternStore s;
  s.insert(0, BinaryPattern(4));
  std::ostringstream out;
  EXPECT_THROW(io::write_store(out, s), StateError);
}

TEST(StoreFile, LoadedStoreIsFrozen) {
  PatternStore s;
  s.insert(0, BinaryPattern(4));
  s.freeze();
  auto back = deserialize(serialize(s));
  EXPECT_TRUE(back.frozen());
  EXPECT_THROW(back.insert(0, BinaryPattern(4)), StateError);
}
