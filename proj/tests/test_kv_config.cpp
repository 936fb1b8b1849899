#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "floodgsa/error.hpp"
#include "floodgsa/kv_config.hpp"
#include "test_util.hpp"

namespace floodgsa {
namespace {

TEST(KeyValueConfig, ParsesValuesCommentsAndLists) {
  const auto cfg = KeyValueConfig::parse("# header\nname = valley  # trailing\n\nlevels = 1, 2,3\nsigma=0.2\n");
  EXPECT_EQ(cfg.get("name"), "valley");
  EXPECT_EQ(cfg.get_ints("levels"), (std::vector<int>{1, 2, 3}));
  EXPECT_DOUBLE_EQ(cfg.get_double("sigma"), 0.2);
  EXPECT_EQ(cfg.get_or("missing", "x"), "x");
  EXPECT_EQ(cfg.get_int_or("missing", 7), 7);
}

TEST(KeyValueConfig, ErrorsNameTheLine) {
  try {
    KeyValueConfig::parse("a = 1\nbroken line\n", "c.cfg");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("c.cfg:2"), std::string::npos);
  }
  EXPECT_THROW(KeyValueConfig::parse("a = 1\na = 2\n"), ParseError);
  EXPECT_THROW(KeyValueConfig::parse(" = 2\n"), ParseError);
}

TEST(KeyValueConfig, TypedGettersRejectGarbage) {
  const auto cfg = KeyValueConfig::parse("x = 1.5abc\nn = 2.5\n");
  EXPECT_THROW(cfg.get_double("x"), ValidationError);
  EXPECT_THROW(cfg.get_int("n"), ValidationError);
  EXPECT_THROW(cfg.get("nope"), ValidationError);
}

TEST(KeyValueConfig, RequireKnownRejectsStrayKeys) {
  const auto cfg = KeyValueConfig::parse("a = 1\nb = 2\n");
  EXPECT_NO_THROW(cfg.require_known({"a", "b", "c"}));
  EXPECT_THROW(cfg.require_known({"a"}), ParseError);
}

TEST(KeyValueConfig, SaveLoadRoundTrip) {
  testing::TempDir dir;
  KeyValueConfig cfg;
  cfg.set("alpha", "1");
  cfg.set("beta", "two words");
  cfg.save(dir / "x.cfg");
  const auto back = KeyValueConfig::load(dir / "x.cfg");
  EXPECT_EQ(back.entries(), cfg.entries());
}

TEST(FormatExact, RoundTripsRandomDoubles) {
  std::mt19937_64 eng(11);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 10000; ++i) {
    const double v = u(eng) * std::pow(10.0, static_cast<int>(eng() % 20) - 10);
    EXPECT_EQ(parse_double(format_exact(v), "v"), v);
  }
}

TEST(FormatSignificant, KeepsSixDigits) {
  EXPECT_EQ(format_significant(10.123456789), "10.1235");
  EXPECT_EQ(format_significant(5.0), "5");
}

TEST(WriteFileAtomic, ReplacesContentAndLeavesNoTemp) {
  testing::TempDir dir;
  write_file_atomic(dir / "f.txt", "one");
  write_file_atomic(dir / "f.txt", "two");
  EXPECT_EQ(read_file(dir / "f.txt"), "two");
  EXPECT_FALSE(std::filesystem::exists(dir / "f.txt.tmp"));
  EXPECT_THROW(read_file(dir / "absent.txt"), IoError);
  EXPECT_THROW(write_file_atomic(dir / "no/such/dir/f.txt", "x"), IoError);
}

}  // namespace
}  // namespace floodgsa
