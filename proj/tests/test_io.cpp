#include "firkrylov/io.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <limits>

using namespace firkrylov;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("firkrylov_io_" + name)).string();
}

}  // namespace

TEST(Io, DoubleRoundTrip) {
  const Vector v = oracle::gaussian(1000, 3);
  for (Index i = 0; i < v.size(); ++i) EXPECT_EQ(parse_double(format_double(v(i) * 1e-7)), v(i) * 1e-7);
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(parse_double(" +2.5 "), 2.5);
  EXPECT_THROW(parse_double("abc"), Error);
  EXPECT_THROW(parse_double("1.5x"), Error);
}

TEST(Io, SignalCsvRoundTripIsBitExact) {
  const std::string path = temp_path("roundtrip.csv");
  const Vector u = oracle::gaussian(500, 1);
  const Vector y = oracle::gaussian(500, 2) * 1e5;
  write_signal_csv(path, u, y, "manifest 0123");
  Vector u2, y2;
  read_signal_csv(path, u2, y2);
  EXPECT_EQ(u, u2);
  EXPECT_EQ(y, y2);
  EXPECT_EQ(read_text_file(path).rfind("# manifest 0123\nu,y\n", 0), 0u);
  std::remove(path.c_str());
}

TEST(Io, SignalCsvErrors) {
  const std::string path = temp_path("bad.csv");
  Vector u, y;
  write_text_file(path, "a,b\n1,2\n");
  EXPECT_THROW(read_signal_csv(path, u, y), Error);
  write_text_file(path, "u,y\n1,2,3\n");
  EXPECT_THROW(read_signal_csv(path, u, y), Error);
  write_text_file(path, "u,y\n1,x\n");
  EXPECT_THROW(read_signal_csv(path, u, y), Error);
  write_text_file(path, "u,y\n");
  EXPECT_THROW(read_signal_csv(path, u, y), Error);
  write_text_file(path, "u,y\r\n1,2\r\n3,4\r\n");
  read_signal_csv(path, u, y);
  EXPECT_EQ(u.size(), 2);
  EXPECT_EQ(y(1), 4.0);
  std::remove(path.c_str());
  EXPECT_THROW(read_signal_csv(temp_path("missing.csv"), u, y), Error);
}

TEST(Io, Fnv1a) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hash_hex(0xabcULL), "0000000000000abc");
}
