#include "semscale/error.hpp"
#include "semscale/io.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace semscale;

TEST_CASE("sha256 of known strings")
{
  CHECK(io::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(io::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("format_double round-trips")
{
  for (double v : { 0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0, 123456789.0 }) {
    const auto s = io::format_double(v);
    CHECK(io::parse_double(s) == v);
  }
  CHECK(io::format_double(0.5) == "0.5");
  CHECK(io::format_double(2.0) == "2");
}

TEST_CASE("csv escaping and splitting")
{
  CHECK(io::csv_escape("plain") == "plain");
  CHECK(io::csv_escape("a,b") == "\"a,b\"");
  CHECK(io::csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
  const auto f = io::csv_split("x,\"a,b\",\"say \"\"hi\"\"\",");
  REQUIRE(f.size() == 4);
  CHECK(f[1] == "a,b");
  CHECK(f[2] == "say \"hi\"");
  CHECK(f[3].empty());
}

TEST_CASE("write_file replaces atomically and read_csv parses")
{
  testing::TempDir tmp;
  const auto p = tmp / "sub/t.csv";
  io::write_file(p, "a,b\n1,2\n");
  io::write_file(p, "a,b\n3,4\n");
  const auto t = io::read_csv(p);
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0][t.column("b")] == "4");
  CHECK_THROWS_AS(t.column("zzz"), DataError);
  for (const auto& e : std::filesystem::directory_iterator(p.parent_path()))
    CHECK(e.path().filename() == "t.csv");
}

TEST_CASE("numeric parsing rejects garbage")
{
  CHECK_THROWS_AS(io::parse_double("1.5x"), DataError);
  CHECK_THROWS_AS(io::parse_int("3.0"), DataError);
  CHECK(io::parse_int("-42") == -42);
}
