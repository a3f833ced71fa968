#include <doctest.h>

#include <cstdint>
#include <filesystem>

#include "advmetrics/csv.hpp"
#include "advmetrics/rng.hpp"

using namespace advmetrics;

TEST_CASE("format_double round-trips arbitrary doubles exactly") {
  RngStream stream(777);
  for (int i = 0; i < 200; ++i) {
    const double v = (stream.uniform01() - 0.5) * std::pow(10.0, i % 20 - 10);
    CHECK(csv::parse_double(csv::format_double(v)) == v);
  }
  CHECK(csv::format_double(7.0) == "7");
  CHECK_THROWS_AS(csv::parse_double("abc"), ParseError);
  CHECK_THROWS_AS(csv::parse_double("1.5x"), ParseError);
}

TEST_CASE("csv read/write round-trip with quoting") {
  csv::Table table;
  table.header = {"id", "text", "value"};
  table.rows.push_back({"a", "plain", "1.5"});
  table.rows.push_back({"b", "with,comma", "2"});
  table.rows.push_back({"c", "with \"quotes\"", "3"});
  table.rows.push_back({"d", "multi\nline", "4"});

  const auto path = std::filesystem::temp_directory_path() / "advm_test.csv";
  csv::write_file(path, table);
  const csv::Table back = csv::read_file(path);
  CHECK(back.header == table.header);
  REQUIRE(back.rows.size() == table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    CHECK(back.rows[i] == table.rows[i]);
  }
  CHECK(back.column("value") == 2);
  CHECK(!back.has_column("nope"));
  CHECK_THROWS_AS(back.column("nope"), ParseError);
  std::filesystem::remove(path);
}

TEST_CASE("csv rejects ragged rows and missing files") {
  const auto path = std::filesystem::temp_directory_path() / "advm_bad.csv";
  {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    REQUIRE(f != nullptr);
    std::fputs("a,b,c\n1,2\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(csv::read_file(path), ParseError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(csv::read_file("/nonexistent/x.csv"), IoError);
}
