#include <doctest.h>

#include <sstream>
#include <string>

#include <json.hpp>

#include "smoothdiff/errors.hpp"
#include "smoothdiff/io.hpp"

using namespace smoothdiff;

namespace {

std::string error_of(const std::string& text) {
  std::istringstream in(text);
  try {
    (void)read_strata_csv(in, Family::gaussian, "data.csv");
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("number formatting round-trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345678.9, 0.0}) CHECK(std::stod(format_double(v)) == v);
  CHECK(format_double(std::nan("")) == "nan");
  CHECK(format_double(-INFINITY) == "-inf");
}

TEST_CASE("strata CSV round trip") {
  StratumData a, b;
  a.y = Eigen::VectorXd::Random(5);
  a.z = Eigen::VectorXd::Random(5);
  a.x = Eigen::MatrixXd::Random(5, 2);
  b.y = Eigen::VectorXd::Random(3);
  b.z = Eigen::VectorXd::Random(3);
  b.x = Eigen::MatrixXd::Random(3, 2);
  std::stringstream buf;
  write_strata_csv(buf, a, b);
  const auto [ra, rb] = read_strata_csv(buf, Family::gaussian);
  CHECK(ra.y == a.y);
  CHECK(ra.z == a.z);
  CHECK(ra.x == a.x);
  CHECK(rb.y == b.y);
  CHECK(rb.x == b.x);
}

TEST_CASE("CSV parsing") {
  SUBCASE("labels, extra columns and order") {
    std::istringstream in("z,group_note,y,stratum\n0.5,a,1,B\n0.25,b,2,A\n0.75,c,3,B\n");
    const auto [first, second] = read_strata_csv(in, Family::gaussian);
    CHECK(first.size() == 2);
    CHECK(second.size() == 1);
    CHECK(first.y[1] == 3.0);
    CHECK(second.z[0] == 0.25);
    CHECK(first.x.cols() == 0);
  }
  SUBCASE("single stratum file") {
    std::istringstream in("y,z,x_age\n1,0.1,30\n0,0.2,40\n");
    const auto d = read_stratum_csv(in, Family::binomial);
    CHECK(d.family == Family::binomial);
    CHECK(d.x.cols() == 1);
    CHECK(d.x(1, 0) == 40.0);
  }
  SUBCASE("diagnostics carry line numbers") {
    CHECK(error_of("stratum,y,z\n1,0.5,0.1\n1,abc,0.2\n").find("data.csv:3") != std::string::npos);
    CHECK(error_of("stratum,y,z\n1,0.5\n").find("data.csv:2") != std::string::npos);
    CHECK(error_of("stratum,y\n1,0.5\n").find("'y' and 'z'") != std::string::npos);
    CHECK(error_of("stratum,y,z\n1,0.5,0.1\n2,0.5,0.1\n3,1,1\n") != "");
    CHECK(error_of("stratum,y,z\n1,0.5,0.1\n") != "");
    CHECK(error_of("") != "");
    CHECK(error_of("stratum,y,z\n1,nan,0.1\n2,1,1\n") != "");
  }
}

TEST_CASE("key-value files") {
  std::istringstream in("# comment\npreset = table2a\n\nreplicates=200  \nname = \"quoted\"\n");
  const auto kv = read_key_values(in);
  CHECK(kv.at("preset") == "table2a");
  CHECK(kv.at("replicates") == "200");
  CHECK(kv.at("name") == "quoted");
  std::istringstream bad("no equals sign here\n");
  CHECK_THROWS_AS(read_key_values(bad, "cfg"), InputError);
}

TEST_CASE("report JSON") {
  TdpReport r;
  r.alpha = 0.05;
  r.h = 3;
  ThresholdRegion region;
  region.threshold = 0.9;
  region.windows = {1, 2};
  region.discoveries = 2;
  region.tdp_bound = 1.0;
  region.intervals.add({0.5, 1.5});
  r.regions.push_back(region);
  const auto j = nlohmann::json::parse(report_json(r));
  CHECK(j.dump().find("0.9") != std::string::npos);
  CHECK(j.dump().find("1.5") != std::string::npos);
}
