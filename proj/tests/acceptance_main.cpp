#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "fracsmp/selftest.hpp"

namespace fs = std::filesystem;
using namespace fracsmp::selftest;

namespace {

const AcceptanceReport& report() {
  static const AcceptanceReport r = [] {
    AcceptanceReport rep = run_acceptance(0);
    for (const auto& c : rep.criteria) std::cout << format_line(c) << '\n';
    std::cout << (rep.pass() ? "all criteria passed" : "some criteria FAILED") << std::endl;
    return rep;
  }();
  return r;
}

void check_criterion(int id) {
  const CriterionResult* found = nullptr;
  for (const auto& c : report().criteria)
    if (c.id == id) found = &c;
  REQUIRE_MESSAGE(found != nullptr, "criterion " << id << " missing from the report");
  INFO(format_line(*found));
  CHECK(found->pass);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("criterion 01: whitening round trip") { check_criterion(1); }
TEST_CASE("criterion 02: white-noise reduction") { check_criterion(2); }
TEST_CASE("criterion 03: Monte Carlo covariance") { check_criterion(3); }
TEST_CASE("criterion 04: BSDE against brute force") { check_criterion(4); }
TEST_CASE("criterion 05: residual orthogonality") { check_criterion(5); }
TEST_CASE("criterion 06: duality identity") { check_criterion(6); }
TEST_CASE("criterion 07: gradient against finite differences") { check_criterion(7); }
TEST_CASE("criterion 08: variation rate") { check_criterion(8); }
TEST_CASE("criterion 09: one-step closed form") { check_criterion(9); }
TEST_CASE("criterion 10: LQ certificates") { check_criterion(10); }
TEST_CASE("criterion 11: optimizer against fixed point") { check_criterion(11); }
TEST_CASE("criterion 12: determinism") {
  check_criterion(12);
  const fs::path root = fs::temp_directory_path() / ("fracsmp_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  write_report(report(), root / "a");
  write_report(run_acceptance(0), root / "b");
  for (const auto& [name, content] : report().files) {
    CHECK_MESSAGE(slurp(root / "a" / name) == content, name);
    CHECK_MESSAGE(slurp(root / "b" / name) == content, name);
  }
  fs::remove_all(root);
}

int main(int argc, char** argv) {
  doctest::Context ctx(argc, argv);
  ctx.setOption("order-by", "name");
  return ctx.run();
}
