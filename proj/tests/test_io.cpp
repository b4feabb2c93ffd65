#include <doctest.h>

#include <cstdlib>

#include "fracsmp/io.hpp"
#include "helpers.hpp"

using namespace fracsmp;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::InvalidArgument;
}

}  // namespace

TEST_CASE("format_double round-trips with 17 significant digits") {
  for (double v : {0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0}) CHECK(std::strtod(io::format_double(v).c_str(), nullptr) == v);
  CHECK(io::format_double(0.5) == "0.5");
  CHECK(io::format_double(1.0 / 3.0) == "0.33333333333333331");
}

TEST_CASE("matrix CSV round trip in both layouts") {
  const auto basis = whiten(fgn_covariance(HurstParameter(0.7), 4));
  const std::string csv = io::matrix_csv(basis.b);
  CHECK(csv.rfind("n,k,value\n0,0,", 0) == 0);
  const MatrixX<double> back = io::parse_matrix_csv(csv);
  CHECK((back - basis.b).cwiseAbs().maxCoeff() == 0.0);
  const MatrixX<double> dense = io::parse_matrix_csv("1, 0.5\n0.5, 2\n");
  CHECK(dense(1, 1) == 2.0);
  CHECK(dense(0, 1) == 0.5);
  CHECK(code_of([] { io::parse_matrix_csv("1,x\n"); }) == Errc::ConfigError);
  CHECK(code_of([] { io::parse_matrix_csv("1,2\n3\n"); }) == Errc::ConfigError);
}

TEST_CASE("identity pattern of the white-noise basis") {
  const auto basis = whiten(fgn_covariance(HurstParameter(0.5), 3));
  CHECK(io::matrix_csv(basis.b) == "n,k,value\n0,0,1\n1,1,1\n2,2,1\n");
  CHECK(io::matrix_csv(basis.c) == "n,k,value\n");
}

TEST_CASE("malformed JSON reports line and column") {
  try {
    io::parse_json("{\n  \"horizon\": 2,\n  \"x\": ]\n}", "cfg.json");
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ConfigError);
    CHECK(std::string(e.what()).find("cfg.json:3:8") != std::string::npos);
  }
}

TEST_CASE("LQ config parsing") {
  const auto j = io::parse_json(
      R"({"horizon":2,"A":[0,0],"B":[1,1],"C":[0,0],"D":[1,1],"Q":[0,0],"R":[1,1],"G":1,"x":1,"hurst":0.7})", "t");
  const io::LqConfig cfg = io::parse_lq_config(j);
  CHECK(cfg.spec.horizon == 2);
  CHECK(cfg.run.hurst == 0.7);
  CHECK(cfg.run.quadrature_order == 3);

  auto with = [&](const std::string& key, io::Json value) {
    io::Json k = j;
    k[key] = value;
    return k;
  };
  CHECK(code_of([&] { io::parse_lq_config(with("bogus", 1)); }) == Errc::ConfigError);
  CHECK(code_of([&] { io::parse_lq_config(with("A", io::Json::array({0}))); }) == Errc::ConfigError);
  CHECK(code_of([&] { io::parse_lq_config(with("R", io::Json::array({1, -1}))); }) == Errc::InvalidSpec);
  CHECK(code_of([&] { io::parse_lq_config(with("hurst", 1.5)); }) == Errc::ConfigError);
  CHECK(code_of([&] { io::parse_lq_config(with("G", "one")); }) == Errc::ConfigError);
}

TEST_CASE("model config parsing") {
  const auto j = io::parse_json(
      R"({"horizon":3,"initial_state":0.5,"model":{"type":"sin_drift","c":0.5},"control_set":{"box":[-1,1]},"hurst":0.7,"quadrature_order":3})",
      "t");
  const io::ModelConfig cfg = io::parse_model_config(j);
  CHECK(cfg.model.horizon == 3);
  CHECK(cfg.model.control_set.is_box());
  CHECK(cfg.model.control_set.upper() == 1.0);
  CHECK_FALSE(cfg.lq.has_value());

  const auto lq = io::parse_json(
      R"({"horizon":1,"initial_state":1,"model":{"type":"lq","A":[0],"B":[1],"C":[0],"D":[1],"Q":[0],"R":[1],"G":1},"control_set":"unconstrained","hurst":0.5})",
      "t");
  const io::ModelConfig lcfg = io::parse_model_config(lq);
  REQUIRE(lcfg.lq.has_value());
  CHECK(one_step_closed_form(*lcfg.lq) == doctest::Approx(-1.0 / 3.0));

  io::Json bad = j;
  bad["model"]["type"] = "quartic";
  CHECK(code_of([&] { io::parse_model_config(bad); }) == Errc::ConfigError);
  bad = j;
  bad["model"]["extra"] = 1;
  CHECK(code_of([&] { io::parse_model_config(bad); }) == Errc::ConfigError);
  bad = j;
  bad["control_set"] = "everything";
  CHECK(code_of([&] { io::parse_model_config(bad); }) == Errc::ConfigError);
}

TEST_CASE("BSDE config builds the driver it describes") {
  const auto j = io::parse_json(
      R"({"horizon":2,"hurst":0.7,"terminal":{"xi":[0,1]},"f":{"y":[0,0]}})", "t");
  const io::BsdeConfig cfg = io::parse_bsde_config(j);
  const Lattice lat = io::bsde_lattice(cfg);
  CHECK(lat.depth() == 2);
  const BsdeSolution sol = solve_bsde(io::make_driver(cfg, lat), lat);
  CHECK(std::abs(sol.Z[0][0] - lat.basis().b(1, 0)) <= 1e-14);

  io::Json noisy = j;
  noisy["g"] = {{"const", {0.5, 0.5}}};
  const io::BsdeConfig ncfg = io::parse_bsde_config(noisy);
  CHECK(io::bsde_lattice(ncfg).depth() == 3);
  CHECK_FALSE(io::make_driver(ncfg, io::bsde_lattice(ncfg)).terminal_noise_free);

  io::Json bad = j;
  bad["terminal"]["xi"] = {1, 2, 3};
  CHECK(code_of([&] { io::parse_bsde_config(bad); }) == Errc::ConfigError);
}

TEST_CASE("control CSV round trip") {
  const Lattice lat = testing::make_lattice(0.7, 2, 3);
  const ControlProcess u = random_control(lat, 2, -1, 1, 3);
  const std::string csv = io::process_csv(u.stages, lat);
  CHECK(csv.rfind("stage,node_index,value,probability\n", 0) == 0);
  const ControlProcess back = io::parse_control_csv(csv, lat, 2);
  CHECK(max_abs_distance(back, u) == 0.0);
  CHECK(code_of([&] { io::parse_control_csv("stage,node_index,value\n0,0,1\n", lat, 2); }) == Errc::ConfigError);
  CHECK(code_of([&] { io::parse_control_csv("stage,node_index,value\n0,5,1\n", lat, 2); }) == Errc::ConfigError);
}

TEST_CASE("lattice path dump") {
  const Lattice lat = testing::make_lattice(0.7, 2, 2);
  const std::string csv = io::lattice_paths_csv(lat);
  CHECK(csv.rfind("path_index,stage,eta,xi,probability\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 9 * 2);
}
