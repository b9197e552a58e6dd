#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "psense/io.hpp"

using namespace psense;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

int dir_counter = 0;

// scratch directory removed at the end of the test case
struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("psense_cli_" + std::to_string(::getpid()) + "_" + std::to_string(dir_counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string str(const std::string& name) const { return (path / name).string(); }
};

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PSENSE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

// small probe and hidden particle so every subcommand stays fast
json base_config() {
  json c;
  c["seed"] = 7;
  c["d1"]["shape"]["kind"] = "fourier";
  c["d1"]["shape"]["r0"] = 1.0;
  c["d1"]["shape"]["cos"] = {0.0, 0.0, 0.2};
  c["d1"]["shape"]["sin"] = {0.0, 0.1, 0.0};
  c["d1"]["delta"] = 0.15;
  c["d1"]["contrast"] = 1.0;
  c["d1"]["nodes"] = 64;
  c["d2"]["shape"]["kind"] = "ellipse";
  c["d2"]["shape"]["a"] = 1.0;
  c["d2"]["shape"]["b"] = 2.0;
  c["d2"]["nodes"] = 96;
  c["d2"]["modes"] = 4;
  c["sweep"]["re_min"] = -0.25;
  c["sweep"]["re_max"] = -0.10;
  c["sweep"]["im"] = 1e-4;
  c["sweep"]["count"] = 201;
  c["positions"]["kind"] = "ring";
  c["positions"]["radius"] = {4.3, 5.3};
  c["positions"]["count"] = 8;
  c["positions"]["orientation"] = 0.0;
  c["orders"]["recovery"] = 3;
  c["orders"]["tensor"] = 4;
  c["orders"]["series"] = 3;
  c["measurement_mode"] = "series";
  c["descent"]["max_iters"] = 3;
  c["descent"]["nodes"] = 64;
  c["descent"]["checkpoints"] = {0};
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("cli rejects bad invocations") {
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("") == 2);
  CHECK(run_cli("frobnicate --config nope.json") == 2);
  CHECK(run_cli("spectrum --config /does/not/exist.json") == 2);
}

TEST_CASE("cli rejects malformed configs") {
  TempDir tmp;
  json c = base_config();
  c["typo_key"] = 1;
  write_json_file(tmp.str("bad_key.json"), c);
  CHECK(run_cli("spectrum --config " + tmp.str("bad_key.json") + " --out " + tmp.str("o1")) == 2);

  c = base_config();
  c["measurement_mode"] = "psychic";
  write_json_file(tmp.str("bad_mode.json"), c);
  CHECK(run_cli("spectrum --config " + tmp.str("bad_mode.json") + " --out " + tmp.str("o2")) == 2);

  write_text_file(tmp.str("bad_syntax.json"), "{\"seed\": }\n");
  CHECK(run_cli("spectrum --config " + tmp.str("bad_syntax.json") + " --out " + tmp.str("o3")) ==
        2);
}

TEST_CASE("spectrum subcommand writes deterministic outputs") {
  TempDir tmp;
  write_json_file(tmp.str("run.json"), base_config());
  REQUIRE(run_cli("spectrum --config " + tmp.str("run.json") + " --out " + tmp.str("a")) == 0);
  for (const char* name : {"spectrum.json", "eigenvalues.csv", "probe_boundary.csv",
                           "config_resolved.json"})
    CHECK(fs::exists(tmp.path / "a" / name));

  const json spec = read_json_file(tmp.str("a/spectrum.json"));
  CHECK(spec.at("count").get<int>() == 4);
  CHECK(spec.at("eigenvalues").size() == 4);
  CHECK(spec.at("eigenvalues").at(0).get<double>() == Approx(-1.0 / 6.0).margin(1e-12));

  REQUIRE(run_cli("spectrum --config " + tmp.str("run.json") + " --out " + tmp.str("b")) == 0);
  CHECK(slurp(tmp.path / "a" / "spectrum.json") == slurp(tmp.path / "b" / "spectrum.json"));
}

TEST_CASE("resolved config reparses to the same resolution") {
  TempDir tmp;
  write_json_file(tmp.str("run.json"), base_config());
  REQUIRE(run_cli("spectrum --config " + tmp.str("run.json") + " --out " + tmp.str("a")) == 0);
  REQUIRE(run_cli("spectrum --config " + tmp.str("a/config_resolved.json") + " --out " +
                  tmp.str("b")) == 0);
  json first = read_json_file(tmp.str("a/config_resolved.json"));
  json second = read_json_file(tmp.str("b/config_resolved.json"));
  first.erase("output_dir");
  second.erase("output_dir");
  CHECK(first == second);
}

TEST_CASE("cgpt subcommand writes a readable tensor set") {
  TempDir tmp;
  write_json_file(tmp.str("run.json"), base_config());
  REQUIRE(run_cli("cgpt --config " + tmp.str("run.json") + " --out " + tmp.str("out")) == 0);
  const CgptSet set = cgpt_from_json(read_json_file(tmp.str("out/cgpt.json")));
  CHECK(set.order == 4);
  CHECK(set.block(1, 1).real().norm() > 0.0);
  CHECK(std::abs(set.block(1, 1)(0, 1) - set.block(1, 1)(1, 0)) < 1e-10);
}

TEST_CASE("sweep without a hidden particle finds unshifted resonances") {
  TempDir tmp;
  json c = base_config();
  c.erase("d1");
  write_json_file(tmp.str("run.json"), c);
  REQUIRE(run_cli("sweep --config " + tmp.str("run.json") + " --out " + tmp.str("out")) == 0);
  CHECK(fs::exists(tmp.path / "out" / "plot_sweeps.py"));
  const json summary = read_json_file(tmp.str("out/sweep_summary.json"));
  REQUIRE(summary.is_array());
  REQUIRE(summary.size() == 8);
  for (const json& e : summary) {
    REQUIRE(e.contains("lambda_r"));
    CHECK(std::abs(e.at("p_j").get<double>()) < 1e-6);
    CHECK(e.at("lambda_r").get<double>() == Approx(-1.0 / 6.0).margin(1e-4));
  }
}

TEST_CASE("measure without a hidden particle reports zero shifts") {
  TempDir tmp;
  json c = base_config();
  c.erase("d1");
  write_json_file(tmp.str("run.json"), c);
  REQUIRE(run_cli("measure --config " + tmp.str("run.json") + " --out " + tmp.str("out")) == 0);
  const std::vector<MeasurementRecord> recs =
      measurements_from_json(read_json_file(tmp.str("out/measurements.json")));
  REQUIRE(recs.size() == 8);
  for (const auto& r : recs) CHECK(std::abs(r.shift) < 1e-15);
}

TEST_CASE("placements inside the separation floor are refused") {
  TempDir tmp;
  json c = base_config();
  c["positions"]["radius"] = 2.5;
  c["positions"]["orientation"] = "radial";
  write_json_file(tmp.str("run.json"), c);
  CHECK(run_cli("measure --config " + tmp.str("run.json") + " --out " + tmp.str("out")) == 4);
}

TEST_CASE("recovery refuses an underdetermined placement set") {
  TempDir tmp;
  json c = base_config();
  c["positions"]["count"] = 5;
  write_json_file(tmp.str("run.json"), c);
  REQUIRE(run_cli("measure --config " + tmp.str("run.json") + " --out " + tmp.str("out")) == 0);
  CHECK(run_cli("recover --config " + tmp.str("run.json") + " --out " + tmp.str("out")) == 2);
}

TEST_CASE("measure, recover, reconstruct round trip") {
  TempDir tmp;
  write_json_file(tmp.str("run.json"), base_config());
  const std::string tail = " --config " + tmp.str("run.json") + " --out " + tmp.str("out");
  REQUIRE(run_cli("measure" + tail) == 0);
  REQUIRE(run_cli("recover" + tail) == 0);

  CHECK(fs::exists(tmp.path / "out" / "stage_report.csv"));
  const CgptSet recovered = cgpt_from_json(read_json_file(tmp.str("out/recovered_cgpt.json")));
  CHECK(recovered.order == 3);
  CHECK(recovered.contrast == Complex(1.0, 0.0));

  REQUIRE(run_cli("reconstruct" + tail) == 0);
  for (const char* name : {"descent_log.csv", "final_shape.json", "final_shape.csv",
                           "shape_iter_0.csv"})
    CHECK(fs::exists(tmp.path / "out" / name));

  // objective column of the descent log must decrease strictly
  std::ifstream log(tmp.path / "out" / "descent_log.csv");
  std::string line;
  std::getline(log, line);  // header
  double prev = 0.0;
  int rows = 0;
  while (std::getline(log, line)) {
    const double jc = std::stod(line.substr(line.find(',') + 1));
    if (rows > 0) CHECK(jc < prev);
    prev = jc;
    ++rows;
  }
  CHECK(rows >= 2);

  const json shape = read_json_file(tmp.str("out/final_shape.json"));
  CHECK(shape.at("kind").get<std::string>() == "fourier");
  CHECK(shape.at("r0").get<double>() > 0.0);
}

TEST_CASE("reconstruct without a recovered tensor file fails cleanly") {
  TempDir tmp;
  write_json_file(tmp.str("run.json"), base_config());
  CHECK(run_cli("reconstruct --config " + tmp.str("run.json") + " --out " + tmp.str("empty")) ==
        2);
}

TEST_CASE("noisy measurements are reproducible and seed dependent") {
  TempDir tmp;
  json c = base_config();
  c["noise"]["level"] = 0.02;
  write_json_file(tmp.str("run.json"), c);
  const std::string head = "measure --config " + tmp.str("run.json");
  REQUIRE(run_cli(head + " --out " + tmp.str("a") + " --workers 1") == 0);
  REQUIRE(run_cli(head + " --out " + tmp.str("b") + " --workers 3") == 0);
  CHECK(slurp(tmp.path / "a" / "measurements.json") == slurp(tmp.path / "b" / "measurements.json"));

  REQUIRE(run_cli(head + " --out " + tmp.str("c") + " --seed 123") == 0);
  CHECK(slurp(tmp.path / "a" / "measurements.json") != slurp(tmp.path / "c" / "measurements.json"));
}
