#include "bubblelab/lab.hpp"

#include "bubblelab/snapshot.hpp"
#include "support.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace bubblelab;
using namespace bubblelab::testing;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("bubblelab_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

LabConfig small_sweep(const fs::path& out) {
  LabConfig c = config_from_json({{"grid_n", 128},
                                  {"epsilon_list", {1e-3, 5e-4}},
                                  {"output_dir", out.string()},
                                  {"minimizer", {{"log_every", 0}}}});
  return c;
}

}  // namespace

TEST_CASE("snapshot round trip is bit-identical") {
  const fs::path dir = scratch("snapshot");
  const Grid grid(64);
  Rng rng(71);
  const Vec3Field u = smooth_unit_map(grid, rng);
  const fs::path bin = dir / "field.bin";
  write_snapshot(bin, grid, u);
  CHECK(fs::file_size(bin) == std::uintmax_t(64) * 64 * 3 * 8);
  CHECK(meta_path(bin) == dir / "field.meta.json");
  const json meta = json::parse(slurp(meta_path(bin)));
  CHECK(meta.at("n") == 64);
  CHECK(meta.at("components") == 3);
  CHECK(meta.at("dtype") == "float64-little-endian");
  CHECK(meta.at("layout") == "row-major, component-fastest");
  const Snapshot s = read_snapshot(bin);
  CHECK(s.n == 64);
  CHECK(s.field == u);
}

TEST_CASE("snapshot corruption is detected") {
  const fs::path dir = scratch("snapshot_bad");
  const Grid grid(64);
  Rng rng(72);
  const fs::path bin = dir / "field.bin";
  write_snapshot(bin, grid, smooth_unit_map(grid, rng));

  json meta = json::parse(slurp(meta_path(bin)));
  meta["n"] = 128;
  std::ofstream(meta_path(bin)) << meta.dump();
  CHECK_THROWS_WITH_AS(read_snapshot(bin), doctest::Contains("dimension mismatch"), SnapshotError);

  LabConfig c;
  c.output_dir = dir / "fit";
  CHECK(cmd_fit(c, bin) == kExitConfig);

  meta["n"] = 64;
  std::ofstream(meta_path(bin)) << meta.dump();
  CHECK_NOTHROW(read_snapshot(bin));
  {
    std::fstream f(bin, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(100);
    f.put('\x7f');
  }
  CHECK_THROWS_WITH_AS(read_snapshot(bin), doctest::Contains("checksum"), SnapshotError);
  CHECK_THROWS_AS(read_snapshot(dir / "missing.bin"), SnapshotError);
}

TEST_CASE("FNV-1a reference values") {
  CHECK(fnv1a64("", 0) == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a", 1) == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar", 6) == 0x85944171f73967e8ULL);
}

TEST_CASE("configuration defaults and overrides") {
  const LabConfig d = config_from_json(json::object());
  CHECK(d.grid_n == 512);
  CHECK(d.epsilon_list == std::vector<double>{1e-4, 5e-5, 2.5e-5});
  CHECK_FALSE(d.bubble.lambda.has_value());

  const LabConfig c = config_from_json(
      {{"grid_n", 256}, {"seed", 9}, {"bubble", {{"a", {0.2, 0.3}}, {"lambda", 14.0}, {"cold", true}}}});
  CHECK(c.grid_n == 256);
  CHECK(c.seed == 9);
  CHECK(c.bubble.a.x() == doctest::Approx(0.2));
  CHECK(*c.bubble.lambda == 14.0);
  CHECK(c.bubble.cold);
  CHECK_FALSE(config_from_json({{"bubble", {{"lambda", "predicted"}}}}).bubble.lambda.has_value());

  const LabConfig back = config_from_json(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));
}

TEST_CASE("configuration errors") {
  CHECK_THROWS_AS(config_from_json({{"grid_size", 256}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"grid_n", 100}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"grid_n", 32}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"epsilon_list", {1e-4, 2e-4}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"epsilon_list", {1e-4, -1e-5}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"epsilon_list", json::array()}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"bubble", {{"lambda", "large"}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"bubble", {{"a", {0.1}}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"minimizer", {{"tolerance", 1e-3}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"grid_n", "big"}}), ConfigError);
}

TEST_CASE("full-precision numbers round-trip") {
  for (double v : {M_PI, 1.0 / 3.0, 2.5e-5, -1e-300}) CHECK(std::stod(full_precision(v)) == v);
}

TEST_CASE("sweep CSV layout") {
  CHECK(sweep_csv_header() ==
        "epsilon,lambda_hat,a_x,a_y,det_R,energy_total,energy_dirichlet,residual,eps_lambda4,"
        "z_distance,iterations");
  SweepRow r;
  r.epsilon = 1e-4;
  r.lambda_hat = M_PI;
  r.iterations = 7;
  const std::string line = sweep_csv_line(r);
  CHECK(std::count(line.begin(), line.end(), ',') == 10);
  CHECK(std::stod(line.substr(line.find(',') + 1)) == M_PI);
  CHECK(line.substr(line.rfind(',') + 1) == "7");
}

TEST_CASE("least-squares line with a Student-t interval") {
  const auto f = fit_line({0, 1, 2, 3}, {1, 3, 2, 5});
  CHECK(f.slope == doctest::Approx(1.1));
  CHECK(f.intercept == doctest::Approx(1.1));
  CHECK(f.slope_stderr == doctest::Approx(std::sqrt(0.27)));
  // t quantile 0.975 with 2 degrees of freedom
  CHECK(f.slope_ci_high - f.slope == doctest::Approx(4.302652729911275 * std::sqrt(0.27)));
  CHECK(std::isnan(fit_line({0, 1}, {0, 1}).slope_stderr));
  CHECK_THROWS(fit_line({1}, {1}));
  CHECK_THROWS(fit_line({1, 1}, {1, 2}));
}

TEST_CASE("scaling report on exact balance points") {
  std::vector<SweepRow> rows;
  for (double eps : {1e-4, 5e-5, 2.5e-5}) {
    SweepRow r;
    r.epsilon = eps;
    r.lambda_hat = predicted_lambda(eps, -2 * M_PI);
    r.eps_lambda4 = eps * std::pow(r.lambda_hat, 4);
    rows.push_back(r);
  }
  const auto s = scaling_report(rows, {1, 1, 1});
  CHECK(s.fit.slope == doctest::Approx(-0.25).epsilon(1e-12));
  CHECK(s.target == doctest::Approx(3 * M_PI / 4));
  CHECK(s.mean_eps_lambda4 == doctest::Approx(s.target).epsilon(1e-12));
}

TEST_CASE("Green's subcommand") {
  LabConfig c;
  c.output_dir = scratch("greens");
  CHECK(cmd_greens(c) == kExitOk);
  const json j = json::parse(slurp(c.output_dir / "jsummary.json"));
  const double forms = j.at("scriptJ_forms");
  const double greens = j.at("scriptJ_greens");
  CHECK(forms == doctest::Approx(-6.283185).epsilon(1e-7));
  CHECK(std::abs(greens - forms) <= 1e-3 * std::abs(forms));
  CHECK(j.contains("mixed_hessian"));
  CHECK(j.contains("pde_residual"));
  const auto csv = lines(slurp(c.output_dir / "greens.csv"));
  REQUIRE(csv.size() > 1);
  CHECK(csv[0] == "x,y,g,gradJ1,gradJ2");
}

TEST_CASE("expansion subcommand writes its tables") {
  LabConfig c = config_from_json({{"verify", {{"lambdas", {4, 8}}, {"grids", {128, 256}}}}});
  c.output_dir = scratch("verify");
  const int code = cmd_verify_expansions(c);
  const json orders = json::parse(slurp(c.output_dir / "orders.json"));
  CHECK(code == (orders.at("violations").empty() ? kExitOk : kExitExpansion));
  const auto csv = lines(slurp(c.output_dir / "expansions.csv"));
  CHECK(csv.size() == 1 + 2 * 2);  // header, then (lambda, eps) pairs
}

TEST_CASE("sweep subcommand is reproducible and its snapshots refit") {
  const fs::path a = scratch("sweep_a"), b = scratch("sweep_b");
  REQUIRE(cmd_sweep(small_sweep(a)) == kExitOk);
  REQUIRE(cmd_sweep(small_sweep(b)) == kExitOk);
  const std::string csv = slurp(a / "sweep.csv");
  CHECK(csv == slurp(b / "sweep.csv"));
  const auto rows = lines(csv);
  CHECK(rows.size() == 3);
  CHECK(rows[0] == sweep_csv_header());
  CHECK(slurp(a / "scaling.json") == slurp(b / "scaling.json"));
  const json scaling = json::parse(slurp(a / "scaling.json"));
  CHECK(scaling.at("degrees") == json({1, 1}));
  CHECK(scaling.at("target").get<double>() == doctest::Approx(3 * M_PI / 4));

  LabConfig fc;
  fc.output_dir = a / "refit";
  CHECK(cmd_fit(fc, a / "field_eps1.bin") == kExitOk);
  const json fit = json::parse(slurp(fc.output_dir / "fit.json"));
  const double lambda_row = std::stod(lines(csv)[2].substr(lines(csv)[2].find(',') + 1));
  CHECK(fit.at("lambda").get<double>() == doctest::Approx(lambda_row).epsilon(1e-3));
}

TEST_CASE("sweep refuses an unresolved start") {
  LabConfig c = small_sweep(scratch("sweep_bad"));
  c.bubble.lambda = 60.0;
  CHECK(cmd_sweep(c) == kExitMinimizer);
}
