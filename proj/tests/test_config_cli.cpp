#include <doctest.h>
#include <algorithm>
#include <cmath>
#include <numbers>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rotkde/cli.hpp"
#include "rotkde/config.hpp"

using namespace rotkde;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run invoke(const std::vector<std::string> &args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string &name) {
  const fs::path dir = fs::temp_directory_path() / "rotkde_test_config_cli";
  fs::create_directories(dir);
  return dir / name;
}

fs::path write_file(const std::string &name, const std::string &text) {
  const fs::path p = scratch(name);
  std::ofstream(p) << text;
  return p;
}

std::string read_file(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const json kExperiment = json::parse(R"({
  "estimator": {"kind": "oracle"},
  "n_grid": [64, 128, 256],
  "reps": 12,
  "seed": 17
})");

}  // namespace

TEST_CASE("experiment defaults are written out") {
  const Experiment e = experiment_from_json(kExperiment);
  const json &r = e.resolved;
  CHECK(r["model"]["beta"] == 2.0);
  CHECK(r["model"]["L"] == 1.0);
  CHECK(r["model"]["theta"] == 30.0);
  CHECK(r["model"]["marginal1"]["kind"] == "perturbed");
  CHECK(r["model"]["marginal2"]["eps"] == 0.5);
  CHECK(r["x"] == json::array({0.0, 0.0}));
  CHECK(r["p"] == 2.0);
  CHECK(e.reps == 12);
  CHECK(e.seed == 17);
  CHECK(experiment_from_json(json{{"estimator", {{"kind", "exact"}}}, {"n_grid", {1, 2, 3}}}, 99).seed == 99);
  // Resolving the resolved form is a fixed point.
  CHECK(experiment_from_json(r).resolved == r);
}

TEST_CASE("schema violations name the offending key") {
  auto path_of = [](json j) {
    try {
      experiment_from_json(j);
    } catch (const SchemaError &e) {
      return e.path();
    }
    return std::string("(none)");
  };
  json j = kExperiment;
  j["model"] = {{"beta", 0}};
  CHECK(path_of(j) == "model.beta");
  j = kExperiment;
  j["model"] = {{"marginal1", {{"kind", "gaussian"}}}};
  CHECK(path_of(j) == "model.marginal1.sigma");
  j = kExperiment;
  j["n_grid"] = {10, 20};
  CHECK(path_of(j) == "n_grid");
  j = kExperiment;
  j["reps"] = 1;
  CHECK(path_of(j) == "reps");
  j = kExperiment;
  j["estimator"]["kind"] = "bogus";
  CHECK(path_of(j) == "estimator.kind");
  j = kExperiment;
  j["estimator"]["params"] = {{"delta", 0.5}, {"zeta", 1}};
  CHECK(path_of(j) == "estimator.params.zeta");
  j = kExperiment;
  j["colour"] = "red";
  CHECK(path_of(j) == "colour");
}

TEST_CASE("risk subcommand: schema and certification errors exit 2") {
  json j = kExperiment;
  j["model"] = {{"beta", -1}};
  Run r = invoke({"risk", "--config", write_file("bad_beta.json", j.dump()).string(), "--out", "-"});
  CHECK(r.code == 2);
  CHECK(json::parse(r.err)["error"] == "schema");
  CHECK(json::parse(r.err)["path"] == "model.beta");

  j = kExperiment;
  j["model"] = {{"marginal1", {{"kind", "gaussian"}, {"sigma", 0.1}}}};
  r = invoke({"risk", "--config", write_file("uncertified.json", j.dump()).string(), "--out", "-"});
  CHECK(r.code == 2);
  const json e = json::parse(r.err);
  CHECK(e["error"] == "numeric");
  CHECK(e["where"].get<std::string>().find("y=") != std::string::npos);

  r = invoke({"risk", "--config", write_file("malformed.json", "{not json").string(), "--out", "-"});
  CHECK(r.code == 2);
  CHECK(json::parse(r.err)["error"] == "schema");
}

TEST_CASE("kernel and net subcommands") {
  Run r = invoke({"kernel", "--order", "1", "--check"});
  CHECK(r.code == 0);
  CHECK(r.out.find("power,coefficient\n0,1.125\n2,-1.875\n") == 0);
  CHECK(r.out.find("fail") == std::string::npos);
  CHECK(r.out.find("4,") == std::string::npos);
  CHECK(r.out.find("2,") != std::string::npos);

  CHECK(invoke({"kernel", "--order", "1", "--bogus"}).code == 1);
  CHECK(invoke({}).code == 1);
  CHECK(invoke({"net", "--delta", "1.5"}).code == 1);
  CHECK(invoke({"net", "--delta", "0"}).code == 1);

  r = invoke({"net", "--delta", "0.3"});
  CHECK(r.code == 0);
  CHECK(r.out.find("index,theta,q1,q2\n0,0,1,0\n") == 0);
  const int expected = static_cast<int>(std::floor(std::numbers::pi / (2 * std::asin(0.3))));
  CHECK(r.out.find("# cardinality=" + std::to_string(expected) + " ") != std::string::npos);
}

TEST_CASE("model subcommand") {
  const Run r = invoke({"model", "--config", write_file("model.json", R"({"theta": 45})").string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("\"theta\":45") != std::string::npos);
  const Run c = invoke({"model", "--config", write_file("model_exp.json", kExperiment.dump()).string(), "--check"});
  CHECK(c.code == 0);
  CHECK(c.out.find("marginal1,perturbed") != std::string::npos);
  CHECK(c.out.find(",fail,") == std::string::npos);
}

TEST_CASE("estimate and select read point files") {
  const fs::path pts = write_file("points.csv", "x1,x2\n0.1,0.2\n-0.3,0.05\n0.2,-0.15\n");
  Run r = invoke({"estimate", "--input", pts.string(), "--x", "0,0", "--h", "0.8", "--theta-d", "0"});
  CHECK(r.code == 0);
  const Points p = cli::read_points_csv(pts.string());
  CHECK(std::stod(r.out) == doctest::Approx(product_estimate(p, Point(0, 0), 0.8, Rotation::from_angle(0), Kernel(1))).epsilon(1e-15));

  r = invoke({"estimate", "--input", pts.string(), "--x", "0,0", "--h", "0.8", "--theta-d", "10",
           "--theta-q", "40", "--mode", "naive"});
  const Run pruned = invoke({"estimate", "--input", pts.string(), "--x", "0,0", "--h", "0.8",
                          "--theta-d", "10", "--theta-q", "40"});
  CHECK(r.code == 0);
  CHECK(std::abs(std::stod(r.out) - std::stod(pruned.out)) <= 1e-12);
  CHECK(invoke({"estimate", "--input", pts.string(), "--x", "0;0", "--h", "0.8", "--theta-d", "0"}).code == 1);

  const fs::path bad = write_file("bad_points.csv", "0.1,0.2\n0.3,abc\n");
  r = invoke({"estimate", "--input", bad.string(), "--x", "0,0", "--h", "0.8", "--theta-d", "0"});
  CHECK(r.code == 2);

  std::ostringstream csv;
  const Sample s = sample(Model(make_perturbed_marginal(2, 1, 0.5), make_perturbed_marginal(2, 1, 0.5),
                                Rotation::from_angle(0.5), 2, 1),
                          300, 3);
  for (Eigen::Index i = 0; i < s.points.rows(); ++i)
    csv << cli::format_number(s.points(i, 0)) << ',' << cli::format_number(s.points(i, 1)) << '\n';
  const fs::path big = write_file("sample.csv", csv.str());
  const fs::path diag = scratch("diag.csv");
  r = invoke({"select", "--input", big.string(), "--x", "0,0", "--rule", "adaptive", "--delta", "0.5",
           "--a-mult", "0.05", "--diagnostics", diag.string(), "--threads", "2"});
  CHECK(r.code == 0);
  CHECK(r.out.find("rule,theta_q,h,estimate,u_hat,penalty_constant\nadaptive,") == 0);
  const std::string d = read_file(diag);
  CHECK(d.find("rule,stage,theta_q,h,r_value,criterion,chosen\n") == 0);
  CHECK(std::count(d.begin(), d.end(), '\n') > 2);
  // Exactly one chosen cell.
  std::size_t chosen = 0;
  std::istringstream lines(d);
  for (std::string line; std::getline(lines, line);) chosen += line.size() > 2 && line.substr(line.size() - 2) == ",1";
  CHECK(chosen == 1);
}

TEST_CASE("risk reports round-trip and are thread-count invariant") {
  json j = kExperiment;
  j["estimator"] = {{"kind", "adaptive"}, {"params", {{"delta", 0.5}, {"a_mult", 0.05}}}};
  j["n_grid"] = {40, 80, 160};
  j["reps"] = 6;
  const fs::path cfg = write_file("exp.json", j.dump());
  const fs::path one = scratch("one.csv"), eight = scratch("eight.csv"), svg = scratch("plot.svg");
  CHECK(invoke({"risk", "--config", cfg.string(), "--out", one.string(), "--threads", "1"}).code == 0);
  CHECK(invoke({"risk", "--config", cfg.string(), "--out", eight.string(), "--threads", "8", "--plot",
             svg.string()})
            .code == 0);
  const std::string a = read_file(one), b = read_file(eight);
  CHECK(a == b);
  CHECK(read_file(svg).find("<svg") == 0);

  // Header, three rows, two footers.
  CHECK(std::count(a.begin(), a.end(), '\n') == 7);
  CHECK(a.find("n,risk,stderr,reps,estimator_id\n40,") != std::string::npos);
  CHECK(a.find("\nslope,") != std::string::npos);
  CHECK(a.find("\nslope_stderr,") != std::string::npos);

  // The embedded config reproduces the report.
  const std::string prefix = "# config: ";
  REQUIRE(a.rfind(prefix, 0) == 0);
  const std::string embedded = a.substr(prefix.size(), a.find('\n') - prefix.size());
  const fs::path cfg2 = write_file("exp_resolved.json", embedded);
  const Run again = invoke({"risk", "--config", cfg2.string(), "--out", "-", "--threads", "3"});
  CHECK(again.code == 0);
  CHECK(again.out == a);
}
