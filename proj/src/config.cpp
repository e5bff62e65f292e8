#include "rotkde/config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "rotkde/error.hpp"

namespace rotkde {

using nlohmann::json;

namespace {

std::string join(const std::string &path, const std::string &key) {
  return path.empty() ? key : path + "." + key;
}

void require_object(const json &j, const std::string &path) {
  if (!j.is_object()) throw SchemaError(path.empty() ? "(root)" : path, "expected an object");
}

void reject_unknown(const json &j, const std::string &path,
                    std::initializer_list<const char *> known) {
  for (const auto &[key, value] : j.items()) {
    bool ok = false;
    for (const char *k : known) ok = ok || key == k;
    if (!ok) throw SchemaError(join(path, key), "unknown key");
  }
}

double number(const json &j, const std::string &key, const std::string &path, double fallback) {
  if (!j.contains(key)) return fallback;
  const json &v = j.at(key);
  if (!v.is_number()) throw SchemaError(join(path, key), "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw SchemaError(join(path, key), "expected a finite number");
  return d;
}

double positive(const json &j, const std::string &key, const std::string &path, double fallback) {
  const double d = number(j, key, path, fallback);
  if (!(d > 0)) throw SchemaError(join(path, key), "must be > 0");
  return d;
}

long integer(const json &j, const std::string &key, const std::string &path, long fallback) {
  if (!j.contains(key)) return fallback;
  const json &v = j.at(key);
  if (!v.is_number_integer()) throw SchemaError(join(path, key), "expected an integer");
  return v.get<long>();
}

json resolve_marginal(const json &j, const std::string &path) {
  require_object(j, path);
  const std::string kind = j.value("kind", std::string("perturbed"));
  json out;
  out["kind"] = kind;
  if (kind == "gaussian") {
    reject_unknown(j, path, {"kind", "sigma"});
    if (!j.contains("sigma")) throw SchemaError(join(path, "sigma"), "required for a gaussian marginal");
    out["sigma"] = positive(j, "sigma", path, 1.0);
  } else if (kind == "perturbed") {
    reject_unknown(j, path, {"kind", "eps"});
    const double eps = number(j, "eps", path, 0.5);
    if (!(eps > 0 && eps < 1)) throw SchemaError(join(path, "eps"), "must lie in (0, 1)");
    out["eps"] = eps;
  } else {
    throw SchemaError(join(path, "kind"), "expected \"gaussian\" or \"perturbed\"");
  }
  return out;
}

Marginal build_marginal(const json &j, double beta, double L) {
  if (j.at("kind") == "gaussian") return Marginal::gaussian(j.at("sigma").get<double>());
  return make_perturbed_marginal(beta, L, j.at("eps").get<double>());
}

}  // namespace

json resolve_model_json(const json &j, const std::string &path) {
  require_object(j, path);
  reject_unknown(j, path, {"marginal1", "marginal2", "theta", "beta", "L", "id"});
  json out;
  out["beta"] = positive(j, "beta", path, 2.0);
  out["L"] = positive(j, "L", path, 1.0);
  out["theta"] = number(j, "theta", path, 30.0);
  for (const char *key : {"marginal1", "marginal2"})
    out[key] = resolve_marginal(j.value(key, json::object()), join(path, key));
  if (j.contains("id") && !j.at("id").is_string())
    throw SchemaError(join(path, "id"), "expected a string");
  out["id"] = j.value("id", std::string("model"));
  return out;
}

Model model_from_json(const json &r) {
  const double beta = r.at("beta").get<double>(), L = r.at("L").get<double>();
  const double theta = r.at("theta").get<double>() * std::numbers::pi / 180.0;
  return Model(build_marginal(r.at("marginal1"), beta, L), build_marginal(r.at("marginal2"), beta, L),
               Rotation::from_angle(theta), beta, L, r.at("id").get<std::string>());
}

namespace {

json resolve_estimator(const json &j, const std::string &path) {
  require_object(j, path);
  reject_unknown(j, path, {"kind", "params"});
  if (!j.contains("kind") || !j.at("kind").is_string())
    throw SchemaError(join(path, "kind"), "expected oracle|isotropic|adaptive|minimax|exact");
  const std::string kind = j.at("kind").get<std::string>();
  try {
    EstimatorSpec::parse_kind(kind);
  } catch (const std::invalid_argument &) {
    throw SchemaError(join(path, "kind"), "expected oracle|isotropic|adaptive|minimax|exact");
  }
  const json params = j.value("params", json::object());
  const std::string pp = join(path, "params");
  require_object(params, pp);
  reject_unknown(params, pp,
                 {"order", "mu", "bandwidth", "delta", "net_theta", "a_mult", "a_value", "b_mult",
                  "b_value", "no_split"});
  json out;
  out["kind"] = kind;
  json rp = json::object();
  if (params.contains("order")) {
    const long order = integer(params, "order", pp, 1);
    if (order < 0) throw SchemaError(join(pp, "order"), "must be >= 0");
    rp["order"] = order;
  }
  if (params.contains("mu")) {
    const double mu = number(params, "mu", pp, 1.0);
    if (!(mu >= 1)) throw SchemaError(join(pp, "mu"), "must be >= 1");
    rp["mu"] = mu;
  }
  if (params.contains("bandwidth")) rp["bandwidth"] = positive(params, "bandwidth", pp, 1.0);
  if (kind == "adaptive" || kind == "minimax") {
    const double delta = number(params, "delta", pp, 0.5);
    if (!(delta > 0 && delta < 1)) throw SchemaError(join(pp, "delta"), "must lie in (0, 1)");
    rp["delta"] = delta;
    if (params.contains("net_theta")) {
      const json &nt = params.at("net_theta");
      if (!nt.is_array() || nt.empty())
        throw SchemaError(join(pp, "net_theta"), "expected a nonempty array of degrees");
      for (const auto &v : nt)
        if (!v.is_number()) throw SchemaError(join(pp, "net_theta"), "expected numbers");
      rp["net_theta"] = nt;
    }
    rp["a_mult"] = positive(params, "a_mult", pp, 1.0);
    if (params.contains("a_value")) rp["a_value"] = positive(params, "a_value", pp, 1.0);
  }
  if (kind == "minimax") {
    rp["b_mult"] = positive(params, "b_mult", pp, 1.0);
    if (params.contains("b_value")) rp["b_value"] = positive(params, "b_value", pp, 1.0);
    if (params.contains("no_split") && !params.at("no_split").is_boolean())
      throw SchemaError(join(pp, "no_split"), "expected a boolean");
    rp["no_split"] = params.value("no_split", false);
  }
  out["params"] = rp;
  return out;
}

EstimatorSpec estimator_from_json(const json &r) {
  EstimatorSpec s;
  s.kind = EstimatorSpec::parse_kind(r.at("kind").get<std::string>());
  const json &p = r.at("params");
  if (p.contains("order")) s.order = p.at("order").get<int>();
  if (p.contains("mu")) s.mu = p.at("mu").get<double>();
  if (p.contains("bandwidth")) s.bandwidth = p.at("bandwidth").get<double>();
  if (p.contains("delta")) s.delta = p.at("delta").get<double>();
  if (p.contains("net_theta"))
    for (const auto &v : p.at("net_theta"))
      s.net_angles.push_back(v.get<double>() * std::numbers::pi / 180.0);
  if (p.contains("a_mult")) s.a_mult = p.at("a_mult").get<double>();
  if (p.contains("a_value")) s.a_value = p.at("a_value").get<double>();
  if (p.contains("b_mult")) s.b_mult = p.at("b_mult").get<double>();
  if (p.contains("b_value")) s.b_value = p.at("b_value").get<double>();
  if (p.contains("no_split")) s.no_split = p.at("no_split").get<bool>();
  return s;
}

}  // namespace

Experiment experiment_from_json(const json &j, std::uint64_t default_seed) {
  require_object(j, "");
  reject_unknown(j, "", {"model", "estimator", "x", "n_grid", "p", "reps", "seed"});
  json r;
  r["model"] = resolve_model_json(j.value("model", json::object()), "model");
  if (!j.contains("estimator")) throw SchemaError("estimator", "required");
  r["estimator"] = resolve_estimator(j.at("estimator"), "estimator");

  json x = j.value("x", json::array({0.0, 0.0}));
  if (!x.is_array() || x.size() != 2 || !x[0].is_number() || !x[1].is_number())
    throw SchemaError("x", "expected [x1, x2]");
  r["x"] = json::array({x[0].get<double>(), x[1].get<double>()});

  if (!j.contains("n_grid")) throw SchemaError("n_grid", "required");
  const json &ng = j.at("n_grid");
  if (!ng.is_array() || ng.size() < 3)
    throw SchemaError("n_grid", "expected an array of at least 3 sample sizes");
  std::vector<long> n_grid;
  for (std::size_t i = 0; i < ng.size(); ++i) {
    if (!ng[i].is_number_integer() || ng[i].get<long>() < 1)
      throw SchemaError("n_grid[" + std::to_string(i) + "]", "expected a positive integer");
    n_grid.push_back(ng[i].get<long>());
  }
  r["n_grid"] = n_grid;

  const double p = number(j, "p", "", 2.0);
  if (!(p >= 1)) throw SchemaError("p", "must be >= 1");
  r["p"] = p;
  const long reps = integer(j, "reps", "", 200);
  if (reps < 2) throw SchemaError("reps", "must be >= 2");
  r["reps"] = reps;
  if (j.contains("seed") && !j.at("seed").is_number_unsigned())
    throw SchemaError("seed", "expected a nonnegative integer");
  const std::uint64_t seed = j.value("seed", default_seed);
  r["seed"] = seed;

  Experiment e{model_from_json(r["model"]), estimator_from_json(r["estimator"]),
               Point(r["x"][0].get<double>(), r["x"][1].get<double>()),
               std::move(n_grid), p, static_cast<int>(reps), seed, r};
  return e;
}

Experiment load_experiment(const std::string &path, std::uint64_t default_seed) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error &err) {
    throw SchemaError("(root)", std::string("malformed JSON: ") + err.what());
  }
  return experiment_from_json(j, default_seed);
}

}  // namespace rotkde
