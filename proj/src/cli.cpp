#include "rotkde/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "rotkde/config.hpp"
#include "rotkde/error.hpp"
#include "rotkde/quadrature.hpp"

namespace rotkde::cli {

using nlohmann::json;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

/// Bad flags or values detected after parsing; exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::optional<std::uint64_t> env_u64(const char *name) {
  const char *v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  char *end = nullptr;
  const unsigned long long parsed = std::strtoull(v, &end, 10);
  if (*end != '\0') throw UsageError(fmt::format("{} must be a nonnegative integer", name));
  return parsed;
}

unsigned resolve_threads(int flag) {
  if (flag > 0) return static_cast<unsigned>(flag);
  if (auto env = env_u64("ROTKDE_THREADS"); env && *env > 0) return static_cast<unsigned>(*env);
  return std::max(1u, std::thread::hardware_concurrency());
}

Point parse_point(const std::string &text) {
  std::stringstream ss(text);
  std::string a, b, extra;
  if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || std::getline(ss, extra, ','))
    throw UsageError("--x expects 'a,b', got '" + text + "'");
  try {
    std::size_t ia = 0, ib = 0;
    const double x1 = std::stod(a, &ia), x2 = std::stod(b, &ib);
    if (ia != a.size() || ib != b.size()) throw std::invalid_argument(text);
    return {x1, x2};
  } catch (const std::exception &) {
    throw UsageError("--x expects 'a,b', got '" + text + "'");
  }
}

void check_open_unit(double delta) {
  if (!(delta > 0 && delta < 1))
    throw UsageError(fmt::format("--delta must lie in (0, 1), got {}", delta));
}

json error_object(const std::string &kind, const std::string &message,
                  const std::string &where = {}) {
  json e{{"error", kind}, {"message", message}};
  if (!where.empty()) e["where"] = where;
  return e;
}

std::ofstream open_output(const std::string &path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot write '" + path + "'");
  return f;
}

// ---- kernel --------------------------------------------------------------

int cmd_kernel(int order, bool check, std::ostream &out) {
  const Kernel k(order);
  out << "power,coefficient\n";
  for (int i = 0; i <= k.degree(); i += 2) out << i << ',' << format_number(k.coeffs()[i]) << '\n';
  out << "\nnorm,value\n";
  out << "sup," << format_number(k.sup_norm()) << '\n';
  out << "l1," << format_number(k.l1_norm()) << '\n';
  out << "l2_sq," << format_number(k.l2_norm_sq()) << '\n';
  if (!check) return kOk;
  constexpr double tol = 1e-8;
  bool all = true;
  out << "\nj,moment,tolerance,pass\n";
  for (int j = 0; j <= 2 * order; ++j) {
    const double moment =
        quad::integrate<double>([&](double u) { return std::pow(u, j) * k(u); }, -1.0, 1.0, 1e-12)
            .value;
    const bool pass = std::abs(moment - (j == 0 ? 1.0 : 0.0)) <= tol;
    all = all && pass;
    out << j << ',' << format_number(moment) << ',' << format_number(tol) << ','
        << (pass ? "pass" : "fail") << '\n';
  }
  return all ? kOk : kFailure;
}

// ---- net -----------------------------------------------------------------

int cmd_net(double delta, std::ostream &out) {
  check_open_unit(delta);
  const RotationNet net = RotationNet::uniform(delta);
  out << "index,theta,q1,q2\n";
  for (std::size_t i = 0; i < net.size(); ++i)
    out << i << ',' << format_number(net[i].theta() / kDeg) << ',' << format_number(net[i].q1())
        << ',' << format_number(net[i].q2()) << '\n';
  out << "# cardinality=" << net.size() << " capacity=" << format_number(net.capacity()) << '\n';
  return kOk;
}

// ---- model ---------------------------------------------------------------

json read_json_file(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error &e) {
    throw SchemaError("(root)", std::string("malformed JSON: ") + e.what());
  }
}

int cmd_model(const std::string &path, bool check, std::ostream &out) {
  json j = read_json_file(path);
  // An experiment config carries the model under "model" (possibly defaulted).
  const bool nested =
      j.is_object() && (j.contains("model") || j.contains("estimator") || j.contains("n_grid"));
  const json resolved =
      resolve_model_json(nested ? j.value("model", json::object()) : j, nested ? "model" : "");
  if (!check) {
    const Model m = model_from_json(resolved);
    out << "key,value\n";
    out << "config," << resolved.dump() << '\n';
    out << "density_at_origin," << format_number(m.density(Point::Zero())) << '\n';
    return kOk;
  }
  const double beta = resolved.at("beta").get<double>(), L = resolved.at("L").get<double>();
  out << "marginal,kind,sigma,eps,beta,L,pass,worst_ratio,violation,y,z\n";
  bool all = true;
  for (const char *key : {"marginal1", "marginal2"}) {
    const json &mj = resolved.at(key);
    const Marginal m = mj.at("kind") == "gaussian"
                           ? Marginal::gaussian(mj.at("sigma").get<double>())
                           : make_perturbed_marginal(beta, L, mj.at("eps").get<double>());
    const Certification c = holder_certify(m, beta, L);
    all = all && c.pass;
    out << key << ',' << mj.at("kind").get<std::string>() << ',' << format_number(m.sigma())
        << ',' << format_number(m.eps()) << ',' << format_number(beta) << ','
        << format_number(L) << ',' << (c.pass ? "pass" : "fail") << ','
        << format_number(c.worst_ratio) << ',' << '"' << c.violation << '"' << ','
        << format_number(c.y) << ',' << format_number(c.z) << '\n';
  }
  if (!all) throw NumericError("Hölder certification failed", path);
  return kOk;
}

// ---- estimate ------------------------------------------------------------

struct EstimateArgs {
  std::string input, x, mode = "pruned";
  double h{0}, theta_d{0};
  std::optional<double> theta_q;
  int order{1};
};

int cmd_estimate(const EstimateArgs &a, std::ostream &out) {
  const Points pts = read_points_csv(a.input);
  const Point x = parse_point(a.x);
  if (!(a.h > 0)) throw UsageError("--h must be positive");
  const Kernel k(a.order);
  const Rotation d = Rotation::from_angle(a.theta_d * kDeg);
  double value;
  if (a.theta_q) {
    const UStatMode mode = a.mode == "naive" ? UStatMode::naive : UStatMode::pruned;
    value = combined_estimate(pts, x, a.h, d, Rotation::from_angle(*a.theta_q * kDeg), k, mode);
  } else {
    value = product_estimate(pts, x, a.h, d, k);
  }
  out << format_number(value) << '\n';
  return kOk;
}

// ---- select --------------------------------------------------------------

struct SelectArgs {
  std::string input, x, rule = "adaptive", diagnostics;
  double delta{0.5}, beta{2}, L{1}, p{2};
  double a_mult{1}, b_mult{1};
  std::optional<double> a_value, b_value;
  bool no_split{false};
  std::optional<int> order;
  int threads{0};
};

int cmd_select(const SelectArgs &a, std::ostream &out) {
  check_open_unit(a.delta);
  const Points pts = read_points_csv(a.input);
  const Point x = parse_point(a.x);
  const RotationNet net = RotationNet::uniform(a.delta);
  const unsigned threads = resolve_threads(a.threads);
  std::optional<std::ofstream> diag;
  if (!a.diagnostics.empty()) diag = open_output(a.diagnostics);
  out << "rule,theta_q,h,estimate,u_hat,penalty_constant\n";
  if (a.rule == "adaptive") {
    const Kernel k(a.order.value_or(1));
    AdaptiveOptions o;
    o.a_mult = a.a_mult;
    o.a_value = a.a_value;
    o.p = a.p;
    o.threads = threads;
    const SelectionResult r = adaptive_select(pts, x, net, k, o);
    out << "adaptive," << format_number(r.q_hat.theta() / kDeg) << ',' << format_number(r.h_hat)
        << ',' << format_number(r.estimate) << ',' << format_number(r.u_hat) << ','
        << format_number(r.a_value) << '\n';
    if (diag) write_adaptive_diagnostics(*diag, r, net);
  } else {
    const Kernel k(a.order.value_or(default_kernel_order(a.beta)));
    MinimaxOptions o;
    o.beta = a.beta;
    o.L = a.L;
    o.b_mult = a.b_mult;
    o.b_value = a.b_value;
    o.p = a.p;
    o.no_split = a.no_split;
    o.stage0.a_mult = a.a_mult;
    o.stage0.a_value = a.a_value;
    o.stage0.threads = threads;
    const MinimaxResult r = minimax_select(pts, x, net, k, o);
    const MinimaxStage &last = r.stages.back();
    out << "minimax," << format_number(last.q_hat.theta() / kDeg) << ','
        << format_number(last.h) << ',' << format_number(r.estimate) << ','
        << format_number(r.stage0.u_hat) << ',' << format_number(r.b_value) << '\n';
    if (diag) write_minimax_diagnostics(*diag, r, net);
  }
  return kOk;
}

// ---- risk ----------------------------------------------------------------

int cmd_risk(const std::string &config, const std::string &out_path, const std::string &plot,
             int threads_flag, std::ostream &out) {
  const std::uint64_t seed = env_u64("ROTKDE_SEED").value_or(kDefaultSeed);
  const Experiment e = load_experiment(config, seed);
  const RiskReport report = rate_study(e.model, e.estimator, e.x, e.n_grid, e.p, e.reps, e.seed,
                                       resolve_threads(threads_flag));
  if (out_path.empty() || out_path == "-") {
    write_report_csv(out, report, e.resolved);
  } else {
    auto f = open_output(out_path);
    write_report_csv(f, report, e.resolved);
  }
  if (!plot.empty()) {
    auto f = open_output(plot);
    write_report_svg(f, report);
  }
  return kOk;
}

void write_diag_row(std::ostream &out, const std::string &rule, int stage, double theta_q,
                    double h, double r, double criterion, bool chosen) {
  out << rule << ',' << stage << ',' << format_number(theta_q / kDeg) << ',' << format_number(h)
      << ',' << format_number(r) << ',' << format_number(criterion) << ',' << (chosen ? 1 : 0)
      << '\n';
}

void write_adaptive_rows(std::ostream &out, const SelectionResult &r, const RotationNet &net,
                         const std::string &rule, int stage) {
  for (std::size_t q = 0; q < net.size(); ++q)
    for (std::size_t j = 0; j < r.bandwidths.size(); ++j)
      write_diag_row(out, rule, stage, net[q].theta(), r.bandwidths[j],
                     r.r_surface(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(j)),
                     r.criterion(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(j)),
                     q == r.q_index && j == r.h_index);
}

constexpr const char *kDiagHeader = "rule,stage,theta_q,h,r_value,criterion,chosen\n";

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{}", v);
}

Points read_points_csv(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path + "'");
  std::vector<double> values;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::stringstream ss(line);
    std::string a, b, extra;
    std::getline(ss, a, ',');
    std::getline(ss, b, ',');
    const bool extra_col = static_cast<bool>(std::getline(ss, extra, ','));
    char *ea = nullptr, *eb = nullptr;
    const double x1 = std::strtod(a.c_str(), &ea), x2 = std::strtod(b.c_str(), &eb);
    const bool ok = !a.empty() && !b.empty() && *ea == '\0' && *eb == '\0' && !extra_col &&
                    std::isfinite(x1) && std::isfinite(x2);
    if (!ok) {
      if (values.empty() && line_no == 1) continue;  // header
      throw SchemaError(fmt::format("{}:{}", path, line_no), "expected two finite numbers");
    }
    values.push_back(x1);
    values.push_back(x2);
  }
  if (values.empty()) throw SchemaError(path, "no points");
  Points pts(static_cast<Eigen::Index>(values.size() / 2), 2);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    pts(i, 0) = values[2 * i];
    pts(i, 1) = values[2 * i + 1];
  }
  return pts;
}

void write_report_csv(std::ostream &out, const RiskReport &report, const json &config) {
  out << "# config: " << config.dump() << '\n';
  out << "n,risk,stderr,reps,estimator_id\n";
  for (const RiskPoint &r : report.risks)
    out << r.n << ',' << format_number(r.risk) << ',' << format_number(r.stderr_) << ','
        << r.reps << ',' << report.estimator_id << '\n';
  out << "slope," << format_number(report.slope) << '\n';
  out << "slope_stderr," << format_number(report.slope_stderr) << '\n';
}

void write_report_svg(std::ostream &out, const RiskReport &report) {
  constexpr double W = 640, H = 420, ML = 70, MR = 20, MT = 30, MB = 50;
  std::vector<double> lx, ly;
  for (const RiskPoint &r : report.risks) {
    if (!(r.risk > 0)) continue;
    lx.push_back(std::log10(static_cast<double>(r.n)));
    ly.push_back(std::log10(r.risk));
  }
  out << fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n",
      W, H);
  out << fmt::format("<text x=\"{}\" y=\"18\">{} (slope {})</text>\n", ML, report.estimator_id,
                     format_number(report.slope));
  if (lx.size() >= 2) {
    const auto [x0, x1] = std::minmax_element(lx.begin(), lx.end());
    const auto [y0, y1] = std::minmax_element(ly.begin(), ly.end());
    const double xa = *x0, xb = *x1 > *x0 ? *x1 : *x0 + 1;
    const double ya = *y0 - 0.1, yb = (*y1 > *y0 ? *y1 : *y0) + 0.1;
    auto px = [&](double v) { return ML + (v - xa) / (xb - xa) * (W - ML - MR); };
    auto py = [&](double v) { return H - MB - (v - ya) / (yb - ya) * (H - MT - MB); };
    out << fmt::format(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        ML, MT, W - ML - MR, H - MT - MB);
    std::string poly;
    for (std::size_t i = 0; i < lx.size(); ++i)
      poly += fmt::format("{:.2f},{:.2f} ", px(lx[i]), py(ly[i]));
    out << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"" << poly
        << "\"/>\n";
    for (std::size_t i = 0; i < lx.size(); ++i)
      out << fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"steelblue\"/>\n",
                         px(lx[i]), py(ly[i]));
    out << fmt::format("<text x=\"{}\" y=\"{}\">log10 n</text>\n", W / 2, H - 12);
    out << fmt::format(
        "<text x=\"14\" y=\"{}\" transform=\"rotate(-90 14 {})\">log10 risk</text>\n", H / 2,
        H / 2);
    out << fmt::format("<text x=\"{}\" y=\"{}\">{:.2f}</text>\n", ML, H - MB + 16, xa);
    out << fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.2f}</text>\n", W - MR,
                       H - MB + 16, xb);
  }
  out << "</svg>\n";
}

void write_adaptive_diagnostics(std::ostream &out, const SelectionResult &r, const RotationNet &net,
                                const std::string &rule, int stage) {
  out << kDiagHeader;
  write_adaptive_rows(out, r, net, rule, stage);
}

void write_minimax_diagnostics(std::ostream &out, const MinimaxResult &r, const RotationNet &net) {
  out << kDiagHeader;
  write_adaptive_rows(out, r.stage0, net, "minimax", 0);
  for (const MinimaxStage &s : r.stages)
    for (std::size_t q = 0; q < net.size(); ++q) {
      const double rv = s.r_values(static_cast<Eigen::Index>(q));
      write_diag_row(out, "minimax", s.index, net[q].theta(), s.h, rv, rv, q == s.q_index);
    }
}

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Rotation-adaptive bivariate kernel density estimation", "rotkde"};
  app.require_subcommand(1);
  app.set_help_flag("--help", "Print this help message and exit");
  app.set_help_all_flag("--help-all");
  int threads = 0;

  auto *kernel = app.add_subcommand("kernel", "Kernel coefficients, norms and moment checks");
  int order = 1;
  bool check = false;
  kernel->add_option("--order", order, "order_floor (moments up to 2*order vanish)")
      ->required()
      ->check(CLI::NonNegativeNumber);
  kernel->add_flag("--check", check, "Print the moment-verification table");

  auto *net = app.add_subcommand("net", "Uniform delta-net of rotations");
  double delta = 0.5;
  net->add_option("--delta", delta, "Separation in (0, 1)")->required();

  auto *model = app.add_subcommand("model", "Model construction and Hölder certification");
  std::string model_config;
  bool model_check = false;
  model->add_option("--config", model_config, "Model or experiment JSON")->required();
  model->add_flag("--check", model_check, "Print certification results");

  auto *estimate = app.add_subcommand("estimate", "Product or auxiliary estimate at a point");
  EstimateArgs ea;
  estimate->add_option("--input", ea.input, "Two-column points CSV")->required();
  estimate->add_option("--x", ea.x, "Query point a,b")->required();
  estimate->add_option("--h", ea.h, "Bandwidth")->required();
  estimate->add_option("--theta-d", ea.theta_d, "Angle of D in degrees")->required();
  estimate->add_option("--theta-q", ea.theta_q, "Angle of Q in degrees (auxiliary estimator)");
  estimate->add_option("--mode", ea.mode, "U-statistic evaluation")
      ->check(CLI::IsMember({"naive", "pruned"}));
  estimate->add_option("--order", ea.order, "Kernel order_floor")->check(CLI::NonNegativeNumber);

  auto *select = app.add_subcommand("select", "Adaptive or minimax selection at a point");
  SelectArgs sa;
  select->add_option("--input", sa.input, "Two-column points CSV")->required();
  select->add_option("--x", sa.x, "Query point a,b")->required();
  select->add_option("--rule", sa.rule, "Selection rule")
      ->check(CLI::IsMember({"adaptive", "minimax"}));
  select->add_option("--delta", sa.delta, "Net separation in (0, 1)")->required();
  select->add_option("--beta", sa.beta, "Smoothness (minimax)")->check(CLI::PositiveNumber);
  select->add_option("--L", sa.L, "Hölder constant (minimax)")->check(CLI::PositiveNumber);
  select->add_option("--p", sa.p, "Risk order")->check(CLI::Range(1.0, 1e9));
  auto *am = select->add_option("--a-mult", sa.a_mult, "Multiplier on A")->check(CLI::PositiveNumber);
  select->add_option("--a-value", sa.a_value, "Fixed penalty constant replacing a_mult * A")
      ->check(CLI::PositiveNumber)
      ->excludes(am);
  auto *bm = select->add_option("--b-mult", sa.b_mult, "Multiplier on B")->check(CLI::PositiveNumber);
  select->add_option("--b-value", sa.b_value, "Fixed constant replacing b_mult * B")
      ->check(CLI::PositiveNumber)
      ->excludes(bm);
  select->add_flag("--no-split", sa.no_split, "Stage 1 uses the full sample");
  select->add_option("--order", sa.order, "Kernel order_floor")->check(CLI::NonNegativeNumber);
  select->add_option("--diagnostics", sa.diagnostics, "Diagnostics CSV path");
  select->add_option("--threads", sa.threads, "Worker cap")->check(CLI::PositiveNumber);

  auto *risk = app.add_subcommand("risk", "Monte Carlo rate study from an experiment config");
  std::string config, out_path, plot;
  risk->add_option("--config", config, "Experiment JSON")->required();
  risk->add_option("--out", out_path, "Report CSV path ('-' for standard output)")->required();
  risk->add_option("--plot", plot, "Optional SVG plot path");
  risk->add_option("--threads", threads, "Worker cap")->check(CLI::PositiveNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp &) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError &e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App *sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return kUsage;
  }

  try {
    if (*kernel) return cmd_kernel(order, check, out);
    if (*net) return cmd_net(delta, out);
    if (*model) return cmd_model(model_config, model_check, out);
    if (*estimate) return cmd_estimate(ea, out);
    if (*select) return cmd_select(sa, out);
    if (*risk) return cmd_risk(config, out_path, plot, threads, out);
  } catch (const UsageError &e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const SchemaError &e) {
    json j = error_object("schema", e.what());
    j["path"] = e.path();
    err << j.dump() << '\n';
    return kFailure;
  } catch (const NumericError &e) {
    err << error_object("numeric", e.what(), e.where()).dump() << '\n';
    return kFailure;
  } catch (const std::exception &e) {
    err << error_object("validation", e.what()).dump() << '\n';
    return kFailure;
  }
  return kUsage;
}

int run(int argc, char **argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace rotkde::cli
