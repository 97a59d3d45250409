#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "qomor/qomor.hpp"

using namespace qomor;
using nlohmann::json;

namespace {

constexpr int exit_validation = 2;
constexpr int exit_numerical = 3;
constexpr int exit_io = 4;

const char* gap_caveat =
    "warning: sigma_r and sigma_{r+1} coincide within tolerance; the stability guarantee for the "
    "reduced model needs a strict gap, so stability was checked numerically instead";

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::string sigma_csv(const Vector<double>& s) {
  std::string text = "index,sigma\n";
  for (Index k = 0; k < s.size(); ++k) text += std::to_string(k + 1) + "," + format_double(s(k)) + "\n";
  return text;
}

json nullable(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

struct GenerateArgs {
  std::string model;
  long n = 0;
  long m = 1;
  std::uint64_t seed = 0;
  std::string out;
};

int run_generate(const GenerateArgs& a) {
  if (a.n < 1) throw ValidationError("--n must be positive");
  LdqoSystem<double> sys;
  if (a.model == "heat1d") {
    HeatOptions o;
    o.input_nodes.clear();
    for (long j = 0; j < a.m; ++j) o.input_nodes.push_back(j * (a.n - 1) / std::max(1L, a.m - 1));
    sys = gen_heat1d(a.n, o);
  } else if (a.model == "msd") {
    if (a.n % 2 != 0) throw ValidationError("--n for msd is the state dimension and must be even");
    if (a.m != 1) throw ValidationError("msd chains have a single input");
    MsdOptions o;
    o.seed = a.seed;
    sys = gen_msd_chain(a.n / 2, o);
  } else if (a.model == "random") {
    sys = gen_random_stable(a.n, a.m, a.seed);
  } else {
    throw ValidationError("unknown model '" + a.model + "'");
  }
  write_system(sys, a.out, a.model);
  std::cout << "wrote " << a.model << " system n=" << sys.n() << " m=" << sys.m() << " to " << a.out << "\n";
  return 0;
}

struct ReduceArgs {
  std::string input;
  std::string method;
  std::optional<long> order;
  std::optional<double> threshold;
  std::optional<double> eps;
  std::string scheme = "truncated";
  std::string out;
};

int run_reduce(const ReduceArgs& a) {
  const LdqoSystem<double> sys = read_system(a.input);
  const Method method = parse_method(a.method);
  if (a.order.has_value() == a.threshold.has_value()) {
    throw ValidationError("give exactly one of --order and --threshold");
  }
  if (a.eps && method != Method::qbtbt) throw ValidationError("--eps applies to qbtbt only");
  ReductionOutcome<double> out;
  Vector<double> sigma;
  auto order_for = [&](const Vector<double>& s) {
    return a.order ? static_cast<Index>(*a.order) : order_for_threshold(s, *a.threshold);
  };
  if (method == Method::spbt) {
    const SpbtPlan<double> plan = make_spbt_plan(sys);
    out = plan.reduce(order_for(plan.basis.sigma()));
  } else if (method == Method::ltbt) {
    const LtbtPlan<double> plan = make_ltbt_plan(sys);
    out = plan.reduce(order_for(plan.basis.sigma()));
  } else {
    QbGramianOptions o;
    if (a.eps) o.eps = *a.eps;
    if (a.scheme == "fixed_point") {
      o.scheme = QbGramianScheme::fixed_point;
    } else if (a.scheme != "truncated") {
      throw ValidationError("--scheme must be truncated or fixed_point");
    }
    const QbtbtPlan<double> plan = make_qbtbt_plan(sys, o);
    out = plan.reduce(order_for(plan.basis.sigma()));
  }
  if (out.reduced_qb) {
    write_qb_system(*out.reduced_qb, a.out, "reduced_" + a.method);
  } else {
    write_system(*out.reduced, a.out, "reduced_" + a.method);
  }
  std::cout << "method " << a.method << " order " << out.order << " stable "
            << (out.stability_ok ? "yes" : "no") << "\n";
  if (out.qb) {
    std::cout << "qb gramians: scheme " << out.qb->scheme << ", eps " << format_double(out.qb->regularization_eps)
              << ", iterations " << out.qb->iterations << "\n";
  }
  if (out.gap_warning) std::cerr << gap_caveat << "\n";
  return 0;
}

int run_hsv(const std::string& input, const std::string& method_name, const std::string& path) {
  const LdqoSystem<double> sys = read_system(input);
  const Method method = parse_method(method_name);
  Vector<double> sigma;
  if (method == Method::spbt) {
    sigma = make_spbt_plan(sys).basis.sigma();
  } else if (method == Method::ltbt) {
    sigma = make_ltbt_plan(sys).basis.sigma();
  } else {
    throw ValidationError("hsv supports spbt and ltbt");
  }
  write_text(path, sigma_csv(sigma));
  std::cout << "wrote " << sigma.size() << " singular values to " << path << "\n";
  return 0;
}

int run_bounds(const std::string& input, long order, const std::string& signal_text, double t_final,
               double dt) {
  const LdqoSystem<double> sys = read_system(input);
  const SignalSpec signal = parse_signal(signal_text);
  if (!signal.is_l2) throw ValidationError("bounds need a square-integrable signal");
  const SpbtPlan<double> plan = make_spbt_plan(sys);
  const ReductionOutcome<double> red = plan.reduce(order);
  SimulationOptions sim;
  sim.t_final = t_final;
  sim.dt = dt;
  const ErrorBoundReport<double> rep = linf_output_bound(sys, *red.reduced, signal, sim);
  json j;
  j["order"] = order;
  j["signal"] = signal.label();
  j["h2_norm_full"] = h2_norm(sys);
  j["h2_error"] = rep.h2_error;
  j["u_tensor_l2"] = rep.u_tensor_l2;
  j["linf_bound"] = rep.linf_bound;
  j["observed_linf"] = nullable(rep.observed_linf);
  j["bound_holds"] = rep.bound_holds ? json(*rep.bound_holds) : json(nullptr);
  const Vector<double>& s = plan.basis.sigma();
  const Index k = (s.array() > 1e-10 * s(0)).count();
  try {
    const BalancedRealization<double> bal =
        balanced_realization(sys, {}, k < sys.n() ? std::optional<Index>(k) : std::nullopt);
    if (order <= bal.system.n()) {
      const HsvErrorTerms<double> t = hsv_error_terms(bal, order);
      j["hsv_identity"] = t.identity;
      j["corollary_bound"] = t.bound;
      j["d_negative_semidefinite"] = t.d_negative_semidefinite;
    }
  } catch (const NumericalError& e) {
    j["hsv_error"] = e.what();
  }
  j["stability_ok"] = red.stability_ok;
  j["gap_warning"] = red.gap_warning;
  std::cout << j.dump(2) << "\n";
  if (red.gap_warning) std::cerr << gap_caveat << "\n";
  return 0;
}

int run_simulate(const std::string& input, const std::string& signal_text, double t_final, double dt,
                 const std::string& path) {
  const LdqoSystem<double> sys = read_system(input);
  SimulationOptions sim;
  sim.t_final = t_final;
  sim.dt = dt;
  const Trajectory<double> traj = simulate_ldqo(sys, parse_signal(signal_text), sim);
  std::string text = "t,y\n";
  for (Index k = 0; k < traj.samples(); ++k) {
    text += format_double(traj.times(k)) + "," + format_double(traj.outputs(0, k)) + "\n";
  }
  write_text(path, text);
  std::cout << "wrote " << traj.samples() << " samples to " << path << "\n";
  return 0;
}

int run_compare(const std::string& config_path, const std::optional<std::string>& out_dir) {
  ExperimentConfig config = load_experiment_config(config_path);
  if (out_dir) config.output_dir = *out_dir;
  const ExperimentResult r = run_experiment(config);
  std::cout << "cells " << r.cells << ", failed " << r.failed_cells << ", summary " << r.summary_path.string()
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Balanced truncation for linear systems with quadratic output"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Write a benchmark system manifest");
  generate->add_option("--model", gen.model, "heat1d, msd or random")->required()
      ->check(CLI::IsMember({"heat1d", "msd", "random"}));
  generate->add_option("--n", gen.n, "State dimension")->required();
  generate->add_option("--m", gen.m, "Input count");
  generate->add_option("--seed", gen.seed, "Generator seed");
  generate->add_option("--out", gen.out, "Output manifest")->required();

  ReduceArgs red;
  auto* reduce = app.add_subcommand("reduce", "Reduce a system");
  reduce->add_option("--input", red.input)->required();
  reduce->add_option("--method", red.method, "spbt, ltbt or qbtbt")->required();
  reduce->add_option("--order", red.order, "Reduced order r");
  reduce->add_option("--threshold", red.threshold, "Keep sigma_k >= threshold * sigma_1");
  reduce->add_option("--eps", red.eps, "Regularization shift for qbtbt");
  reduce->add_option("--scheme", red.scheme, "qbtbt Gramian scheme: truncated or fixed_point");
  reduce->add_option("--out", red.out)->required();

  std::string hsv_input, hsv_method, hsv_out;
  auto* hsv = app.add_subcommand("hsv", "Write the singular values of a method");
  hsv->add_option("--input", hsv_input)->required();
  hsv->add_option("--method", hsv_method)->required();
  hsv->add_option("--out", hsv_out)->required();

  std::string b_input, b_signal;
  long b_order = 0;
  double b_tf = 40, b_dt = 1e-3;
  auto* bounds = app.add_subcommand("bounds", "Error bounds for an SPBT reduction");
  bounds->add_option("--input", b_input)->required();
  bounds->add_option("--order", b_order)->required();
  bounds->add_option("--signal", b_signal)->required();
  bounds->add_option("--t-final", b_tf);
  bounds->add_option("--dt", b_dt);

  std::string s_input, s_signal, s_out;
  double s_tf = 40, s_dt = 1e-3;
  auto* simulate = app.add_subcommand("simulate", "Simulate the output under a signal");
  simulate->add_option("--input", s_input)->required();
  simulate->add_option("--signal", s_signal)->required();
  simulate->add_option("--t-final", s_tf);
  simulate->add_option("--dt", s_dt);
  simulate->add_option("--out", s_out)->required();

  std::string c_config;
  std::optional<std::string> c_out;
  auto* compare = app.add_subcommand("compare", "Run an experiment config");
  compare->add_option("--config", c_config)->required();
  compare->add_option("--out-dir", c_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_validation;
  }

  try {
    if (*generate) return run_generate(gen);
    if (*reduce) return run_reduce(red);
    if (*hsv) return run_hsv(hsv_input, hsv_method, hsv_out);
    if (*bounds) return run_bounds(b_input, b_order, b_signal, b_tf, b_dt);
    if (*simulate) return run_simulate(s_input, s_signal, s_tf, s_dt, s_out);
    if (*compare) return run_compare(c_config, c_out);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_validation;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return exit_numerical;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return exit_io;
  }
  return 0;
}
