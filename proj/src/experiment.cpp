#include "qomor/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "qomor/generators.hpp"
#include "qomor/metrics.hpp"
#include "qomor/system_io.hpp"

namespace qomor {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void require_keys(const json& node, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& item : node.items()) {
    if (!allowed.count(item.key())) {
      throw ValidationError(where + ": unknown field '" + item.key() + "'");
    }
  }
}

double number_at(const json& node, const std::string& key, double fallback, const std::string& where) {
  if (!node.contains(key)) return fallback;
  if (!node[key].is_number()) throw ValidationError(where + "." + key + " must be a number");
  return node[key].get<double>();
}

long long integer_at(const json& node, const std::string& key, long long fallback, const std::string& where) {
  if (!node.contains(key)) return fallback;
  if (!node[key].is_number_integer()) throw ValidationError(where + "." + key + " must be an integer");
  return node[key].get<long long>();
}

SignalSpec signal_from_json(const json& node, std::uint64_t seed, const std::string& where) {
  if (node.is_string()) {
    std::string text = node.get<std::string>();
    if ((text.rfind("white_noise", 0) == 0) && text.find("seed=") == std::string::npos) {
      text += (text.find(':') == std::string::npos ? ":" : ",") + std::string("seed=") + std::to_string(seed);
    }
    return parse_signal(text);
  }
  if (!node.is_object() || !node.contains("kind") || !node["kind"].is_string()) {
    throw ValidationError(where + " must be a signal string or an object with a 'kind'");
  }
  const std::string kind = node["kind"].get<std::string>();
  if (kind == "exp_decay") {
    require_keys(node, {"kind", "amplitude", "rate"}, where);
    return SignalSpec::exp_decay(number_at(node, "amplitude", 1.0, where), number_at(node, "rate", 0.25, where));
  }
  if (kind == "damped_quadratic") {
    require_keys(node, {"kind", "amplitude", "rate"}, where);
    return SignalSpec::damped_quadratic(number_at(node, "amplitude", 1.0, where),
                                        number_at(node, "rate", 0.2, where));
  }
  if (kind == "sin_plus_offset") {
    require_keys(node, {"kind", "amplitude", "period", "offset"}, where);
    return SignalSpec::sin_plus_offset(number_at(node, "amplitude", 1.0, where),
                                       number_at(node, "period", 10.0, where),
                                       number_at(node, "offset", 1.0, where));
  }
  if (kind == "white_noise" || kind == "white_noise_sampled") {
    require_keys(node, {"kind", "seed", "dt", "duration", "stddev"}, where);
    const long long s = integer_at(node, "seed", static_cast<long long>(seed), where);
    if (s < 0) throw ValidationError(where + ".seed must be nonnegative");
    return SignalSpec::white_noise(static_cast<std::uint64_t>(s), number_at(node, "dt", 0.01, where),
                                   number_at(node, "duration", 40.0, where),
                                   number_at(node, "stddev", 1.0, where));
  }
  if (kind == "custom" || kind == "custom_sampled") {
    require_keys(node, {"kind", "samples", "dt", "tail_rate"}, where);
    if (!node.contains("samples") || !node["samples"].is_array()) {
      throw ValidationError(where + ".samples must be an array");
    }
    std::vector<double> samples;
    for (const auto& v : node["samples"]) {
      if (v.is_string()) {
        samples.push_back(parse_double(v.get<std::string>(), where + ".samples"));
      } else if (v.is_number()) {
        samples.push_back(v.get<double>());
      } else {
        throw ValidationError(where + ".samples entries must be numbers");
      }
    }
    return SignalSpec::custom(std::move(samples), number_at(node, "dt", 0.0, where),
                              number_at(node, "tail_rate", 0.0, where));
  }
  throw ValidationError(where + ": unknown signal kind '" + kind + "'");
}

template <typename F>
void parallel_for(std::size_t count, unsigned threads, F&& body) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) body(i);
  };
  const unsigned used = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (used <= 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < used; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

json optional_number(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

}  // namespace

unsigned experiment_threads() {
  if (const char* env = std::getenv("QOMOR_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

ExperimentConfig parse_experiment_config(const std::string& json_text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw IoError(std::string("malformed experiment JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError("experiment config must be a JSON object");
  require_keys(doc, {"system", "methods", "orders", "threshold", "signals", "integrator", "output_dir", "seed",
                     "qbtbt", "balance_floor", "timing"},
               "config");
  ExperimentConfig c;
  c.base_dir = base_dir;
  if (!doc.contains("system") || !doc["system"].is_object()) {
    throw ValidationError("config.system must be an object");
  }
  c.system_json = doc["system"].dump();
  const long long seed = integer_at(doc, "seed", 0, "config");
  if (seed < 0) throw ValidationError("config.seed must be nonnegative");
  c.seed = static_cast<std::uint64_t>(seed);

  if (!doc.contains("methods") || !doc["methods"].is_array()) {
    throw ValidationError("config.methods must be an array");
  }
  for (const auto& m : doc["methods"]) {
    if (!m.is_string()) throw ValidationError("config.methods entries must be strings");
    c.methods.push_back(parse_method(m.get<std::string>()));
  }
  if (c.methods.empty()) throw ValidationError("config.methods is empty");

  if (doc.contains("orders")) {
    if (!doc["orders"].is_array()) throw ValidationError("config.orders must be an array");
    for (const auto& r : doc["orders"]) {
      if (!r.is_number_integer() || r.get<long long>() < 1) {
        throw ValidationError("config.orders entries must be positive integers");
      }
      c.orders.push_back(static_cast<Index>(r.get<long long>()));
    }
  }
  if (doc.contains("threshold")) c.threshold = number_at(doc, "threshold", 0, "config");
  if (c.orders.empty() && !c.threshold) throw ValidationError("config needs orders or a threshold");
  if (!c.orders.empty() && c.threshold) throw ValidationError("config.orders and config.threshold are exclusive");
  if (c.threshold && !(*c.threshold > 0 && *c.threshold <= 1)) {
    throw ValidationError("config.threshold must lie in (0, 1]");
  }

  if (!doc.contains("signals") || !doc["signals"].is_array() || doc["signals"].empty()) {
    throw ValidationError("config.signals must be a nonempty array");
  }
  for (std::size_t i = 0; i < doc["signals"].size(); ++i) {
    c.signals.push_back(signal_from_json(doc["signals"][i], c.seed, "config.signals[" + std::to_string(i) + "]"));
  }
  if (doc.contains("integrator")) {
    const json& g = doc["integrator"];
    if (!g.is_object()) throw ValidationError("config.integrator must be an object");
    require_keys(g, {"dt", "t_final"}, "config.integrator");
    c.integrator.dt = number_at(g, "dt", c.integrator.dt, "config.integrator");
    c.integrator.t_final = number_at(g, "t_final", c.integrator.t_final, "config.integrator");
  }
  if (!(c.integrator.dt > 0) || !(c.integrator.t_final > 0)) {
    throw ValidationError("config.integrator: dt and t_final must be positive");
  }
  if (doc.contains("output_dir")) {
    if (!doc["output_dir"].is_string()) throw ValidationError("config.output_dir must be a string");
    c.output_dir = base_dir / doc["output_dir"].get<std::string>();
  }
  if (doc.contains("qbtbt")) {
    const json& q = doc["qbtbt"];
    if (!q.is_object()) throw ValidationError("config.qbtbt must be an object");
    require_keys(q, {"eps", "max_iter", "tol", "scheme", "max_states"}, "config.qbtbt");
    c.qbtbt.eps = number_at(q, "eps", c.qbtbt.eps, "config.qbtbt");
    c.qbtbt.max_iter = static_cast<int>(integer_at(q, "max_iter", c.qbtbt.max_iter, "config.qbtbt"));
    c.qbtbt.tol = number_at(q, "tol", c.qbtbt.tol, "config.qbtbt");
    c.qbtbt.max_states = integer_at(q, "max_states", c.qbtbt.max_states, "config.qbtbt");
    if (q.contains("scheme")) {
      const std::string s = q["scheme"].is_string() ? q["scheme"].get<std::string>() : "";
      if (s == "truncated") {
        c.qbtbt.scheme = QbGramianScheme::truncated;
      } else if (s == "fixed_point") {
        c.qbtbt.scheme = QbGramianScheme::fixed_point;
      } else {
        throw ValidationError("config.qbtbt.scheme must be \"truncated\" or \"fixed_point\"");
      }
    }
  }
  c.balance_floor = number_at(doc, "balance_floor", c.balance_floor, "config");
  if (doc.contains("timing")) {
    if (!doc["timing"].is_boolean()) throw ValidationError("config.timing must be a boolean");
    c.timing = doc["timing"].get<bool>();
  }
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  ExperimentConfig c = parse_experiment_config(ss.str(), path.parent_path());
  return c;
}

LdqoSystem<double> build_experiment_system(const ExperimentConfig& config) {
  const json node = json::parse(config.system_json);
  const std::string where = "config.system";
  if (node.contains("file")) {
    require_keys(node, {"file"}, where);
    return read_system(config.base_dir / node["file"].get<std::string>());
  }
  if (!node.contains("generator")) return parse_system(config.system_json, config.base_dir);
  const std::string gen = node["generator"].is_string() ? node["generator"].get<std::string>() : "";
  const auto seed = static_cast<std::uint64_t>(integer_at(node, "seed", static_cast<long long>(config.seed), where));
  if (gen == "heat1d") {
    require_keys(node, {"generator", "n", "diffusivity", "input_nodes", "output"}, where);
    HeatOptions o;
    o.diffusivity = number_at(node, "diffusivity", o.diffusivity, where);
    if (node.contains("input_nodes")) {
      o.input_nodes.clear();
      for (const auto& v : node["input_nodes"]) {
        if (!v.is_number_integer()) throw ValidationError(where + ".input_nodes must hold integers");
        o.input_nodes.push_back(static_cast<Index>(v.get<long long>()));
      }
    }
    if (node.contains("output")) {
      const std::string out = node["output"].is_string() ? node["output"].get<std::string>() : "";
      if (out == "average") {
        o.output = HeatOutput::average;
      } else if (out == "mean_square") {
        o.output = HeatOutput::mean_square;
      } else {
        throw ValidationError(where + ".output must be \"average\" or \"mean_square\"");
      }
    }
    return gen_heat1d(static_cast<Index>(integer_at(node, "n", 0, where)), o);
  }
  if (gen == "msd") {
    require_keys(node, {"generator", "n", "masses", "mass", "stiffness", "damping", "forcing_node",
                        "weighted_states", "weights", "seed"},
                 where);
    Index masses = static_cast<Index>(integer_at(node, "masses", 0, where));
    if (masses == 0) {
      const long long n = integer_at(node, "n", 0, where);
      if (n < 2 || n % 2 != 0) throw ValidationError(where + ".n must be a positive even number");
      masses = static_cast<Index>(n / 2);
    }
    MsdOptions o;
    o.mass = number_at(node, "mass", o.mass, where);
    o.stiffness = number_at(node, "stiffness", o.stiffness, where);
    o.damping = number_at(node, "damping", o.damping, where);
    o.forcing_node = static_cast<Index>(integer_at(node, "forcing_node", o.forcing_node, where));
    o.weighted_states = static_cast<Index>(integer_at(node, "weighted_states", o.weighted_states, where));
    if (node.contains("weights")) {
      for (const auto& v : node["weights"]) {
        if (!v.is_number()) throw ValidationError(where + ".weights must hold numbers");
        o.weights.push_back(v.get<double>());
      }
    }
    o.seed = seed;
    return gen_msd_chain(masses, o);
  }
  if (gen == "random") {
    require_keys(node, {"generator", "n", "m", "seed", "indefinite"}, where);
    RandomOptions o;
    if (node.contains("indefinite")) o.indefinite_m = node["indefinite"].get<bool>();
    return gen_random_stable(static_cast<Index>(integer_at(node, "n", 0, where)),
                             static_cast<Index>(integer_at(node, "m", 1, where)), seed, o);
  }
  throw ValidationError(where + ".generator must be heat1d, msd or random");
}

namespace {

struct MethodState {
  Method method = Method::spbt;
  std::optional<SpbtPlan<double>> spbt;
  std::optional<LtbtPlan<double>> ltbt;
  std::optional<QbtbtPlan<double>> qbtbt;
  Vector<double> sigma;
  std::vector<Index> orders;
  std::string error;
};

struct ReductionJob {
  std::size_t method_index = 0;
  Index order = 0;
  std::optional<ReductionOutcome<double>> outcome;
  std::optional<double> h2_error;
  std::optional<double> hsv_identity;
  std::optional<double> corollary_bound;
  std::string error;
  std::string metric_error;
  double runtime_ms = 0;
};

struct Cell {
  std::size_t job = 0;
  std::size_t signal = 0;
  std::optional<double> u_tensor_l2;
  std::optional<double> linf_bound;
  std::optional<double> observed_linf;
  std::optional<bool> bound_holds;
  std::string trajectory_csv;
  std::string error;
  double runtime_ms = 0;
};

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

std::string trajectory_csv(const Trajectory<double>& full, const Trajectory<double>& reduced) {
  std::string text = "t,y_full,y_red,abs_err\n";
  for (Index k = 0; k < full.samples(); ++k) {
    const double y = full.outputs(0, k);
    const double yr = reduced.outputs(0, k);
    text += format_double(full.times(k));
    text += ',';
    text += format_double(y);
    text += ',';
    text += format_double(yr);
    text += ',';
    text += format_double(std::abs(y - yr));
    text += '\n';
  }
  return text;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  if (config.methods.empty()) throw ValidationError("experiment needs at least one method");
  if (config.signals.empty()) throw ValidationError("experiment needs at least one signal");
  const LdqoSystem<double> sys = build_experiment_system(config);
  for (Index r : config.orders) {
    const Index cap = sys.n() + 1;
    if (r > cap) throw ValidationError("order " + std::to_string(r) + " exceeds the system dimension");
  }
  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + config.output_dir.string() + "'");
  const unsigned threads = experiment_threads();

  json summary;
  summary["schema"] = 1;
  summary["system"] = {{"n", sys.n()}, {"m", sys.m()}};
  summary["integrator"] = {{"dt", config.integrator.dt}, {"t_final", config.integrator.t_final}};
  try {
    summary["h2_norm_full"] = h2_norm(sys);
  } catch (const Error& e) {
    summary["h2_norm_full"] = nullptr;
    summary["h2_norm_error"] = e.what();
  }

  // Gramians and SVD once per method.
  std::vector<MethodState> methods(config.methods.size());
  parallel_for(methods.size(), threads, [&](std::size_t i) {
    MethodState& st = methods[i];
    st.method = config.methods[i];
    try {
      switch (st.method) {
        case Method::spbt:
          st.spbt = make_spbt_plan(sys);
          st.sigma = st.spbt->basis.sigma();
          break;
        case Method::ltbt:
          st.ltbt = make_ltbt_plan(sys);
          st.sigma = st.ltbt->basis.sigma();
          break;
        case Method::qbtbt:
          st.qbtbt = make_qbtbt_plan(sys, config.qbtbt);
          st.sigma = st.qbtbt->basis.sigma();
          break;
      }
      st.orders = config.threshold ? std::vector<Index>{order_for_threshold(st.sigma, *config.threshold)}
                                   : config.orders;
    } catch (const Error& e) {
      st.error = e.what();
      st.orders = config.orders;
    }
  });
  json method_summary = json::object();
  for (const MethodState& st : methods) {
    const std::string name = to_string(st.method);
    json entry;
    if (st.error.empty()) {
      std::string text = "index,sigma\n";
      for (Index k = 0; k < st.sigma.size(); ++k) {
        text += std::to_string(k + 1) + "," + format_double(st.sigma(k)) + "\n";
      }
      const std::string file = "sigma_" + name + ".csv";
      write_file(config.output_dir / file, text);
      entry["singular_values_csv"] = file;
      entry["orders"] = st.orders;
    } else {
      entry["error"] = st.error;
    }
    method_summary[name] = entry;
  }
  summary["methods"] = method_summary;

  // Balanced realization for the singular-value error terms.
  std::optional<BalancedRealization<double>> balanced;
  std::string balanced_error;
  for (const MethodState& st : methods) {
    if (st.method != Method::spbt || !st.spbt) continue;
    try {
      const Index k = (st.sigma.array() > config.balance_floor * st.sigma(0)).count();
      balanced = balanced_realization(sys, {}, k < sys.n() ? std::optional<Index>(k) : std::nullopt);
    } catch (const Error& e) {
      balanced_error = e.what();
    }
  }

  std::vector<ReductionJob> jobs;
  for (std::size_t i = 0; i < methods.size(); ++i) {
    for (Index r : methods[i].orders) {
      ReductionJob job;
      job.method_index = i;
      job.order = r;
      jobs.push_back(job);
    }
  }
  parallel_for(jobs.size(), threads, [&](std::size_t j) {
    ReductionJob& job = jobs[j];
    const MethodState& st = methods[job.method_index];
    const auto start = std::chrono::steady_clock::now();
    if (!st.error.empty()) {
      job.error = st.error;
      return;
    }
    try {
      if (st.spbt) job.outcome = st.spbt->reduce(job.order);
      if (st.ltbt) job.outcome = st.ltbt->reduce(job.order);
      if (st.qbtbt) job.outcome = st.qbtbt->reduce(job.order);
    } catch (const Error& e) {
      job.error = e.what();
      return;
    }
    try {
      if (job.outcome->reduced) job.h2_error = h2_error(sys, *job.outcome->reduced);
      if (st.spbt) {
        if (!balanced) throw NumericalError("balanced realization unavailable: " + balanced_error);
        if (job.order <= balanced->system.n()) {
          const HsvErrorTerms<double> t = hsv_error_terms(*balanced, job.order);
          job.hsv_identity = t.identity;
          job.corollary_bound = t.bound;
        }
      }
    } catch (const Error& e) {
      job.metric_error = e.what();
    }
    job.runtime_ms = elapsed_ms(start);
  });

  // Full-order trajectories once per signal.
  std::vector<std::optional<Trajectory<double>>> full(config.signals.size());
  std::vector<std::string> full_error(config.signals.size());
  parallel_for(full.size(), threads, [&](std::size_t s) {
    try {
      full[s] = simulate_ldqo(sys, config.signals[s], config.integrator);
    } catch (const Error& e) {
      full_error[s] = e.what();
    }
  });

  std::vector<Cell> cells;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    for (std::size_t s = 0; s < config.signals.size(); ++s) {
      Cell cell;
      cell.job = j;
      cell.signal = s;
      cells.push_back(std::move(cell));
    }
  }
  parallel_for(cells.size(), threads, [&](std::size_t c) {
    Cell& cell = cells[c];
    const ReductionJob& job = jobs[cell.job];
    const SignalSpec& signal = config.signals[cell.signal];
    const auto start = std::chrono::steady_clock::now();
    if (!job.error.empty()) {
      cell.error = job.error;
      return;
    }
    if (!full[cell.signal]) {
      cell.error = full_error[cell.signal];
      return;
    }
    try {
      if (signal.is_l2) {
        cell.u_tensor_l2 = u_tensor_l2(signal, static_cast<long>(sys.m()));
        if (job.h2_error) cell.linf_bound = *job.h2_error * *cell.u_tensor_l2;
      }
      const ReductionOutcome<double>& out = *job.outcome;
      Trajectory<double> red;
      if (out.method == Method::ltbt) {
        red = quadratic_output(simulate_ld(*out.reduced_ld, signal, config.integrator), out.ld_signs);
      } else if (out.method == Method::qbtbt) {
        red = simulate_qb(*out.reduced_qb, signal, config.integrator);
      } else {
        red = simulate_ldqo(*out.reduced, signal, config.integrator);
      }
      cell.observed_linf = traj_linf(*full[cell.signal], red);
      if (cell.linf_bound) {
        cell.bound_holds = *cell.observed_linf <= *cell.linf_bound * (1 + 1e-6) + 1e-8;
      }
      cell.trajectory_csv = "traj_" + to_string(out.method) + "_r" + std::to_string(job.order) + "_s" +
                            std::to_string(cell.signal) + ".csv";
      write_file(config.output_dir / cell.trajectory_csv, trajectory_csv(*full[cell.signal], red));
    } catch (const Error& e) {
      cell.error = e.what();
    }
    cell.runtime_ms = job.runtime_ms + elapsed_ms(start);
  });

  ExperimentResult result;
  json cell_list = json::array();
  for (const Cell& cell : cells) {
    const ReductionJob& job = jobs[cell.job];
    const MethodState& st = methods[job.method_index];
    json e;
    e["method"] = to_string(st.method);
    e["order"] = job.order;
    e["signal"] = config.signals[cell.signal].label();
    e["signal_index"] = cell.signal;
    e["status"] = cell.error.empty() ? "ok" : "error";
    if (!cell.error.empty()) e["error"] = cell.error;
    if (!job.metric_error.empty()) e["metric_error"] = job.metric_error;
    e["structure"] = st.method == Method::qbtbt ? "qb" : "ldqo";
    if (job.outcome) {
      e["stability_ok"] = job.outcome->stability_ok;
      e["gap_warning"] = job.outcome->gap_warning;
    }
    e["h2_error"] = optional_number(job.h2_error);
    e["hsv_identity"] = optional_number(job.hsv_identity);
    e["corollary_bound"] = optional_number(job.corollary_bound);
    e["u_tensor_l2"] = optional_number(cell.u_tensor_l2);
    e["linf_bound"] = optional_number(cell.linf_bound);
    e["observed_linf"] = optional_number(cell.observed_linf);
    e["bound_holds"] = cell.bound_holds ? json(*cell.bound_holds) : json(nullptr);
    e["runtime_ms"] = config.timing ? json(cell.runtime_ms) : json(nullptr);
    e["trajectory_csv"] = cell.trajectory_csv.empty() ? json(nullptr) : json(cell.trajectory_csv);
    cell_list.push_back(std::move(e));
    ++result.cells;
    if (!cell.error.empty()) ++result.failed_cells;
  }
  summary["cells"] = cell_list;
  if (balanced) summary["balanced_states"] = balanced->system.n();
  result.summary_path = config.output_dir / "summary.json";
  write_file(result.summary_path, summary.dump(2) + "\n");
  return result;
}

}  // namespace qomor
