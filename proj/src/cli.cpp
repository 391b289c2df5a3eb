#include "loralab/cli.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <set>
#include <sstream>
#include <vector>

#include "CLI11.hpp"
#include "loralab/advbound.hpp"
#include "loralab/boundcalc.hpp"
#include "loralab/empiric.hpp"
#include "loralab/errors.hpp"
#include "loralab/parallel.hpp"
#include "loralab/serialize.hpp"

#ifndef LORALAB_VERSION
#define LORALAB_VERSION "0.0.0"
#endif

namespace loralab::cli {

using nlohmann::json;

namespace {

// Strict view of one config object: every key must be read exactly once
// through get/need/child, and done() rejects whatever is left over.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw InvalidInput(label() + "must be a JSON object");
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    used_.insert(key);
    if (!j_.contains(key)) return fallback;
    return convert<T>(j_.at(key), key);
  }

  template <class T>
  T need(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) throw InvalidParameter("missing required config field '" + path(key) + "'");
    return convert<T>(j_.at(key), key);
  }

  template <class T>
  std::optional<T> maybe(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return std::nullopt;
    return convert<T>(j_.at(key), key);
  }

  // Sub-object, or an empty object when absent.
  Fields child(const std::string& key) {
    used_.insert(key);
    static const json empty = json::object();
    return Fields(j_.contains(key) ? j_.at(key) : empty, path(key));
  }
  bool has(const std::string& key) const { return j_.contains(key); }

  void done() const {
    for (const auto& item : j_.items()) {
      if (!used_.count(item.key())) {
        throw InvalidParameter("unknown config field '" + path(item.key()) + "'");
      }
    }
  }

  std::string path(const std::string& key) const {
    return where_.empty() ? key : where_ + "." + key;
  }

 private:
  std::string label() const { return where_.empty() ? "config " : "config field '" + where_ + "' "; }

  template <class T>
  T convert(const json& v, const std::string& key) const {
    const auto bad = [&](const char* what) {
      return InvalidParameter("config field '" + path(key) + "' must be " + what);
    };
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw bad("a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw bad("a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw bad("a number");
      return v.get<double>();
    } else if constexpr (std::is_integral_v<T>) {
      if (v.is_number_unsigned()) return static_cast<T>(v.get<std::uint64_t>());
      if (v.is_number_integer()) {
        if (v.get<std::int64_t>() < 0) throw bad("a non-negative integer");
        return static_cast<T>(v.get<std::int64_t>());
      }
      throw bad("a non-negative integer");
    } else {
      // std::vector<U>
      if (!v.is_array()) throw bad("an array");
      T out;
      for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(convert<typename T::value_type>(v.at(i), key));
      }
      return out;
    }
  }

  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

using Sizes = std::vector<std::size_t>;

net::Architecture read_arch(Fields f, bool need_r) {
  net::Architecture a;
  a.d = f.need<std::size_t>("d");
  a.D = f.need<std::size_t>("D");
  a.T = f.need<std::size_t>("T");
  a.W = f.need<std::size_t>("W");
  a.r = need_r ? f.need<std::size_t>("r") : f.get<std::size_t>("r", 1);
  a.activation = net::Activation::from_name(f.get<std::string>("activation", "relu"));
  f.done();
  a.validate_shapes();
  return a;
}

emp::TrainConfig read_train(Fields f) {
  emp::TrainConfig t;
  t.steps = f.get<std::size_t>("steps", t.steps);
  t.learning_rate = f.get<double>("learning_rate", t.learning_rate);
  t.batch_size = f.get<std::size_t>("batch_size", t.batch_size);
  t.M = f.get<double>("M", t.M);
  t.objective = emp::objective_from_name(
      f.get<std::string>("objective", emp::objective_name(t.objective)));
  t.check_every = f.get<std::size_t>("check_every", t.check_every);
  f.done();
  t.validate();
  return t;
}

json or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json or_null(const std::optional<double>& v) { return v ? or_null(*v) : json(nullptr); }

}  // namespace

std::string render(const json& report) { return report.dump(2) + "\n"; }

json cmd_bound(const json& config) {
  Fields f(config, "");
  bound::BoundConfig cfg;
  cfg.arch = read_arch(f.child("arch"), true);
  cfg.M = f.need<double>("M");
  cfg.nu = f.need<double>("nu");
  cfg.R0 = f.need<double>("R0");
  cfg.N = static_cast<std::int64_t>(f.need<std::uint64_t>("N"));
  cfg.delta = f.need<double>("delta");
  cfg.c2 = f.get<double>("c2", cfg.c2);
  cfg.loss_lipschitz = f.get<double>("loss_lipschitz", cfg.loss_lipschitz);
  cfg.c1 = f.maybe<double>("c1");
  f.done();
  cfg.validate();
  const auto rep = bound::generalization_bound(cfg);
  return json{{"epsilon", rep.epsilon}, {"R", rep.R},           {"R0", rep.R0},
              {"A", rep.A},             {"L_lora", rep.L_lora}, {"t_star", rep.t_star},
              {"G_star", rep.G_star},   {"q_formula", rep.q_formula},
              {"q_exact", rep.q_exact}};
}

namespace {

emp::SweepConfig read_sweep(const json& config, std::uint64_t seed) {
  Fields f(config, "");
  emp::SweepConfig cfg;
  cfg.arch = read_arch(f.child("arch"), false);
  cfg.r_values = f.need<Sizes>("r_values");
  cfg.N_values = f.need<Sizes>("N_values");
  cfg.seeds = f.need<std::vector<std::uint64_t>>("seeds");
  cfg.train = read_train(f.child("train"));
  cfg.nu = f.get<double>("nu", cfg.nu);
  cfg.delta = f.get<double>("delta", cfg.delta);
  cfg.c2 = f.get<double>("c2", cfg.c2);
  cfg.holdout_size = f.get<std::size_t>("holdout_size", cfg.holdout_size);
  cfg.weight_scale = f.get<double>("weight_scale", cfg.weight_scale);
  cfg.bias_scale = f.get<double>("bias_scale", cfg.bias_scale);
  cfg.target_rank = f.get<std::size_t>("target_rank", cfg.target_rank);
  cfg.target_scale = f.get<double>("target_scale", cfg.target_scale);
  cfg.noise_std = f.get<double>("noise_std", cfg.noise_std);
  cfg.input_law = emp::input_law_from_name(f.get<std::string>("input_law", "uniform"));
  cfg.record_wallclock = f.get<bool>("record_wallclock", false);
  f.done();
  cfg.seed = seed;
  cfg.validate();
  std::set<std::uint64_t> unique(cfg.seeds.begin(), cfg.seeds.end());
  if (unique.size() != cfg.seeds.size()) throw InvalidParameter("config field 'seeds' has duplicates");
  return cfg;
}

}  // namespace

std::string cmd_sweep(const json& config, std::uint64_t seed, json* cell_summary) {
  const auto cfg = read_sweep(config, seed);
  const auto records = emp::gap_sweep(cfg);
  if (cell_summary) {
    std::size_t ok = 0;
    for (const auto& r : records) ok += r.status == "ok";
    *cell_summary = {{"total", records.size()}, {"ok", ok}, {"diverged", records.size() - ok}};
  }
  return emp::records_to_csv(records);
}

json cmd_lowerbound(const json& config, std::uint64_t seed) {
  Fields f(config, "");
  adv::LowerBoundConfig cfg;
  cfg.T = f.get<std::size_t>("T", cfg.T);
  cfg.W = f.get<std::size_t>("W", cfg.W);
  cfg.r = f.get<std::size_t>("r", cfg.r);
  cfg.eta = f.get<double>("eta", cfg.eta);
  cfg.delta = f.get<double>("delta", cfg.delta);
  cfg.N = f.get<std::size_t>("N", cfg.N);
  cfg.trials = f.get<std::size_t>("trials", cfg.trials);
  cfg.c = f.get<double>("c", cfg.c);
  cfg.square_b = f.get<bool>("square_b", cfg.square_b);
  cfg.weight_scale = f.get<double>("weight_scale", cfg.weight_scale);
  f.done();
  cfg.validate();
  const auto rep = adv::lower_bound_experiment(cfg, num::RngState(seed, 0x10B0));
  return json{{"eta", rep.eta},
              {"eta_star", rep.eta_star},
              {"M_eta", or_null(rep.M_eta)},
              {"C_pre", rep.C_pre},
              {"residual_max", rep.residual_max},
              {"gordon_rate", rep.gordon_rate},
              {"gordon_bound", rep.gordon_bound},
              {"smallball_p", rep.smallball_p},
              {"event_frequency", rep.event_frequency},
              {"theory_floor", rep.theory_floor},
              {"event_standard_error", rep.event_standard_error},
              {"admissible_frequency", rep.admissible_frequency},
              {"admissibility_violations", rep.admissibility_violations},
              {"N", rep.N},
              {"trials", rep.trials},
              {"square_b", rep.square_b}};
}

json cmd_verify(const json& config, std::uint64_t seed) {
  Fields f(config, "");
  const auto trials = f.get<std::size_t>("trials", 10000);
  const double c = f.get<double>("c", 0.5);

  Fields g = f.child("gordon");
  const auto g_dout = g.get<std::size_t>("d_out", 64);
  const auto g_r = g.get<std::size_t>("r", 4);
  const auto g_etas = g.get<std::vector<double>>("etas", {1.0, 2.0, 4.0});
  g.done();

  Fields u = f.child("union_gordon");
  const auto u_dims = u.get<Sizes>("out_dims", {64, 64});
  const auto u_r = u.get<std::size_t>("r", 4);
  const auto u_eta = u.get<double>("eta", 2.0);
  u.done();

  Fields s = f.child("small_ball");
  const auto s_n = s.get<std::size_t>("N", 100);
  const auto s_t = s.get<double>("t", 2.0);
  const auto s_mc = s.get<bool>("force_mc", false);
  s.done();

  Fields d = f.child("diameter");
  const auto d_W = d.get<std::size_t>("W", 32);
  const auto d_r = d.get<std::size_t>("r", 4);
  const auto d_layers = d.get<std::size_t>("layers", 1);
  const double d_nu = d.get<double>("nu", 1.0);
  const double d_M = d.get<double>("M", 1.0);
  const double d_eps = d.get<double>("epsilon", 0.05);
  const auto d_draws = d.get<std::size_t>("draws", 500);
  d.done();
  f.done();

  // Validate everything before running anything.
  if (trials < 1000) throw InvalidParameter("config field 'trials' must be at least 1000");
  if (!(c > 0.0)) throw InvalidParameter("config field 'c' must be positive");
  if (g_dout < 1 || g_r < 1) throw InvalidParameter("gordon.d_out and gordon.r must be positive");
  if (g_etas.empty()) throw InvalidParameter("gordon.etas must be non-empty");
  for (double e : g_etas)
    if (!(e > 0.0)) throw InvalidParameter("gordon.etas entries must be positive");
  if (u_dims.empty() || u_r < 1 || !(u_eta > 0.0)) {
    throw InvalidParameter("union_gordon needs non-empty out_dims, r >= 1 and eta > 0");
  }
  for (auto w : u_dims)
    if (w < 1) throw InvalidParameter("union_gordon.out_dims entries must be positive");
  if (s_n < 1 || !(s_t >= 0.0)) throw InvalidParameter("small_ball needs N >= 1 and t >= 0");
  if (!(d_nu > 0.0) || !(d_M > 0.0)) throw InvalidParameter("diameter.nu and diameter.M must be positive");
  if (!(d_eps > 0.0 && d_eps < 1.0)) throw InvalidParameter("diameter.epsilon must lie in (0, 1)");
  if (d_draws < 1) throw InvalidParameter("diameter.draws must be at least 1");
  if (d_W < 1 || d_r < 1 || d_layers < 1) {
    throw InvalidParameter("diameter.W, diameter.r and diameter.layers must be positive");
  }

  const num::RngState root(seed, 0x7E51F);
  json report;
  json gordon = json::array();
  for (const auto& chk : adv::gordon_verify_grid(g_dout, g_r, g_etas, trials, root.split(0), c)) {
    gordon.push_back({{"d_out", chk.d_out},
                      {"r", chk.r},
                      {"eta", chk.eta},
                      {"c", chk.c},
                      {"trials", chk.trials},
                      {"failure_rate", chk.failure_rate},
                      {"bound", chk.bound},
                      {"tolerance", chk.tolerance},
                      {"mean_s_min", chk.mean_s_min},
                      {"passed", chk.passed}});
  }
  report["gordon"] = gordon;

  const auto ug = adv::union_gordon(u_dims, u_r, u_eta, trials, root.split(1), c);
  report["union_gordon"] = {{"out_dims", u_dims},
                            {"r", u_r},
                            {"eta", u_eta},
                            {"trials", ug.trials},
                            {"failure_rate", ug.failure_rate},
                            {"bound", ug.bound},
                            {"tolerance", ug.tolerance},
                            {"passed", ug.passed}};

  const auto sb = adv::small_ball(s_n, s_t, trials, root.split(2), s_mc);
  report["small_ball"] = {{"N", sb.N},
                          {"t", sb.t},
                          {"p_hat", sb.p_hat},
                          {"standard_error", sb.standard_error},
                          {"exact_available", sb.exact_available},
                          {"p_exact", or_null(sb.p_exact)},
                          {"trials", sb.trials}};

  const std::vector<std::size_t> rows(d_layers, d_W);
  const auto de = emp::diameter_event_frequency(rows, d_r, d_W, d_nu, d_M, d_eps, d_draws,
                                                root.split(3));
  const double floor =
      1.0 - d_eps - 3.0 * std::sqrt(d_eps / static_cast<double>(d_draws));
  report["diameter_event"] = {{"W", d_W},
                              {"r", d_r},
                              {"layers", d_layers},
                              {"draws", de.draws},
                              {"R", de.R},
                              {"epsilon", de.epsilon},
                              {"frequency", de.frequency},
                              {"frequency_signed", de.frequency_signed},
                              {"floor", floor},
                              {"passed", de.frequency >= floor}};
  return report;
}

json cmd_train(const json& config, std::uint64_t seed) {
  Fields f(config, "");
  emp::SweepConfig task_cfg;
  task_cfg.arch = read_arch(f.child("arch"), true);
  task_cfg.train = read_train(f.child("train"));
  task_cfg.nu = f.get<double>("nu", task_cfg.nu);
  task_cfg.delta = f.get<double>("delta", task_cfg.delta);
  task_cfg.c2 = f.get<double>("c2", task_cfg.c2);
  const auto N = f.need<std::size_t>("N");
  task_cfg.holdout_size = f.get<std::size_t>("holdout_size", task_cfg.holdout_size);
  task_cfg.weight_scale = f.get<double>("weight_scale", task_cfg.weight_scale);
  task_cfg.bias_scale = f.get<double>("bias_scale", task_cfg.bias_scale);
  task_cfg.target_rank = f.get<std::size_t>("target_rank", task_cfg.target_rank);
  task_cfg.target_scale = f.get<double>("target_scale", task_cfg.target_scale);
  task_cfg.noise_std = f.get<double>("noise_std", task_cfg.noise_std);
  task_cfg.input_law = emp::input_law_from_name(f.get<std::string>("input_law", "uniform"));
  const auto factor = f.get<std::string>("trained_factor", "A");
  const bool emit_adapter = f.get<bool>("emit_adapter", false);
  f.done();
  if (factor != "A" && factor != "B") {
    throw InvalidParameter("config field 'trained_factor' must be \"A\" or \"B\"");
  }
  if (N < 1) throw InvalidParameter("config field 'N' must be at least 1");
  task_cfg.r_values = {task_cfg.arch.r};
  task_cfg.N_values = {N};
  task_cfg.seeds = {seed};
  task_cfg.seed = seed;
  task_cfg.validate();

  const auto task = emp::sweep_task(task_cfg);
  num::RngState data_rng(seed, 0xDA7A);
  const Dataset train = task.sample(data_rng, N);
  num::RngState hold_rng(seed, 0x401D);
  const Dataset holdout = task.sample(hold_rng, task_cfg.holdout_size);
  num::RngState frozen_rng(seed, 0xF0F0);
  const auto trained = factor == "A" ? net::Factor::A : net::Factor::B;
  const auto adapter =
      net::init_adapter(frozen_rng, task_cfg.arch, task_cfg.nu, task_cfg.train.M, trained);
  auto tc = task_cfg.train;
  tc.seed = seed;
  const auto result = emp::train_projected_sgd(task.net, adapter, train, tc);

  bound::BoundConfig bc;
  bc.arch = task_cfg.arch;
  bc.M = tc.M;
  bc.nu = task_cfg.nu;
  bc.R0 = task.net.max_abs();
  bc.N = static_cast<std::int64_t>(N);
  bc.delta = task_cfg.delta;
  bc.c2 = task_cfg.c2;
  const auto rep = bound::generalization_bound(bc);
  const double train_risk = emp::empirical_risk(task.net, result.adapter, train);
  const double holdout_risk = emp::empirical_risk(task.net, result.adapter, holdout);

  json out{{"train_risk", train_risk},
           {"holdout_risk", holdout_risk},
           {"gap", std::abs(holdout_risk - train_risk)},
           {"G_star", rep.G_star},
           {"q_formula", rep.q_formula},
           {"q_exact", rep.q_exact},
           {"trained_factor", factor},
           {"steps_run", result.steps_run},
           {"objective_trace", result.objective_trace},
           {"max_abs_trainable", result.adapter.max_abs_trainable()},
           {"frozen_unchanged", result.adapter.frozen_checksum() == adapter.frozen_checksum()}};
  if (emit_adapter) {
    out["pretrained"] = io::to_json(task.net);
    out["adapter"] = io::to_json(result.adapter);
  }
  return out;
}

namespace {

json load_config(const Invocation& inv) {
  if (!inv.config_path) return json::object();
  const std::string text = io::read_text_file(*inv.config_path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidInput("config '" + *inv.config_path + "' is not valid JSON: " + e.what());
  }
}

std::string dispatch(const Invocation& inv, const json& config, json& manifest) {
  if (inv.command == "bound") return render(cmd_bound(config));
  if (inv.command == "lowerbound") return render(cmd_lowerbound(config, inv.seed));
  if (inv.command == "verify") return render(cmd_verify(config, inv.seed));
  if (inv.command == "train") return render(cmd_train(config, inv.seed));
  if (inv.command == "sweep") {
    json cells;
    std::string csv = cmd_sweep(config, inv.seed, &cells);
    manifest["cells"] = cells;
    return csv;
  }
  throw InvalidParameter("unknown subcommand '" + inv.command + "'");
}

}  // namespace

int execute(const Invocation& inv, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  json manifest{{"tool", "loralab"},
                {"version", LORALAB_VERSION},
                {"command", inv.command},
                {"config_path", inv.config_path ? json(*inv.config_path) : json(nullptr)},
                {"config", nullptr},
                {"seed", inv.seed},
                {"threads", nullptr},
                {"out", inv.out ? json(*inv.out) : json(nullptr)}};
  int code = kExitOk;
  try {
    if (inv.threads) set_threads(*inv.threads);
    manifest["threads"] = max_threads();
    const json config = load_config(inv);
    manifest["config"] = config;
    const std::string primary = dispatch(inv, config, manifest);
    if (inv.out) {
      io::write_text_file(*inv.out, primary);
    } else {
      out << primary;
      out.flush();
    }
  } catch (const InvalidInput& e) {
    err << "validation error: " << e.what() << '\n';
    manifest["error"] = e.what();
    code = kExitValidation;
  } catch (const InvalidParameter& e) {
    err << "validation error: " << e.what() << '\n';
    manifest["error"] = e.what();
    code = kExitValidation;
  } catch (const InvalidArchitecture& e) {
    err << "validation error: " << e.what() << '\n';
    manifest["error"] = e.what();
    code = kExitValidation;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << '\n';
    manifest["error"] = e.what();
    code = kExitRuntime;
  }
  manifest["status"] = code == kExitOk ? "ok" : "failed";
  manifest["exit_code"] = code;
  manifest["wallclock_ms"] =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

  const std::string text = render(manifest);
  const std::optional<std::string> path =
      inv.manifest ? inv.manifest
                   : (inv.out ? std::optional<std::string>(*inv.out + ".manifest.json")
                              : std::nullopt);
  if (path) {
    try {
      io::write_text_file(*path, text);
    } catch (const std::exception& e) {
      err << "runtime error: cannot write manifest: " << e.what() << '\n';
      err << text;
      if (code == kExitOk) code = kExitRuntime;
    }
  } else {
    err << text;
  }
  return code;
}

int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Asymmetric LoRA generalization laboratory"};
  app.require_subcommand(1);
  Invocation inv;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"bound", "evaluate the closed-form upper bound and its intermediates (JSON)"},
      {"sweep", "train over an (r, N, seed) grid and record gaps (CSV)"},
      {"lowerbound", "run the adversarial lower-bound experiment (JSON)"},
      {"verify", "random-matrix and anti-concentration checks (JSON)"},
      {"train", "train one adapter on a synthetic task (JSON)"}};
  std::vector<CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option_function<std::string>(
        "--config", [&](const std::string& v) { inv.config_path = v; }, "JSON config file");
    sub->add_option("--seed", inv.seed, "64-bit seed for every random stream");
    sub->add_option_function<std::string>(
        "--out", [&](const std::string& v) { inv.out = v; }, "primary output path (default stdout)");
    sub->add_option_function<int>(
        "--threads", [&](int v) { inv.threads = v; }, "OpenMP thread count");
    sub->add_option_function<std::string>(
        "--manifest", [&](const std::string& v) { inv.manifest = v; },
        "run manifest path (default <out>.manifest.json, or stderr)");
    subs.push_back(sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitValidation;
  }
  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (subs[i]->parsed()) inv.command = commands[i].first;
  }
  return execute(inv, out, err);
}

}  // namespace loralab::cli
