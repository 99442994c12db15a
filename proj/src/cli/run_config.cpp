#include <functional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "lisest/cli.hpp"
#include "lisest/checkpoint.hpp"
#include "lisest/generators.hpp"
#include "lisest/power_system.hpp"

namespace lisest::cli {

Json to_json(const RunConfig& c) {
  Json j;
  j["command"] = c.command;
  j["model"] = c.model_path;
  j["generate"] = c.generate;
  j["seed"] = c.seed;
  j["out"] = c.out;
  j["horizon"] = c.horizon;
  j["trials"] = c.trials;
  j["policy"] = c.policy;
  j["tol"] = c.tol;
  j["max_iter"] = c.max_iter;
  j["threads"] = c.threads;
  j["estimators"] = c.estimators;
  j["noise"] = c.noise;
  j["p0_scale"] = c.p0_scale;
  j["steady"] = c.steady_path;
  j["init_scale"] = c.init_scale ? Json(*c.init_scale) : Json(nullptr);
  j["sweep"] = c.sweep;
  j["closed_loop"] = c.closed_loop;
  return j;
}

RunConfig config_from_json(const Json& doc) {
  const Json& j = doc.contains("config") && doc["config"].is_object() ? doc["config"] : doc;
  if (!j.is_object()) throw std::invalid_argument("config file must hold a JSON object");
  RunConfig c;
  try {
    c.command = j.value("command", c.command);
    c.model_path = j.value("model", c.model_path);
    c.generate = j.value("generate", c.generate);
    c.seed = j.value("seed", c.seed);
    c.out = j.value("out", c.out);
    c.horizon = j.value("horizon", c.horizon);
    c.trials = j.value("trials", c.trials);
    c.policy = j.value("policy", c.policy);
    c.tol = j.value("tol", c.tol);
    c.max_iter = j.value("max_iter", c.max_iter);
    c.threads = j.value("threads", c.threads);
    c.estimators = j.value("estimators", c.estimators);
    c.noise = j.value("noise", c.noise);
    c.p0_scale = j.value("p0_scale", c.p0_scale);
    c.steady_path = j.value("steady", c.steady_path);
    if (j.contains("init_scale") && !j["init_scale"].is_null()) c.init_scale = j["init_scale"].get<double>();
    c.sweep = j.value("sweep", c.sweep);
    c.closed_loop = j.value("closed_loop", c.closed_loop);
  } catch (const Json::exception& e) {
    throw std::invalid_argument(std::string("bad config value: ") + e.what());
  }
  return c;
}

std::optional<std::string> GeneratorSpec::get(const std::string& key) const {
  for (const auto& [k, v] : params) {
    if (k == key) return v;
  }
  return std::nullopt;
}

GeneratorSpec parse_generator(const std::string& text) {
  std::istringstream is(text);
  GeneratorSpec spec;
  if (!(is >> spec.kind)) throw std::invalid_argument("empty generator spec");
  std::string tok;
  while (is >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw std::invalid_argument("generator parameter '" + tok + "' is not key=value");
    }
    spec.params.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
  }
  return spec;
}

namespace {

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw std::invalid_argument("generator parameter " + key + "=" + v + " is not a number");
  }
}

int to_int(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d != static_cast<int>(d)) throw std::invalid_argument("generator parameter " + key + " must be an integer");
  return static_cast<int>(d);
}

void reject_unknown(const GeneratorSpec& spec, std::initializer_list<const char*> known) {
  for (const auto& [k, v] : spec.params) {
    bool ok = false;
    for (const char* name : known) ok = ok || k == name;
    if (!ok) throw std::invalid_argument("unknown parameter '" + k + "' for generator '" + spec.kind + "'");
  }
}

}  // namespace

LisModel build_model(const RunConfig& config) {
  if (!config.model_path.empty() && !config.generate.empty()) {
    throw std::invalid_argument("give either --model or --generate, not both");
  }
  if (!config.model_path.empty()) return load_model(config.model_path);
  if (config.generate.empty()) throw std::invalid_argument("no model: pass --model PATH or --generate SPEC");

  const GeneratorSpec spec = parse_generator(config.generate);
  if (spec.kind == "power-system") {
    reject_unknown(spec, {"s", "M", "horizon", "switch", "topology", "ts", "disc", "q", "r"});
    PowerSystemConfig pc;
    pc.horizon = config.horizon_or(500);
    if (auto v = spec.get("s")) pc.areas = to_int("s", *v);
    if (auto v = spec.get("switch")) pc.switch_period = to_int("switch", *v);
    if (auto v = spec.get("ts")) pc.sampling_period = to_double("ts", *v);
    if (auto v = spec.get("q")) pc.process_noise = to_double("q", *v);
    if (auto v = spec.get("r")) pc.measurement_noise = to_double("r", *v);
    if (auto v = spec.get("topology")) {
      if (*v == "ring") {
        pc.topology = TieTopology::ring;
      } else if (*v == "mesh") {
        pc.topology = TieTopology::mesh;
      } else if (*v == "none") {
        pc.topology = TieTopology::none;
      } else {
        throw std::invalid_argument("topology must be ring, mesh or none");
      }
    }
    if (auto v = spec.get("disc")) {
      if (*v == "zoh") {
        pc.discretization = DiscretizationMethod::block_zoh;
      } else if (*v == "euler") {
        pc.discretization = DiscretizationMethod::euler;
      } else {
        throw std::invalid_argument("disc must be zoh or euler");
      }
    }
    return generate_power_system(pc, config.seed);
  }
  if (spec.kind == "scalar") {
    reject_unknown(spec, {"a", "c", "q", "r"});
    auto num = [&](const char* k, double d) { auto v = spec.get(k); return v ? to_double(k, *v) : d; };
    return scalar_model(num("a", 1.0), num("c", 1.0), num("q", 1.0), num("r", 1.0));
  }
  if (spec.kind == "random") {
    reject_unknown(spec, {"s", "nmin", "nmax", "density", "coupling", "radius", "epochs", "switch", "q", "r",
                          "measured"});
    RandomLisSpec rs;
    if (auto v = spec.get("s")) rs.subsystems = to_int("s", *v);
    if (auto v = spec.get("nmin")) rs.min_dim = to_int("nmin", *v);
    if (auto v = spec.get("nmax")) rs.max_dim = to_int("nmax", *v);
    if (auto v = spec.get("density")) rs.coupling_density = to_double("density", *v);
    if (auto v = spec.get("coupling")) rs.coupling_scale = to_double("coupling", *v);
    if (auto v = spec.get("radius")) rs.diag_radius = to_double("radius", *v);
    if (auto v = spec.get("epochs")) rs.epochs = to_int("epochs", *v);
    if (auto v = spec.get("switch")) rs.switch_period = to_int("switch", *v);
    if (auto v = spec.get("q")) rs.q_scale = to_double("q", *v);
    if (auto v = spec.get("r")) rs.r_scale = to_double("r", *v);
    if (auto v = spec.get("measured")) rs.measured = to_int("measured", *v) != 0;
    std::mt19937_64 rng(config.seed);
    return random_lis(rs, rng);
  }
  throw std::invalid_argument("unknown generator '" + spec.kind + "' (expected power-system, scalar or random)");
}

namespace {

struct Binding {
  CLI::Option* option;
  std::function<void(RunConfig&, const RunConfig&)> copy;
};

#define LISEST_BIND(field) [](RunConfig& dst, const RunConfig& src) { dst.field = src.field; }

}  // namespace

std::optional<RunConfig> parse_command_line(int argc, const char* const* argv, std::ostream& out) {
  CLI::App app{"Distributed state estimation for interconnected systems"};
  app.name("lisest");
  app.require_subcommand(1);

  RunConfig flags;
  std::string config_path;
  std::string estimators;
  std::string sweep;
  double init_scale = 0.0;
  std::map<CLI::App*, std::vector<Binding>> bindings;

  struct Sub {
    const char* name;
    const char* help;
  };
  const Sub subs[] = {
      {"simulate", "Monte Carlo RMSE of the configured estimators"},
      {"stability", "Boundedness verdict, LMI checks and condition report"},
      {"steady", "Steady-state gains of a time-invariant model"},
      {"markov-verify", "Compare the jump-system mean recursion with direct simulation"},
  };
  for (const Sub& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    auto& b = bindings[sub];
    sub->add_option("--config", config_path, "JSON config or metadata file; flags override it");
    b.push_back({sub->add_option("--model", flags.model_path, "model file (JSON)"), LISEST_BIND(model_path)});
    b.push_back({sub->add_option("--generate", flags.generate,
                                 "generator spec, e.g. \"power-system s=10 M=500 horizon=500\""),
                 LISEST_BIND(generate)});
    b.push_back({sub->add_option("--seed", flags.seed, "master seed"), LISEST_BIND(seed)});
    b.push_back({sub->add_option("--out", flags.out, "output directory"), LISEST_BIND(out)});
    b.push_back({sub->add_option("--horizon", flags.horizon, "number of steps"), LISEST_BIND(horizon)});
    b.push_back({sub->add_option("--trials", flags.trials, "Monte Carlo trials M"), LISEST_BIND(trials)});
    b.push_back({sub->add_option("--policy", flags.policy, "decoupling policy: out, in or unit"),
                 LISEST_BIND(policy)});
    b.push_back({sub->add_option("--tol", flags.tol, "steady-state tolerance"), LISEST_BIND(tol)});
    b.push_back({sub->add_option("--max-iter", flags.max_iter, "steady-state iteration cap"), LISEST_BIND(max_iter)});
    b.push_back({sub->add_option("--threads", flags.threads, "worker thread cap (0 = default)"),
                 LISEST_BIND(threads)});
    b.push_back({sub->add_option("--p0", flags.p0_scale, "initial covariance scale P(0) = p0 I"),
                 LISEST_BIND(p0_scale)});
    if (std::string(s.name) == "simulate") {
      b.push_back({sub->add_option("--estimators", estimators, "comma list of distributed, steady, centralized"),
                   LISEST_BIND(estimators)});
      b.push_back({sub->add_option("--noise", flags.noise, "none, uniform or gaussian"), LISEST_BIND(noise)});
      b.push_back({sub->add_option("--steady", flags.steady_path, "steady checkpoint for the steady estimator"),
                   LISEST_BIND(steady_path)});
    } else if (std::string(s.name) == "stability") {
      b.push_back({sub->add_option("--sweep", sweep, "comma list of coupling scales"), LISEST_BIND(sweep)});
    } else if (std::string(s.name) == "steady") {
      b.push_back({sub->add_option("--init-scale", init_scale, "start the iteration from P_bar(1) = x I"),
                   LISEST_BIND(init_scale)});
    } else {
      b.push_back({sub->add_flag("--closed-loop", flags.closed_loop, "use closed-loop error blocks"),
                   LISEST_BIND(closed_loop)});
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return std::nullopt;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return std::nullopt;
  } catch (const CLI::ParseError& e) {
    throw std::invalid_argument(e.what());
  }

  CLI::App* chosen = app.get_subcommands().front();
  auto split = [](const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) parts.push_back(item);
    }
    return parts;
  };
  if (!estimators.empty()) flags.estimators = split(estimators);
  if (!sweep.empty()) {
    flags.sweep.clear();
    for (const auto& p : split(sweep)) flags.sweep.push_back(to_double("sweep", p));
  }
  if (auto* opt = chosen->get_option_no_throw("--init-scale"); opt && opt->count()) flags.init_scale = init_scale;

  Json file_doc = config_path.empty() ? Json::object() : load_json(config_path);
  RunConfig config = config_path.empty() ? RunConfig{} : config_from_json(file_doc);
  const Json& file_cfg = file_doc.contains("config") ? file_doc["config"] : file_doc;
  for (const auto& b : bindings[chosen]) {
    if (b.option->count() > 0) b.copy(config, flags);
  }
  config.command = chosen->get_name();

  // generator keys M and horizon lose to both the config file and flags
  if (!config.generate.empty()) {
    const GeneratorSpec spec = parse_generator(config.generate);
    if (auto v = spec.get("M"); v && !chosen->count("--trials") && !file_cfg.contains("trials")) {
      config.trials = to_int("M", *v);
    }
    if (auto v = spec.get("horizon"); v && !chosen->count("--horizon") && !file_cfg.contains("horizon")) {
      config.horizon = to_int("horizon", *v);
    }
  }
  return config;
}

}  // namespace lisest::cli
