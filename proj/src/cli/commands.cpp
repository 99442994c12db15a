#include <omp.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "lisest/checkpoint.hpp"
#include "lisest/cli.hpp"
#include "lisest/markov.hpp"
#include "lisest/report_io.hpp"
#include "lisest/sim.hpp"
#include "lisest/stability.hpp"

namespace lisest::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

Json metadata(const RunConfig& config, const Json& outputs) {
  Json j;
  j["tool"] = "lisest";
  j["version"] = kVersion;
  j["config"] = to_json(config);
  j["outputs"] = outputs;
  return j;
}

fs::path prepare_out(const RunConfig& config) {
  const fs::path dir(config.out);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

int verdict_code(Verdict v) {
  switch (v) {
    case Verdict::yes:
      return kSuccess;
    case Verdict::no:
      return kVerdictNo;
    case Verdict::inconclusive:
      break;
  }
  return kInconclusive;
}

StabilityOptions stability_options(const RunConfig& config) {
  StabilityOptions o;
  o.steady.tol = config.tol;
  o.steady.max_iter = config.max_iter;
  return o;
}

double mean_tail(const std::vector<double>& rmse) {
  if (rmse.size() < 2) return rmse.empty() ? 0.0 : rmse[0];
  return std::accumulate(rmse.begin() + 1, rmse.end(), 0.0) / static_cast<double>(rmse.size() - 1);
}

}  // namespace

int cmd_simulate(const RunConfig& config, std::ostream& out, std::ostream& err) {
  if (config.trials <= 0) {
    err << "error: trials must be positive (got " << config.trials << ")\n";
    return kUsageError;
  }
  const int horizon = config.horizon_or(500);
  if (horizon <= 0) {
    err << "error: horizon must be positive\n";
    return kUsageError;
  }
  if (config.estimators.empty()) {
    err << "error: no estimators requested\n";
    return kUsageError;
  }
  const LisModel model = build_model(config);
  if (model.horizon() && *model.horizon() < horizon) {
    err << "error: model is defined up to k = " << *model.horizon() << ", horizon " << horizon << " requested\n";
    return kUsageError;
  }

  NoiseSpec noise;
  noise.kind = parse_noise_kind(config.noise);
  const DecouplingPolicy policy = parse_policy(config.policy);

  std::vector<EstimatorConfig> configs;
  std::set<std::string> seen;
  for (const auto& name : config.estimators) {
    if (!seen.insert(name).second) {
      err << "error: estimator '" << name << "' listed twice\n";
      return kUsageError;
    }
    EstimatorConfig ec;
    ec.kind = parse_estimator_kind(name);
    ec.policy = policy;
    ec.p0_scale = config.p0_scale;
    ec.label = name;
    if (ec.kind == EstimatorKind::steady && !config.steady_path.empty()) {
      const SteadyState st = steady_from_json(load_json(config.steady_path));
      if (static_cast<int>(st.k.k.size()) != model.s()) {
        err << "error: steady checkpoint has " << st.k.k.size() << " subsystems, model has " << model.s() << "\n";
        return kUsageError;
      }
      for (int i = 0; i < model.s(); ++i) {
        if (st.k.k[i].rows() != model.state_dim(i) || st.k.k[i].cols() != model.meas_dim(i)) {
          err << "error: steady checkpoint gain " << i << " does not match the model dimensions\n";
          return kUsageError;
        }
      }
      ec.steady_gains = st.k;
    }
    configs.push_back(std::move(ec));
  }

  MonteCarloOptions mc;
  mc.trials = config.trials;
  mc.horizon = horizon;
  mc.seed = config.seed;
  const auto ensembles = monte_carlo_rmse(model, configs, noise, mc);

  const fs::path dir = prepare_out(config);
  Json outputs = Json::array();
  Json summary = Json::object();
  for (const auto& e : ensembles) {
    const std::string file = "rmse_" + e.label + ".csv";
    std::ostringstream os;
    write_rmse_csv(os, {e});
    write_text(dir / file, os.str());
    outputs.push_back(file);
    const double mean = mean_tail(e.rmse);
    summary[e.label] = {{"mean_rmse", mean}, {"final_rmse", e.rmse.back()},
                        {"trials_used", e.trials_used}, {"diverged", e.diverged}};
    out << std::left << std::setw(14) << e.label << " mean RMSE " << std::setprecision(6) << mean
        << "  final " << e.rmse.back() << "  trials " << e.trials_used << "/" << e.trials;
    if (e.diverged) out << "  (" << e.diverged << " diverged)";
    out << "\n";
  }

  const auto central = std::find_if(ensembles.begin(), ensembles.end(),
                                    [](const TrialEnsemble& e) { return e.label == "centralized"; });
  if (central != ensembles.end() && config.trials > 1) {
    Json boots = Json::object();
    for (const auto& e : ensembles) {
      if (&e == &*central) continue;
      const BootstrapResult b = bootstrap_mean_rmse_difference(*central, e);
      boots[e.label] = to_json(b);
      out << "centralized vs " << e.label << ": mean RMSE difference " << b.mean_difference
          << ", 95% lower bound " << b.lower << (b.a_not_worse ? " (centralized not worse)" : "") << "\n";
    }
    summary["bootstrap_vs_centralized"] = boots;
  }

  save_json(dir / "summary.json", summary);
  save_model(dir / "model.json", model);
  outputs.push_back("summary.json");
  outputs.push_back("model.json");
  save_json(dir / "metadata.json", metadata(config, outputs));
  return kSuccess;
}

int cmd_stability(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const LisModel model = build_model(config);
  const DecouplingPolicy policy = parse_policy(config.policy);
  const int horizon = config.horizon_or(500);
  const StabilityOptions opts = stability_options(config);
  const auto schedule = distributed_gain_schedule(model, policy, horizon, config.p0_scale);
  const ConditionReport conditions = verify_conditions(model, policy, horizon, &schedule.states);

  Json doc;
  doc["time_invariant"] = model.is_time_invariant();
  doc["conditions"] = to_json(conditions);
  Verdict verdict = Verdict::inconclusive;

  if (model.is_time_invariant()) {
    const auto theta = decoupling_variables(model, policy, 0);
    const StabilityReport report = boundedness_check(model, theta, opts);
    std::vector<DistributedLmiRow> rows;
    for (int i = 0; i < model.s(); ++i) rows.push_back(distributed_lmi_check(model, i, theta[i]));
    const StabilityReport lmi = centralized_lmi_feasibility(model, theta, opts);
    verdict = report.bounded;

    print_summary(out, report);
    print_summary(out, rows);
    out << "centralized LMI: " << to_string(lmi.bounded) << " via " << lmi.method;
    if (lmi.lmi_x) out << ", block min eigenvalue " << lmi.lmi_min_eig;
    out << "\n";

    doc["boundedness"] = to_json(report);
    Json jr = Json::array();
    for (const auto& r : rows) jr.push_back(to_json(r));
    doc["distributed_lmi"] = jr;
    doc["centralized_lmi"] = to_json(lmi);
  } else {
    // The last epoch runs forever and every earlier one is finite, so the
    // DMRE is bounded iff it is bounded on the final parameter set.  The
    // other epochs are reported for information.
    DmreProbeOptions po;
    po.horizon = horizon;
    po.p0_scale = config.p0_scale;
    const DmreProbe probe = dmre_probe(model, policy, po);
    Json epochs = Json::array();
    out << "epoch  start  bounded  spectral radius\n";
    StabilityReport last;
    std::vector<DistributedLmiRow> rows;
    for (std::size_t e = 0; e < model.epochs().size(); ++e) {
      const Epoch& ep = model.epochs()[e];
      const LisModel frozen = LisModel::time_invariant(model.pattern(), ep.params, model.options());
      const auto theta = decoupling_variables(frozen, policy, 0);
      StabilityReport rep = boundedness_check(frozen, theta, opts);
      out << std::setw(5) << e << std::setw(7) << ep.start << std::setw(9) << to_string(rep.bounded) << "  "
          << (rep.spectral_radius ? std::to_string(*rep.spectral_radius) : std::string("n/a")) << "\n";
      if (e + 1 == model.epochs().size()) {
        for (int i = 0; i < model.s(); ++i) rows.push_back(distributed_lmi_check(frozen, i, theta[i]));
      }
      Json je = to_json(rep);
      je["start"] = ep.start;
      epochs.push_back(je);
      last = std::move(rep);
    }
    verdict = last.bounded;
    std::string method = "final epoch: " + last.method;
    if (!probe.bounded && probe.reason.find("growing") == std::string::npos) {
      verdict = Verdict::no;
      method = "DMRE probe: " + probe.reason;
    }
    out << "bounded: " << to_string(verdict) << " (" << method << ")\n";
    out << "final epoch rows:\n";
    print_summary(out, rows);
    out << "DMRE probe over " << probe.steps << " steps: " << (probe.bounded ? "bounded" : "unbounded")
        << ", sup trace " << probe.sup_trace << "\n";
    doc["boundedness"] = {{"bounded", to_string(verdict)}, {"method", method}, {"final_epoch", to_json(last)}};
    doc["epochs"] = epochs;
    Json jr = Json::array();
    for (const auto& r : rows) jr.push_back(to_json(r));
    doc["distributed_lmi"] = jr;
    doc["probe"] = to_json(probe);
  }
  print_summary(out, conditions);

  if (!config.sweep.empty()) {
    DmreProbeOptions po;
    po.horizon = horizon;
    po.p0_scale = config.p0_scale;
    const SweepReport sweep = weak_coupling_sweep(model, config.sweep, policy, po);
    print_summary(out, sweep);
    doc["sweep"] = to_json(sweep);
  }

  doc["verdict"] = to_string(verdict);
  const fs::path dir = prepare_out(config);
  save_json(dir / "stability.json", doc);
  save_json(dir / "metadata.json", metadata(config, Json::array({"stability.json"})));
  (void)err;
  return verdict_code(verdict);
}

int cmd_steady(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const LisModel model = build_model(config);
  if (!model.is_time_invariant()) {
    err << "error: steady gains need a time-invariant model (this one has " << model.epochs().size()
        << " epochs)\n";
    return kUsageError;
  }
  const DecouplingPolicy policy = parse_policy(config.policy);
  const auto theta = decoupling_variables(model, policy, 0);
  SteadyStateOptions so;
  so.tol = config.tol;
  so.max_iter = config.max_iter;
  if (config.init_scale) {
    if (*config.init_scale < 0.0) {
      err << "error: init-scale must be nonnegative\n";
      return kUsageError;
    }
    so.initial = *config.init_scale * Matrix::Identity(model.n(), model.n());
  }
  const SteadyState st = steady_state_solve(model, theta, so);

  if (st.status == SolveStatus::diverged) {
    const StabilityReport rep = boundedness_check(model, theta, stability_options(config));
    err << "refusing to write steady gains: the DMRE diverged after " << st.iterations
        << " iterations, so no bounded steady state exists";
    if (rep.spectral_radius) err << " (lifted operator spectral radius " << *rep.spectral_radius << " >= 1)";
    err << "\n";
    return kVerdictNo;
  }
  if (st.status == SolveStatus::max_iterations) {
    err << "steady iteration stopped at max-iter " << st.iterations << " with residual " << st.residual
        << "; no checkpoint written\n";
    return kInconclusive;
  }

  std::vector<int> dims(model.s());
  for (int i = 0; i < model.s(); ++i) dims[i] = model.state_dim(i);
  const fs::path dir = prepare_out(config);
  save_json(dir / "steady.json", steady_to_json(st, dims));
  save_json(dir / "metadata.json", metadata(config, Json::array({"steady.json"})));

  out << "converged in " << st.iterations << " iterations, residual " << st.residual << "\n";
  out << std::setprecision(12);
  if (model.n() == 1 && model.m() == 1) {
    out << "p_bar " << st.p_bar(0, 0) << "\ngain " << st.k.k[0](0, 0) << "\n";
  } else {
    const auto off = model.pattern().state_offsets();
    for (int i = 0; i < model.s(); ++i) {
      const int ni = model.state_dim(i);
      out << "subsystem " << i << ": trace P_bar " << st.p_bar.block(off[i], off[i], ni, ni).trace() << ", |K| "
          << st.k.k[i].norm() << "\n";
    }
  }
  return kSuccess;
}

int cmd_markov_verify(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const LisModel model = build_model(config);
  const int horizon = config.horizon_or(25);
  if (horizon <= 0) {
    err << "error: horizon must be positive\n";
    return kUsageError;
  }
  const int s = model.s();
  std::vector<int> dims(s);
  for (int i = 0; i < s; ++i) dims[i] = model.state_dim(i);

  std::optional<GainSchedule> schedule;
  if (config.closed_loop) {
    schedule = distributed_gain_schedule(model, parse_policy(config.policy), horizon, config.p0_scale);
  }

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal;
  BlockVectors zeta(s);
  for (int i = 0; i < s; ++i) {
    zeta[i].resize(dims[i]);
    for (int r = 0; r < dims[i]; ++r) zeta[i](r) = normal(rng);
  }
  BlockVectors xi = zeta;
  SecondMomentState sm;
  sm.xi.resize(s);
  for (int i = 0; i < s; ++i) sm.xi[i] = static_cast<double>(s) * zeta[i] * zeta[i].transpose();

  std::ostringstream csv;
  csv << std::setprecision(17);
  csv << "k,max_abs_deviation,error_norm_sq,trace_bound,bound_holds,flagged_columns\n";
  double max_dev = 0.0;
  std::set<std::string> reported;
  bool bound_ok = true;
  std::string flagged_text;
  for (int k = 0;; ++k) {
    double dev = 0.0;
    for (int i = 0; i < s; ++i) {
      if (dims[i] > 0) dev = std::max(dev, (xi[i] - zeta[i]).lpNorm<Eigen::Infinity>());
    }
    max_dev = std::max(max_dev, dev);
    const TraceBound tb = error_trace_bound(sm, zeta);
    bound_ok = bound_ok && tb.holds;
    if (k == horizon) {
      csv << k << "," << dev << "," << tb.lhs << "," << tb.rhs << "," << (tb.holds ? 1 : 0) << ",\n";
      break;
    }
    const MarkovEquivalent me =
        schedule ? build_markov_equivalent(dims, closed_loop_gamma(model, k, local_gains(schedule->states[k], model)))
                 : markov_from_model(model, k);
    std::string flags;
    for (int j : me.flagged_columns) {
      if (!flags.empty()) flags += ";";
      flags += std::to_string(j);
      std::ostringstream line;
      line << "column " << j << " of the transition matrix sums to " << std::setprecision(6) << me.column_sums(j)
           << (me.column_sums(j) < 1.0 ? " (sub-stochastic)" : " (super-stochastic)");
      if (reported.insert(line.str()).second) out << "k = " << k << ": " << line.str() << "\n";
    }
    csv << k << "," << dev << "," << tb.lhs << "," << tb.rhs << "," << (tb.holds ? 1 : 0) << "," << flags << "\n";
    xi = mean_recursion_step(me, xi);
    zeta = direct_lis_step(me, zeta);
    sm = second_moment_step(me, sm);
  }

  const fs::path dir = prepare_out(config);
  write_text(dir / "markov.csv", csv.str());
  save_json(dir / "metadata.json", metadata(config, Json::array({"markov.csv"})));
  out << "max abs deviation over " << horizon << " steps: " << std::setprecision(3) << max_dev << "\n";
  out << "second-moment trace bound " << (bound_ok ? "held" : "failed") << " at every step\n";
  return kSuccess;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  try {
    const auto config = parse_command_line(argc, argv, out);
    if (!config) return kSuccess;
    if (config->threads < 0) {
      err << "error: threads must be nonnegative\n";
      return kUsageError;
    }
    if (config->threads > 0) omp_set_num_threads(config->threads);
    if (config->command == "simulate") return cmd_simulate(*config, out, err);
    if (config->command == "stability") return cmd_stability(*config, out, err);
    if (config->command == "steady") return cmd_steady(*config, out, err);
    if (config->command == "markov-verify") return cmd_markov_verify(*config, out, err);
    err << "error: unknown command '" << config->command << "'\n";
    return kUsageError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const Json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  }
}

}  // namespace lisest::cli
