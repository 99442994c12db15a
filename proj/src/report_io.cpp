#include "lisest/report_io.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

#include "lisest/checkpoint.hpp"

namespace lisest {

namespace {

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json doubles(const std::vector<double>& v) {
  Json out = Json::array();
  for (double d : v) out.push_back(finite_or_null(d));
  return out;
}

}  // namespace

Json to_json(const StabilityReport& r) {
  Json j;
  j["bounded"] = to_string(r.bounded);
  j["spectral_radius"] = r.spectral_radius ? finite_or_null(*r.spectral_radius) : Json(nullptr);
  j["method"] = r.method;
  j["diagnostics"] = r.diagnostics;
  j["condition1"] = r.condition1;
  j["iterations"] = r.iterations;
  j["theta"] = r.theta;
  Json gains = Json::array();
  for (const auto& g : r.witness_gains) gains.push_back(block_to_json(g));
  j["witness_gains"] = gains;
  if (r.lmi_x) {
    j["lmi_x"] = block_to_json(*r.lmi_x);
    Json ys = Json::array();
    for (const auto& y : r.lmi_y) ys.push_back(block_to_json(y));
    j["lmi_y"] = ys;
    j["lmi_min_eig"] = r.lmi_min_eig;
  }
  return j;
}

Json to_json(const ConditionReport& r) {
  Json j;
  j["c1_local_reachability"] = {{"passes", r.c1}, {"min_gramian_eig", finite_or_null(r.c1_min_eig)}};
  j["c2_noise_bounds"] = {{"passes", r.c2}, {"q_u", doubles(r.q_u)}, {"r_l", doubles(r.r_l)}, {"r_u", doubles(r.r_u)}};
  j["c3_observed_p_u"] = r.p_u ? doubles(*r.p_u) : Json(nullptr);
  j["c4_theta_bounds"] = {{"passes", r.c4}, {"theta_l", doubles(r.theta_l)}, {"theta_u", doubles(r.theta_u)}};
  return j;
}

Json to_json(const DistributedLmiRow& row) {
  Json x = Json::array();
  for (const auto& b : row.x_blocks) x.push_back(block_to_json(b));
  return {{"row", row.row}, {"feasible", row.feasible}, {"columns", row.columns},
          {"residual_radius", row.residual_radius}, {"x_blocks", x}};
}

Json to_json(const SweepReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"a", row.a}, {"bounded", row.bounded}, {"sup_trace", finite_or_null(row.sup_trace)},
                    {"reason", row.reason}});
  }
  return {{"rows", rows},
          {"first_unbounded", r.first_unbounded ? Json(*r.first_unbounded) : Json(nullptr)},
          {"prefix", r.prefix},
          {"precondition", r.precondition},
          {"diagnostics", r.diagnostics}};
}

Json to_json(const DmreProbe& p) {
  return {{"bounded", p.bounded}, {"sup_trace", finite_or_null(p.sup_trace)}, {"early_sup", p.early_sup},
          {"late_sup", p.late_sup}, {"steps", p.steps}, {"reason", p.reason}};
}

Json to_json(const DecayResult& d) {
  return {{"ratio", d.ratio}, {"verdict", to_string(d.verdict)}, {"initial", d.initial},
          {"final", finite_or_null(d.final_value)}, {"peak", finite_or_null(d.peak)},
          {"first_below_1e-6", d.first_below_1e6}};
}

Json to_json(const BootstrapResult& b) {
  return {{"mean_difference", b.mean_difference}, {"lower", b.lower}, {"confidence", b.confidence},
          {"replicates", b.replicates}, {"a_not_worse", b.a_not_worse}};
}

void print_summary(std::ostream& os, const StabilityReport& r) {
  os << "boundedness      " << to_string(r.bounded) << '\n';
  os << "method           " << r.method << '\n';
  os << "spectral radius  ";
  if (r.spectral_radius) {
    os << std::setprecision(6) << *r.spectral_radius << '\n';
  } else {
    os << "-\n";
  }
  if (r.lmi_x) os << "LMI min eig      " << std::setprecision(6) << r.lmi_min_eig << '\n';
  os << "local reach.     " << (r.condition1 ? "yes" : "no") << '\n';
  if (!r.diagnostics.empty()) os << "notes            " << r.diagnostics << '\n';
}

void print_summary(std::ostream& os, const ConditionReport& r) {
  os << "condition  passes  detail\n";
  os << "C1         " << std::setw(6) << (r.c1 ? "yes" : "no") << "  min Gramian eig " << r.c1_min_eig << '\n';
  double qu = 0, rl = INFINITY, ru = 0;
  for (std::size_t i = 0; i < r.q_u.size(); ++i) {
    qu = std::max(qu, r.q_u[i]);
    rl = std::min(rl, r.r_l[i]);
    ru = std::max(ru, r.r_u[i]);
  }
  os << "C2         " << std::setw(6) << (r.c2 ? "yes" : "no") << "  q_u " << qu << ", r_l " << rl << ", r_u "
     << ru << '\n';
  if (r.p_u) {
    double pu = 0;
    for (double v : *r.p_u) pu = std::max(pu, v);
    os << "C3         " << std::setw(6) << "obs." << "  observed p_u " << pu << '\n';
  }
  double tl = INFINITY, tu = 0;
  for (std::size_t i = 0; i < r.theta_l.size(); ++i) {
    tl = std::min(tl, r.theta_l[i]);
    tu = std::max(tu, r.theta_u[i]);
  }
  os << "C4         " << std::setw(6) << (r.c4 ? "yes" : "no") << "  theta in [" << tl << ", " << tu << "]\n";
}

void print_summary(std::ostream& os, const std::vector<DistributedLmiRow>& rows) {
  os << "row  feasible  residual radius  neighbors\n";
  for (const auto& r : rows) {
    os << std::setw(3) << r.row << "  " << std::setw(8) << (r.feasible ? "yes" : "no") << "  " << std::setw(15)
       << std::setprecision(6) << r.residual_radius << "  " << (r.columns.size() - 1) << '\n';
  }
}

void print_summary(std::ostream& os, const SweepReport& r) {
  os << "coupling a  bounded  sup trace\n";
  for (const auto& row : r.rows) {
    os << std::setw(10) << row.a << "  " << std::setw(7) << (row.bounded ? "yes" : "no") << "  " << row.sup_trace
       << '\n';
  }
  os << "first unbounded: ";
  if (r.first_unbounded) {
    os << *r.first_unbounded;
  } else {
    os << "none";
  }
  os << "; prefix: " << (r.prefix ? "yes" : "no") << "; detectability precondition: "
     << (r.precondition ? "yes" : "no") << '\n';
}

}  // namespace lisest
