// Acceptance run: one PASS/FAIL line per criterion, tolerances fixed below.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "obslab/dde.hpp"
#include "obslab/highgain.hpp"
#include "obslab/observer.hpp"
#include "obslab/reactor.hpp"
#include "obslab/scenario.hpp"
#include "obslab/signals.hpp"

using namespace obslab;
namespace fs = std::filesystem;

namespace tol {
constexpr double dde_cos = 1e-6;
constexpr double dde_steps = 1e-8;
constexpr double bound_margin = 1e-12;
constexpr double bound_limit = 1e-6;
constexpr double pde_rel = 1e-3;
constexpr double order_min = 1.8;
constexpr double lyap_slack = 1.05;
constexpr double noise_ratio = 0.2;
constexpr double closed_loop_drop = 1e-3;
constexpr double closed_loop_horizon = 10.0;
constexpr double lyap_residual = 1e-9;
constexpr double hg_ratio = 0.2;  // 10% of 2
constexpr double consistency_c = 100.0;
}  // namespace tol

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
  void need(bool ok, const std::string& what) {
    if (!ok) pass = false;
    detail += (detail.empty() ? "" : "; ") + what + (ok ? "" : " [x]");
  }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

Vec v1(double a) { return Vec::Constant(1, a); }

std::vector<double> post_only(const SimTrace& tr, const std::vector<double>& col) {
  std::vector<double> out;
  for (std::size_t i = 0; i < tr.size(); ++i)
    if (tr.kind[i] != RowKind::pre_reset) out.push_back(col[i]);
  return out;
}

// ---------------------------------------------------------------------------

Verdict c1_dde() {
  Verdict v;
  const double r = std::numbers::pi / 2, h = 1e-3;
  auto buf = dde::HistoryBuffer::sample(
      1, r, 0.0, h, [](double t) { return v1(std::cos(t)); },
      [](double t) { return v1(-std::sin(t)); });
  double err = 0.0;
  dde::IntegrateOptions opts;
  opts.on_step = [&](double t, const dde::HistoryBuffer& b) {
    err = std::max(err, std::abs(b.back_value()[0] - std::cos(t)));
  };
  dde::integrate_interval(
      [r](double t, const dde::HistoryView& x) { return v1(-x.at(t - r, 0)); }, buf, 0.0,
      10.0, h, opts);
  v.need(err < tol::dde_cos, "cos max error " + num(err));

  auto steps = dde::HistoryBuffer::constant(v1(1.0), 1.0, 0.0, 0.01);
  steps.set_retain_all(true);
  dde::integrate_interval(
      [](double t, const dde::HistoryView& x) { return v1(x.at(t - 1.0, 0)); }, steps, 0.0,
      2.0, 0.01);
  const double e1 = std::abs(steps.eval(1.0)[0] - 2.0), e2 = std::abs(steps.eval(2.0)[0] - 3.5);
  v.need(e1 < tol::dde_steps && e2 < tol::dde_steps,
         "x(1) err " + num(e1) + ", x(2) err " + num(e2));
  return v;
}

Verdict c2_bound() {
  Verdict v;
  bool dec = true, below = true;
  double worst_limit = 0.0;
  for (double g : {0.5, 1.0, 2.0})
    for (double L : {0.5, 1.0, 2.0}) {
      const double lim = 1.0 / (g * L);
      double prev = INFINITY;
      for (int i = 0; i < 50; ++i) {
        const double w = 0.05 + 0.05 * i;
        const double d = *observer::max_sampling_diameter(g, L, w);
        dec = dec && d < prev;
        below = below && d <= lim - tol::bound_margin;
        prev = d;
      }
      // Two Richardson levels at omega = eps, eps/2, eps/4.
      const double eps = 1e-3;
      const double d1 = *observer::max_sampling_diameter(g, L, eps);
      const double d2 = *observer::max_sampling_diameter(g, L, eps / 2);
      const double d4 = *observer::max_sampling_diameter(g, L, eps / 4);
      const double r1 = 2 * d2 - d1, r2 = 2 * d4 - d2;
      worst_limit = std::max(worst_limit, std::abs((4 * r2 - r1) / 3 - lim));
    }
  v.need(dec, "strictly decreasing on 50 points");
  v.need(below, "below 1/(gamma L) - 1e-12");
  v.need(worst_limit < tol::bound_limit, "omega->0 limit error " + num(worst_limit));
  return v;
}

Verdict c3_equivalence() {
  Verdict v;
  scenario::ScenarioConfig c;
  c.kind = scenario::Kind::equivalence_check;
  c.name = "equivalence";
  c.horizon = 10.0;
  c.input.present = true;
  c.input.spec = signals::SignalSpec::sinusoid(0.5, 2.0);
  const auto dir = fs::temp_directory_path() / "obslab_acceptance";
  scenario::run_scenario(c, (dir / "c3").string());
  const auto t = csv::read_table((dir / "c3" / "table.csv").string());
  const double rel = t.rows.back()[1];
  v.need(rel < tol::pde_rel, "rel error at M=400 " + num(rel));
  for (std::size_t i = 1; i < t.rows.size(); ++i)
    v.need(t.rows[i][2] >= tol::order_min,
           "order " + num(t.rows[i - 1][0]) + "->" + num(t.rows[i][0]) + " " + num(t.rows[i][2]));
  return v;
}

reactor::ReactorInit half_sine(const reactor::ReactorParams& p) {
  reactor::ReactorInit init{reactor::ProfileFunction::half_sine(1.0), 0.0};
  init.xbar0 = reactor::compatible_xbar(init.v0, p);
  return init;
}

Verdict c4_reactor() {
  using namespace reactor;
  Verdict v;
  const ReactorParams p;
  ReactorRun run;
  run.params = p;
  run.gains = design_reactor_gains(p);
  run.M = 400;
  run.horizon = 10.0;
  run.record_interval = 0.05;
  const double delta = default_sampling_diameter(p, run.gains, p.zeta / 8, run.M);
  const auto init = half_sine(p);
  const auto z0 = dde::HistoryBuffer::constant(Vec::Zero(2), p.delay(), 0.0, p.delay() / 1600);
  const auto tr = run_reactor_observer(init, z0, signals::uniform_schedule(delta, run.horizon), run);

  const auto t = post_only(tr, tr.t);
  for (const char* ch : {"err_xbar", "err_profile"}) {
    // Trailing sup over one delay; after t = r it must never increase.
    const auto e = post_only(tr, tr.aux.at(ch));
    int bad = 0;
    double prev = INFINITY;
    std::size_t lo = 0;
    for (std::size_t i = 0; i < e.size(); ++i) {
      while (t[lo] < t[i] - p.delay() * (1 + 1e-12)) ++lo;
      const double s = *std::max_element(e.begin() + lo, e.begin() + i + 1);
      if (t[i] > p.delay() && s > prev * (1 + 1e-9)) ++bad;
      prev = s;
    }
    v.need(bad == 0, std::string(ch) + " windowed sup rises " + std::to_string(bad) + "x");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < tr.size(); ++i)
    worst = std::max(worst, tr.V[i] / (std::exp(-p.zeta * tr.t[i] / 2) * tr.V[0]));
  v.need(worst <= tol::lyap_slack, "max V/(e^{-zeta t/2} V0) " + num(worst));
  const double rate = observer::estimate_decay_rate(tr, "V", p.delay());
  v.need(rate > 0.0, "fitted V rate " + num(rate));
  return v;
}

Verdict c5_noise_gain() {
  using namespace reactor;
  Verdict v;
  const ReactorParams p;
  ReactorRun run;
  run.params = p;
  run.gains = design_reactor_gains(p);
  run.M = 200;
  run.horizon = 8.0;
  run.record_interval = 0.05;
  run.envelope = false;
  const double delta = default_sampling_diameter(p, run.gains, p.zeta / 8, run.M);
  const auto sched = signals::uniform_schedule(delta, run.horizon);
  const auto init = half_sine(p);
  const auto z0 = dde::HistoryBuffer::constant(Vec::Zero(2), p.delay(), 0.0, p.delay() / 800);
  auto steady = [&](double eps) {
    run.xi = [eps](double) { return eps; };
    const auto tr = run_reactor_observer(init, z0, sched, run);
    // Mean error over the final delay interval.
    double s = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < tr.size(); ++i)
      if (tr.t[i] >= run.horizon - p.delay() && tr.kind[i] != RowKind::pre_reset) {
        s += tr.err_sup[i];
        ++n;
      }
    return s / n;
  };
  const double base = steady(0.0);
  const double e1 = steady(1e-2), e2 = steady(2e-2);
  const double ratio = (e2 - base) / (e1 - base);
  v.need(std::abs(ratio - 2.0) <= tol::noise_ratio,
         "steady err " + num(e1) + " vs " + num(e2) + " (noise-free " + num(base) +
             "), ratio " + num(ratio));
  v.need(std::abs(e2 / e1 - 2.0) <= tol::noise_ratio, "raw ratio " + num(e2 / e1));
  return v;
}

Verdict c6_closed_loop() {
  using namespace reactor;
  Verdict v;
  const ReactorParams p;
  ReactorRun run;
  run.params = p;
  run.gains = design_reactor_gains(p);
  run.M = 400;
  run.horizon = tol::closed_loop_horizon;
  run.record_interval = 0.05;
  run.envelope = false;
  run.Q_fb = p.Phi + 1.0;
  const double delta = default_sampling_diameter(p, run.gains, p.zeta / 8, run.M);
  const auto sched = signals::uniform_schedule(delta, run.horizon);
  const auto init = half_sine(p);
  const auto z0 = dde::HistoryBuffer::constant(Vec::Zero(2), p.delay(), 0.0, p.delay() / 1600);

  const auto tr = run_reactor_closed_loop(init, z0, sched, run);
  const auto s = post_only(tr, tr.aux.at("state_norm"));
  const double drop = s.back() / s.front();
  v.need(drop < tol::closed_loop_drop, "final/initial at t=10 " + num(drop));

  run.xi = [](double) { return 0.01; };
  const auto tn = run_reactor_closed_loop(init, z0, sched, run);
  const auto sn = post_only(tn, tn.aux.at("state_norm"));
  const auto tt = post_only(tn, tn.t);
  double first = 0.0, second = 0.0;
  for (std::size_t i = 0; i < sn.size(); ++i)
    (tt[i] <= run.horizon / 2 ? first : second) =
        std::max(tt[i] <= run.horizon / 2 ? first : second, sn[i]);
  v.need(std::isfinite(second) && second <= first,
         "constant noise: sup second half " + num(second) + " <= first half " + num(first));
  return v;
}

Verdict c7_design() {
  using namespace highgain;
  Verdict v;
  for (int n = 1; n <= 3; ++n) {
    const auto cp = companion_pair(n);
    const Mat Acl = cp.A + place_K(n, -1.0) * cp.c.transpose();
    const Mat P = solve_lyapunov_P(Acl, 1.0);
    const double res = lyapunov_residual(P, Acl, 1.0);
    Eigen::SelfAdjointEigenSolver<Mat> es(P);
    v.need(res <= tol::lyap_residual && es.eigenvalues().minCoeff() > 0.0,
           "n=" + std::to_string(n) + " residual " + num(res) + ", min eig " +
               num(es.eigenvalues().minCoeff()));
  }
  const auto d = design_highgain({});
  // Recompute Omega from P with an SVD norm and a direct eigen solve.
  Eigen::JacobiSVD<Mat> svd(d.P);
  const double normP = svd.singularValues()(0);
  Eigen::SelfAdjointEigenSolver<Mat> es(d.P);
  const double c1 = es.eigenvalues().minCoeff();
  const double phi = d.theta * d.mu / (2 * normP);
  const double Om = std::sqrt(3.0 * 8.0 * normP * normP * d.Lt * d.Lt * std::exp(phi * d.r) /
                              (d.theta * d.mu * c1 * phi));
  v.need(Om < 1.0 && std::abs(Om - d.Omega) < 1e-9,
         "theta " + num(d.theta) + ", Omega " + num(Om));
  DesignInputs zero;
  zero.Lt = 0.0;
  const double t0 = design_highgain(zero).theta;
  v.need(t0 == 1.0, "L~=0 gives theta " + num(t0));
  return v;
}

dde::HistoryBuffer const2(double a, double b, double r) {
  return dde::HistoryBuffer::constant(Vec(Eigen::Vector2d(a, b)), r, 0.0, r / 10);
}

Verdict c8_highgain() {
  using namespace highgain;
  Verdict v;
  const auto d = design_highgain({});
  const auto sys = example_system(d.r);
  const auto sched = signals::uniform_schedule(0.1 * *d.max_delta(), 2.0);
  HighGainRun run;
  run.record_interval = 0.01;
  const auto tr = run_highgain_observer(sys, d, sched, const2(1.0, -0.5, d.r),
                                        const2(0.0, 0.0, d.r), {}, run);
  // Fit from r until the error reaches 1e-9 of its peak.
  const auto t = post_only(tr, tr.t), e = post_only(tr, tr.err_sup);
  const double peak = *std::max_element(e.begin(), e.end());
  double t_end = t.back();
  for (std::size_t i = 0; i < e.size(); ++i)
    if (e[i] < 1e-9 * peak) {
      t_end = t[i];
      break;
    }
  const double rate = observer::estimate_decay_rate(t, e, d.r, t_end);
  v.need(rate >= d.sigma / 2, "rate " + num(rate) + " >= sigma/2 " + num(d.sigma / 2));

  auto steady = [&](double eps) {
    observer::Exogenous ex;
    ex.d = [eps](double) { return Vec(Eigen::Vector2d(0.0, eps)); };
    HighGainRun r2;
    r2.record_interval = 0.05;
    r2.envelope = false;
    return run_highgain_observer(sys, d, sched, const2(1.0, -0.5, d.r), const2(0.0, 0.0, d.r),
                                 ex, r2)
        .err_sup.back();
  };
  const double eps = 1e-3;
  const double e1 = steady(eps), e2 = steady(2 * eps);
  v.need(e1 <= d.Q3 * eps, "steady " + num(e1) + " <= Q3 eps " + num(d.Q3 * eps));
  v.need(std::abs(e2 / e1 - 2.0) <= tol::hg_ratio, "ratio " + num(e2 / e1));
  return v;
}

Verdict c9_consistency() {
  using namespace reactor;
  Verdict v;
  const ReactorParams p;
  const auto g = design_reactor_gains(p);
  const auto sys = reactor_delay_system(p);
  const auto reo = reactor_reo(p, g, p.zeta / 8);
  const auto init = half_sine(p);
  std::vector<double> gaps;
  for (double h : {0.0025, 0.00125}) {
    const auto x0 = lift_initial_condition(init.v0, init.xbar0, p, h).history;
    const auto z0 = dde::HistoryBuffer::constant(Vec::Zero(2), 1.0, 0.0, h);
    observer::RunOptions o;
    o.h = h;
    o.horizon = 2.0;
    o.record_interval = 0.05;
    const auto c = observer::run_continuous_reo(sys, reo, x0, z0, {}, o);
    const auto s = observer::run_sampled_observer(sys, reo, signals::uniform_schedule(h, 2.0),
                                                  x0, z0, {}, o);
    const auto a = post_only(c, c.err_sup), b = post_only(s, s.err_sup);
    double worst = a.size() == b.size() ? 0.0 : INFINITY;
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i)
      worst = std::max(worst, std::abs(a[i] - b[i]));
    gaps.push_back(worst);
    v.need(worst <= tol::consistency_c * h,
           "delta=h=" + num(h) + " gap " + num(worst) + " <= " + num(tol::consistency_c * h));
  }
  v.need(gaps[0] / gaps[1] > 1.6, "halving delta shrinks the gap by " + num(gaps[0] / gaps[1]));
  return v;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Verdict c10_determinism() {
  Verdict v;
  const fs::path root = fs::temp_directory_path() / "obslab_acceptance" / "c10";
  fs::remove_all(root);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(OBSLAB_SCENARIO_DIR))
    if (e.path().extension() == ".toml") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  int same = 0;
  for (const auto& f : files) {
    const auto cfg = scenario::load_config(f.string());
    for (const char* run : {"a", "b"}) scenario::run_scenario(cfg, (root / run / cfg.name).string());
    bool eq = true;
    for (const char* out : {"trace.csv", "aux.csv", "table.csv", "summary.txt", "params.echo"}) {
      const auto pa = root / "a" / cfg.name / out, pb = root / "b" / cfg.name / out;
      if (fs::exists(pa) != fs::exists(pb) || (fs::exists(pa) && slurp(pa) != slurp(pb))) eq = false;
    }
    same += eq;
    if (!eq) v.need(false, cfg.name + " differs");
  }
  v.need(!files.empty() && same == static_cast<int>(files.size()),
         std::to_string(same) + "/" + std::to_string(files.size()) + " scenarios byte-identical");
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"DDE integrator", c1_dde},
      {"sampling diameter bound", c2_bound},
      {"PDE / delay equivalence", c3_equivalence},
      {"reactor observer decay", c4_reactor},
      {"reactor noise gain", c5_noise_gain},
      {"closed loop", c6_closed_loop},
      {"high-gain design", c7_design},
      {"high-gain observer", c8_highgain},
      {"sampled / continuous consistency", c9_consistency},
      {"determinism", c10_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %2zu %s: %s (%.1fs)\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                v.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !v.pass;
  }
  return failed == 0 ? 0 : 1;
}
