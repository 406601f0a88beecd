#include "obslab/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

namespace obslab::scenario {

namespace fs = std::filesystem;
using config::ConfigError;
using config::Document;
using csv::format_double;

std::string to_string(Kind k) {
  switch (k) {
    case Kind::reactor_observer: return "reactor_observer";
    case Kind::reactor_closed_loop: return "reactor_closed_loop";
    case Kind::highgain_observer: return "highgain_observer";
    case Kind::bound_table: return "bound_table";
    case Kind::equivalence_check: return "equivalence_check";
  }
  return "?";
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Kind kind_from_string(const std::string& s, int line) {
  for (Kind k : {Kind::reactor_observer, Kind::reactor_closed_loop,
                 Kind::highgain_observer, Kind::bound_table, Kind::equivalence_check})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown scenario kind '" + s + "' for key 'kind'", line);
}

bool is_reactor(Kind k) {
  return k == Kind::reactor_observer || k == Kind::reactor_closed_loop ||
         k == Kind::equivalence_check;
}

// Positivity helpers that cite the key.
double positive(Document& d, const std::string& sec, const std::string& key, double fb) {
  const double v = d.number(sec, key, fb);
  if (!(v > 0.0) || !std::isfinite(v))
    throw ConfigError("key '" + config::qualified(sec, key) + "' must be > 0",
                      d.line_of(sec, key));
  return v;
}

double nonnegative(Document& d, const std::string& sec, const std::string& key, double fb) {
  const double v = d.number(sec, key, fb);
  if (!(v >= 0.0) || !std::isfinite(v))
    throw ConfigError("key '" + config::qualified(sec, key) + "' must be >= 0",
                      d.line_of(sec, key));
  return v;
}

SignalConfig parse_signal(Document& d, const std::string& sec, std::uint64_t seed) {
  SignalConfig s;
  s.present = d.has_section(sec);
  if (!s.present) return s;
  const std::string kind = d.string(sec, "kind", "zero");
  signals::SignalKind k;
  try {
    k = signals::signal_kind_from_string(kind);
  } catch (const std::invalid_argument&) {
    throw ConfigError("key '" + sec + ".kind' has unknown signal kind '" + kind + "'",
                      d.line_of(sec, "kind"));
  }
  s.spec.kind = k;
  s.spec.amplitude = d.number(sec, "amplitude", 0.0);
  s.spec.frequency = d.number(sec, "frequency", 0.0);
  s.spec.phase = d.number(sec, "phase", 0.0);
  const long sd = d.integer(sec, "seed", -1);
  s.spec.seed = sd >= 0 ? static_cast<std::uint64_t>(sd) : seed;
  s.direction = d.array(sec, "direction", {});
  if (k == signals::SignalKind::zero) s.present = false;
  return s;
}

}  // namespace

ScenarioConfig parse_config(Document& d, std::optional<std::uint64_t> seed_override) {
  ScenarioConfig c;
  const std::string kind = d.string("", "kind", "");
  if (kind.empty()) throw ConfigError("missing required key 'kind'", d.line_of("", "kind"));
  c.kind = kind_from_string(kind, d.line_of("", "kind"));
  c.name = d.string("", "name", to_string(c.kind));
  const long seed = d.integer("", "seed", 1);
  if (seed < 0) throw ConfigError("key 'seed' must be >= 0", d.line_of("", "seed"));
  c.seed = seed_override.value_or(static_cast<std::uint64_t>(seed));

  if (c.kind == Kind::highgain_observer) c.horizon = 2.0;
  c.horizon = positive(d, "", "horizon", c.horizon);

  // [schedule]
  c.schedule.type = d.string("schedule", "type", "uniform");
  if (c.schedule.type != "uniform" && c.schedule.type != "jittered")
    throw ConfigError("key 'schedule.type' must be \"uniform\" or \"jittered\"",
                      d.line_of("schedule", "type"));
  if (d.has("schedule", "delta")) c.schedule.delta = positive(d, "schedule", "delta", 0.0);
  c.schedule.fraction = positive(d, "schedule", "fraction", 0.1);
  if (c.schedule.fraction >= 1.0)
    throw ConfigError("key 'schedule.fraction' must be < 1", d.line_of("schedule", "fraction"));
  const long sseed = d.integer("schedule", "seed", -1);
  if (sseed >= 0) c.schedule.seed = static_cast<std::uint64_t>(sseed);

  c.noise = parse_signal(d, "noise", c.seed + 1);
  c.disturbance = parse_signal(d, "disturbance", c.seed + 2);
  c.input = parse_signal(d, "input", c.seed + 3);

  // [grid]
  if (d.has("grid", "h")) c.h = positive(d, "grid", "h", 0.0);
  c.record_interval = nonnegative(d, "grid", "record_interval",
                                  c.kind == Kind::highgain_observer ? 0.01 : 0.05);
  const long M = d.integer("grid", "M", c.kind == Kind::equivalence_check ? 400 : 400);
  if (M < 1) throw ConfigError("key 'grid.M' must be >= 1", d.line_of("grid", "M"));
  c.M = static_cast<int>(M);

  if (is_reactor(c.kind)) {
    auto& p = c.reactor;
    p.mu = positive(d, "reactor", "mu", 1.0);
    p.zeta = positive(d, "reactor", "zeta", 1.0);
    p.c = positive(d, "reactor", "c", 1.0);
    p.Phi = positive(d, "reactor", "Phi", 1.0);
    if (d.has("reactor", "sigma")) {
      c.sigma = positive(d, "reactor", "sigma", 0.0);
      if (!(c.sigma < p.zeta / 4))
        throw ConfigError("key 'reactor.sigma' must be < zeta/4", d.line_of("reactor", "sigma"));
    }
    if (d.has("reactor", "Q_fb")) {
      c.Q_fb = positive(d, "reactor", "Q_fb", 0.0);
      if (!(p.mu + 1.0 + c.Q_fb > p.Phi))
        throw ConfigError("key 'reactor.Q_fb' must satisfy mu + 1 + Q_fb > Phi",
                          d.line_of("reactor", "Q_fb"));
    }
    c.v0_amplitude = d.number("reactor", "v0_amplitude", 1.0);
    c.observer_init = d.string("reactor", "observer_init", "zero");
    if (c.observer_init != "zero" && c.observer_init != "matched")
      throw ConfigError("key 'reactor.observer_init' must be \"zero\" or \"matched\"",
                        d.line_of("reactor", "observer_init"));
    c.envelope = d.boolean("reactor", "envelope", true);
    if (c.disturbance.present)
      throw ConfigError("section [disturbance] is not supported for reactor scenarios",
                        d.line_of("disturbance", "kind"));
    if (c.kind == Kind::reactor_closed_loop && c.input.present)
      throw ConfigError("section [input] conflicts with the feedback in reactor_closed_loop",
                        d.line_of("input", "kind"));
  }

  if (c.kind == Kind::highgain_observer) {
    const std::string sys = d.string("highgain", "system", "example");
    if (sys != "example")
      throw ConfigError("key 'highgain.system' must be \"example\"", d.line_of("highgain", "system"));
    auto& in = c.design;
    in.n = static_cast<int>(d.integer("highgain", "n", 2));
    if (in.n != 2)
      throw ConfigError("key 'highgain.n' must be 2 for the example system",
                        d.line_of("highgain", "n"));
    in.pole = d.number("highgain", "pole", -1.0);
    if (!(in.pole < 0.0))
      throw ConfigError("key 'highgain.pole' must be < 0", d.line_of("highgain", "pole"));
    in.mu = positive(d, "highgain", "mu", 1.0);
    in.Lt = nonnegative(d, "highgain", "L", 0.1);
    in.r = positive(d, "highgain", "r", 0.1);
    in.search_max = positive(d, "highgain", "search_max", 1e6);
    if (d.has("highgain", "theta")) {
      in.theta = d.number("highgain", "theta");
      if (!(*in.theta >= 1.0))
        throw ConfigError("key 'highgain.theta' must be >= 1", d.line_of("highgain", "theta"));
    }
    c.x0 = d.array("highgain", "x0", c.x0);
    c.z0 = d.array("highgain", "z0", c.z0);
    if (c.x0.size() != 2)
      throw ConfigError("key 'highgain.x0' must have 2 entries", d.line_of("highgain", "x0"));
    if (c.z0.size() != 2)
      throw ConfigError("key 'highgain.z0' must have 2 entries", d.line_of("highgain", "z0"));
    c.envelope = d.boolean("highgain", "envelope", true);
    if (c.disturbance.present && !c.disturbance.direction.empty() &&
        c.disturbance.direction.size() != 2)
      throw ConfigError("key 'disturbance.direction' must have 2 entries",
                        d.line_of("disturbance", "direction"));
  }

  if (c.kind == Kind::bound_table) {
    c.gamma = positive(d, "bound_table", "gamma", 1.0);
    c.L = positive(d, "bound_table", "L", 1.0);
    c.omegas = d.array("bound_table", "omega", {});
    if (c.omegas.empty()) {
      const double lo = positive(d, "bound_table", "omega_min", 0.1);
      const double hi = positive(d, "bound_table", "omega_max", 2.0);
      const long pts = d.integer("bound_table", "points", 20);
      if (pts < 2)
        throw ConfigError("key 'bound_table.points' must be >= 2", d.line_of("bound_table", "points"));
      if (!(hi > lo))
        throw ConfigError("key 'bound_table.omega_max' must exceed omega_min",
                          d.line_of("bound_table", "omega_max"));
      for (long i = 0; i < pts; ++i) c.omegas.push_back(lo + (hi - lo) * i / (pts - 1));
    }
    for (double w : c.omegas)
      if (!(w > 0.0))
        throw ConfigError("key 'bound_table.omega' entries must be > 0",
                          d.line_of("bound_table", "omega"));
  }

  if (c.kind == Kind::equivalence_check) {
    c.M_list = d.array("equivalence", "M", c.M_list);
    if (c.M_list.size() < 2)
      throw ConfigError("key 'equivalence.M' needs at least two grids", d.line_of("equivalence", "M"));
    for (double m : c.M_list)
      if (!(m >= 1.0) || m != std::floor(m))
        throw ConfigError("key 'equivalence.M' entries must be positive integers",
                          d.line_of("equivalence", "M"));
  }

  d.reject_unconsumed();
  return c;
}

ScenarioConfig load_config(const std::string& path,
                           std::optional<std::uint64_t> seed_override) {
  Document d = Document::load(path);
  return parse_config(d, seed_override);
}

// ---------------------------------------------------------------------------
// Checks

namespace {

std::string fmt(double v) { return format_double(v); }

std::vector<double> post_rows(const SimTrace& tr, const std::vector<double>& col) {
  std::vector<double> out;
  for (std::size_t i = 0; i < tr.size(); ++i)
    if (tr.kind[i] != RowKind::pre_reset) out.push_back(col[i]);
  return out;
}

std::vector<double> trailing_sup(const std::vector<double>& t, const std::vector<double>& v,
                                 double window) {
  std::vector<double> out(v.size());
  std::size_t lo = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    while (t[lo] < t[i] - window * (1 + 1e-12)) ++lo;
    double m = 0.0;
    for (std::size_t j = lo; j <= i; ++j) m = std::max(m, v[j]);
    out[i] = m;
  }
  return out;
}

Check envelope_check(const SimTrace& tr) {
  Check c{"envelope_dominance", true, ""};
  if (std::none_of(tr.envelope.begin(), tr.envelope.end(),
                   [](double e) { return std::isfinite(e); })) {
    c.detail = "no envelope (delta not certified)";
    return c;
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const double ratio = tr.err_sup[i] / tr.envelope[i];
    worst = std::max(worst, ratio);
    if (!(tr.err_sup[i] <= 1.05 * tr.envelope[i])) c.pass = false;
  }
  c.detail = "max err_sup/envelope = " + fmt(worst);
  return c;
}

}  // namespace

std::vector<Check> trace_checks(const SimTrace& tr, const CheckContext& ctx) {
  std::vector<Check> out;
  Check finite{"finite", true, ""};
  for (std::size_t i = 0; i < tr.size(); ++i)
    if (!std::isfinite(tr.err_sup[i]) || (i < tr.V.size() && std::isinf(tr.V[i])))
      finite.pass = false;
  out.push_back(finite);

  const auto t = post_rows(tr, tr.t);
  switch (ctx.kind) {
    case Kind::reactor_observer: {
      out.push_back(envelope_check(tr));
      if (ctx.noise_sup == 0.0) {
        Check v{"lyapunov_bound", true, ""};
        double worst = 0.0;
        for (std::size_t i = 0; i < tr.size(); ++i) {
          const double b = 1.05 * std::exp(-ctx.zeta * tr.t[i] / 2) * tr.V[0];
          worst = std::max(worst, tr.V[i] / b);
          if (!(tr.V[i] <= b)) v.pass = false;
        }
        v.detail = "max V/(1.05 exp(-zeta t/2) V(0)) = " + fmt(worst);
        out.push_back(v);

        Check rate{"decay_rate_positive", false, ""};
        try {
          const double r = observer::estimate_decay_rate(tr, "V", ctx.delay);
          rate.pass = r > 0.0;
          rate.detail = "fitted V rate = " + fmt(r);
        } catch (const std::exception& e) {
          rate.detail = e.what();
        }
        out.push_back(rate);

        for (const char* ch : {"err_xbar", "err_profile"}) {
          Check m{std::string("monotone_") + ch, true, ""};
          if (!tr.aux.count(ch)) {
            m.pass = false;
            m.detail = "channel missing";
          } else {
            const auto sup = trailing_sup(t, post_rows(tr, tr.aux.at(ch)), ctx.delay);
            std::size_t bad = 0;
            for (std::size_t i = 1; i < sup.size(); ++i)
              if (t[i - 1] >= ctx.delay && sup[i] > sup[i - 1] * (1 + 1e-9) + 1e-300) ++bad;
            m.pass = bad == 0;
            m.detail = "trailing sup over one delay; increases after t = r: " +
                       std::to_string(bad);
          }
          out.push_back(m);
        }
      }
      break;
    }
    case Kind::reactor_closed_loop: {
      if (!tr.aux.count("state_norm")) {
        out.push_back({"state_norm_present", false, "channel missing"});
        break;
      }
      const auto s = post_rows(tr, tr.aux.at("state_norm"));
      if (ctx.noise_sup == 0.0) {
        const double ratio = s.back() / s.front();
        out.push_back({"state_decay", ratio < 1e-3,
                       "final/initial (|xbar| + |v|_inf) = " + fmt(ratio)});
      } else {
        double first = 0.0, second = 0.0;
        const double mid = t.back() / 2;
        for (std::size_t i = 0; i < s.size(); ++i)
          (t[i] <= mid ? first : second) = std::max(t[i] <= mid ? first : second, s[i]);
        out.push_back({"bounded_under_noise", std::isfinite(second) && second <= first,
                       "sup second half = " + fmt(second) + ", sup first half = " + fmt(first)});
      }
      break;
    }
    case Kind::highgain_observer: {
      out.push_back(envelope_check(tr));
      if (ctx.noise_sup == 0.0 && ctx.disturbance_sup == 0.0) {
        const auto e = post_rows(tr, tr.err_sup);
        const double peak = *std::max_element(e.begin(), e.end());
        double t_end = t.back();
        for (std::size_t i = 0; i < e.size(); ++i)
          if (e[i] < 1e-9 * peak) {
            t_end = t[i];
            break;
          }
        Check rate{"decay_rate", false, ""};
        try {
          const double r = observer::estimate_decay_rate(t, e, ctx.delay, t_end);
          rate.pass = r >= ctx.sigma / 2;
          rate.detail = "fitted err_sup rate = " + fmt(r) + " on [r, " + fmt(t_end) +
                        "], sigma/2 = " + fmt(ctx.sigma / 2);
        } catch (const std::exception& ex) {
          rate.detail = ex.what();
        }
        out.push_back(rate);
      }
      if (ctx.noise_sup == 0.0 && ctx.disturbance_constant && ctx.disturbance_sup > 0.0) {
        const double bound = ctx.Q3 * ctx.disturbance_sup;
        out.push_back({"disturbance_gain", tr.err_sup.back() <= bound,
                       "steady err_sup = " + fmt(tr.err_sup.back()) + ", Q3 |d| = " + fmt(bound)});
      }
      break;
    }
    default:
      break;
  }
  return out;
}

std::vector<Check> table_checks(const csv::Table& table, const CheckContext& ctx) {
  std::vector<Check> out;
  if (ctx.kind == Kind::bound_table) {
    Check dec{"strictly_decreasing", true, ""}, lim{"below_limit", true, ""};
    const double limit = 1.0 / (ctx.gamma * ctx.L);
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      const double d = table.rows[i][1];
      if (i > 0 && !(d < table.rows[i - 1][1])) dec.pass = false;
      if (!(d <= limit - 1e-12)) lim.pass = false;
    }
    lim.detail = "1/(gamma L) = " + fmt(limit);
    out.push_back(dec);
    out.push_back(lim);
  } else if (ctx.kind == Kind::equivalence_check) {
    const auto& last = table.rows.back();
    out.push_back({"relative_error", last[1] < 1e-3,
                   "at M = " + fmt(last[0]) + ": " + fmt(last[1])});
    Check ord{"convergence_order", true, ""};
    for (std::size_t i = 1; i < table.rows.size(); ++i) {
      const double o = table.rows[i][2];
      if (!(o >= 1.8)) ord.pass = false;
      ord.detail += (i > 1 ? ", " : "") + fmt(o);
    }
    out.push_back(ord);
  }
  return out;
}

bool Outcome::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

// ---------------------------------------------------------------------------
// Running

namespace {

std::function<double(double)> scalar_signal(const SignalConfig& s) {
  if (!s.present) return {};
  const auto spec = s.spec;
  return [spec](double t) { return spec(t); };
}

dde::Input vector_signal(const SignalConfig& s, int dim) {
  if (!s.present) return {};
  Vec dir = Vec::Zero(dim);
  if (s.direction.empty()) {
    dir[0] = 1.0;
  } else {
    for (int i = 0; i < dim; ++i) dir[i] = s.direction[i];
  }
  const auto spec = s.spec;
  return [spec, dir](double t) { return Vec(spec(t) * dir); };
}

signals::SamplingSchedule make_schedule(const ScenarioConfig& c, double delta) {
  if (c.schedule.type == "jittered")
    return signals::jittered_schedule(delta, c.horizon, c.schedule.seed.value_or(c.seed));
  return signals::uniform_schedule(delta, c.horizon);
}

// Largest delta <= target that divides `cell` into whole intervals.
double fit_to_cell(double target, double cell) {
  return cell / std::ceil(cell / target - 1e-9);
}

void add(std::vector<std::pair<std::string, std::string>>& v, const std::string& k, double x) {
  v.emplace_back(k, fmt(x));
}
void add(std::vector<std::pair<std::string, std::string>>& v, const std::string& k,
         const std::string& x) {
  v.emplace_back(k, x);
}

void echo_signal(Outcome& o, const std::string& name, const SignalConfig& s) {
  add(o.echo, name + ".kind", s.present ? signals::to_string(s.spec.kind) : "zero");
  if (!s.present) return;
  add(o.echo, name + ".amplitude", s.spec.amplitude);
  add(o.echo, name + ".frequency", s.spec.frequency);
  add(o.echo, name + ".phase", s.spec.phase);
  add(o.echo, name + ".seed", std::to_string(s.spec.seed));
  if (!s.direction.empty()) {
    std::string d;
    for (double x : s.direction) d += (d.empty() ? "" : ", ") + fmt(x);
    add(o.echo, name + ".direction", "[" + d + "]");
  }
}

void write_pairs(const std::vector<std::pair<std::string, std::string>>& kv,
                 const std::string& path, const std::vector<Check>* checks = nullptr) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  for (const auto& [k, v] : kv) f << k << " = " << v << '\n';
  if (checks)
    for (const auto& c : *checks)
      f << "check " << c.name << ' ' << (c.pass ? "PASS" : "FAIL")
        << (c.detail.empty() ? "" : " # " + c.detail) << '\n';
}

void echo_context(Outcome& o) {
  const auto& c = o.context;
  add(o.summary, "context.kind", to_string(c.kind));
  add(o.summary, "context.delay", c.delay);
  add(o.summary, "context.zeta", c.zeta);
  add(o.summary, "context.sigma", c.sigma);
  add(o.summary, "context.Q3", c.Q3);
  add(o.summary, "context.noise_sup", c.noise_sup);
  add(o.summary, "context.disturbance_sup", c.disturbance_sup);
  add(o.summary, "context.disturbance_constant", c.disturbance_constant ? "true" : "false");
  add(o.summary, "context.gamma", c.gamma);
  add(o.summary, "context.L", c.L);
}

void run_reactor(const ScenarioConfig& c, const fs::path& dir, Outcome& o) {
  using namespace reactor;
  const auto& p = c.reactor;
  const auto g = design_reactor_gains(p);
  const double sigma = c.sigma > 0.0 ? c.sigma : p.zeta / 8;
  const auto rc = reactor_reo_constants(p, g, sigma);
  const double bound = *observer::max_sampling_diameter(rc.gamma, rc.L, rc.sigma);
  const double H = p.delay() / c.M;
  const double delta = c.schedule.delta > 0.0 ? c.schedule.delta
                                              : fit_to_cell(c.schedule.fraction * bound, H);
  const auto sched = make_schedule(c, delta);

  ReactorInit init{ProfileFunction::half_sine(c.v0_amplitude), 0.0};
  init.xbar0 = compatible_xbar(init.v0, p);
  const double spacing = H / 4;
  const dde::HistoryBuffer z0 = c.observer_init == "matched"
                               ? matched_observer_history(init, p, spacing)
                               : dde::HistoryBuffer::constant(Vec::Zero(2), p.delay(), 0.0, spacing);
  ReactorRun run;
  run.params = p;
  run.gains = g;
  run.M = c.M;
  run.h = c.h;
  run.horizon = c.horizon;
  run.record_interval = c.record_interval;
  run.u = scalar_signal(c.input);
  run.xi = scalar_signal(c.noise);
  run.sigma = sigma;
  run.envelope = c.envelope;
  run.Q_fb = c.Q_fb > 0.0 ? c.Q_fb : p.Phi + 1.0;

  add(o.echo, "reactor.mu", p.mu);
  add(o.echo, "reactor.zeta", p.zeta);
  add(o.echo, "reactor.c", p.c);
  add(o.echo, "reactor.r", p.delay());
  add(o.echo, "reactor.Phi", p.Phi);
  add(o.echo, "reactor.theta", "tanh");
  add(o.echo, "reactor.v0", "v0_amplitude * sin(pi z / 2)");
  add(o.echo, "reactor.v0_amplitude", c.v0_amplitude);
  add(o.echo, "reactor.xbar0", init.xbar0);
  add(o.echo, "reactor.observer_init", c.observer_init);
  add(o.echo, "gains.R", g.R);
  add(o.echo, "gains.b", g.b);
  add(o.echo, "gains.Q", g.Q);
  add(o.echo, "gains.k1", g.k1);
  add(o.echo, "gains.k2", g.k2);
  add(o.echo, "reo.sigma", rc.sigma);
  add(o.echo, "reo.K1", rc.K1);
  add(o.echo, "reo.K2", rc.K2);
  add(o.echo, "reo.a_coef", rc.a_coef);
  add(o.echo, "reo.gamma", rc.gamma);
  add(o.echo, "reo.L", rc.L);
  add(o.echo, "delta.bound_at_sigma", bound);
  add(o.echo, "delta.used", delta);
  add(o.echo, "schedule.type", c.schedule.type);
  if (c.schedule.type == "jittered")
    add(o.echo, "schedule.seed", std::to_string(c.schedule.seed.value_or(c.seed)));
  if (const auto om = observer::certified_rate(rc.gamma, rc.L, rc.sigma, delta)) {
    add(o.echo, "envelope.omega", *om);
    try {
      const auto ep = observer::EnvelopeParams::make(*om, delta, rc.L, rc.gamma);
      add(o.echo, "envelope.B", ep.B);
      add(o.echo, "envelope.amplification", ep.amplification);
    } catch (const std::domain_error&) {
      add(o.echo, "envelope.B", ">= 1");
    }
  } else {
    add(o.echo, "envelope.omega", "none (delta exceeds the bound)");
  }
  add(o.echo, "grid.M", std::to_string(c.M));
  add(o.echo, "grid.H", H);
  add(o.echo, "grid.h", c.h > 0.0 ? c.h : std::min(H, sched.min_gap()));
  add(o.echo, "grid.record_interval", c.record_interval);
  add(o.echo, "horizon", c.horizon);
  if (c.kind == Kind::reactor_closed_loop) add(o.echo, "feedback.Q_fb", run.Q_fb);
  echo_signal(o, "noise", c.noise);
  if (c.kind == Kind::reactor_observer) echo_signal(o, "input", c.input);

  const SimTrace tr = c.kind == Kind::reactor_closed_loop
                          ? run_reactor_closed_loop(init, z0, sched, run)
                          : run_reactor_observer(init, z0, sched, run);
  csv::write_trace(tr, (dir / "trace.csv").string());
  csv::write_aux(tr, (dir / "aux.csv").string());

  o.context.kind = c.kind;
  o.context.delay = p.delay();
  o.context.zeta = p.zeta;
  o.context.sigma = sigma;
  o.context.noise_sup = c.noise.present ? c.noise.spec.bound() : 0.0;
  o.checks = trace_checks(tr, o.context);
  add(o.summary, "rows", std::to_string(tr.size()));
  add(o.summary, "final_err_sup", tr.err_sup.back());
  if (!tr.envelope.empty()) add(o.summary, "final_envelope", tr.envelope.back());
  try {
    add(o.summary, "fitted_rate_V", observer::estimate_decay_rate(tr, "V", p.delay()));
  } catch (const std::exception&) {
    add(o.summary, "fitted_rate_V", "n/a");
  }
}

dde::HistoryBuffer const_history(const std::vector<double>& v, double r) {
  Vec x(static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) x[static_cast<int>(i)] = v[i];
  return dde::HistoryBuffer::constant(x, r, 0.0, r / 10);
}

void run_highgain(const ScenarioConfig& c, const fs::path& dir, Outcome& o) {
  using namespace highgain;
  const auto d = design_highgain(c.design);
  const auto sys = example_system(c.design.r);
  const double bound = *d.max_delta();
  const double delta = c.schedule.delta > 0.0 ? c.schedule.delta : c.schedule.fraction * bound;
  const auto sched = make_schedule(c, delta);
  observer::Exogenous ex;
  ex.u = vector_signal(c.input, 1);
  ex.d = vector_signal(c.disturbance, 2);
  ex.xi = vector_signal(c.noise, 1);
  HighGainRun run;
  run.h = c.h;
  run.horizon = c.horizon;
  run.record_interval = c.record_interval;
  run.envelope = c.envelope;

  add(o.echo, "highgain.system", "example: f1 = 0.05 x1(t-r), f2 = 0.05 sat(x2) + u");
  add(o.echo, "highgain.n", std::to_string(d.n));
  add(o.echo, "highgain.pole", d.pole);
  add(o.echo, "highgain.mu", d.mu);
  add(o.echo, "highgain.L", d.Lt);
  add(o.echo, "highgain.r", d.r);
  for (int i = 0; i < d.n; ++i) add(o.echo, "design.K[" + std::to_string(i) + "]", d.K[i]);
  for (int i = 0; i < d.n; ++i)
    for (int j = 0; j < d.n; ++j)
      add(o.echo, "design.P[" + std::to_string(i) + "][" + std::to_string(j) + "]", d.P(i, j));
  add(o.echo, "design.normP", d.normP);
  add(o.echo, "design.c1", d.c1);
  add(o.echo, "design.theta", d.theta);
  add(o.echo, "design.Omega", d.Omega);
  add(o.echo, "design.phi", d.phi);
  add(o.echo, "design.sigma", d.sigma);
  add(o.echo, "design.Q1", d.Q1);
  add(o.echo, "design.Q2", d.Q2);
  add(o.echo, "design.Q3", d.Q3);
  add(o.echo, "design.output_lipschitz", d.L());
  add(o.echo, "delta.bound_at_sigma", bound);
  add(o.echo, "delta.used", delta);
  add(o.echo, "schedule.type", c.schedule.type);
  if (c.schedule.type == "jittered")
    add(o.echo, "schedule.seed", std::to_string(c.schedule.seed.value_or(c.seed)));
  if (const auto om = observer::certified_rate(d.gamma(), d.L(), d.sigma, delta))
    add(o.echo, "envelope.omega", *om);
  else
    add(o.echo, "envelope.omega", "none (delta exceeds the bound)");
  add(o.echo, "grid.h", c.h > 0.0 ? c.h : std::min(sched.min_gap(), d.r / 10));
  add(o.echo, "grid.record_interval", c.record_interval);
  add(o.echo, "horizon", c.horizon);
  add(o.echo, "x0", "[" + fmt(c.x0[0]) + ", " + fmt(c.x0[1]) + "]");
  add(o.echo, "z0", "[" + fmt(c.z0[0]) + ", " + fmt(c.z0[1]) + "]");
  echo_signal(o, "noise", c.noise);
  echo_signal(o, "disturbance", c.disturbance);
  echo_signal(o, "input", c.input);

  const auto tr = run_highgain_observer(sys, d, sched, const_history(c.x0, d.r),
                                        const_history(c.z0, d.r), ex, run);
  csv::write_trace(tr, (dir / "trace.csv").string());

  o.context.kind = c.kind;
  o.context.delay = d.r;
  o.context.sigma = d.sigma;
  o.context.Q3 = d.Q3;
  o.context.noise_sup = c.noise.present ? c.noise.spec.bound() : 0.0;
  double dnorm = 1.0;
  if (!c.disturbance.direction.empty())
    dnorm = std::hypot(c.disturbance.direction[0], c.disturbance.direction[1]);
  o.context.disturbance_sup = c.disturbance.present ? c.disturbance.spec.bound() * dnorm : 0.0;
  o.context.disturbance_constant =
      c.disturbance.present && c.disturbance.spec.kind == signals::SignalKind::constant;
  o.checks = trace_checks(tr, o.context);
  add(o.summary, "rows", std::to_string(tr.size()));
  add(o.summary, "final_err_sup", tr.err_sup.back());
  if (!tr.envelope.empty()) add(o.summary, "final_envelope", tr.envelope.back());
}

void run_bound_table(const ScenarioConfig& c, const fs::path& dir, Outcome& o) {
  csv::Table t{{"omega", "delta_bound"}, {}};
  for (double w : c.omegas) t.rows.push_back({w, *observer::max_sampling_diameter(c.gamma, c.L, w)});
  csv::write_table(t, (dir / "table.csv").string());
  add(o.echo, "bound_table.gamma", c.gamma);
  add(o.echo, "bound_table.L", c.L);
  add(o.echo, "bound_table.points", std::to_string(c.omegas.size()));
  add(o.echo, "bound_table.limit", 1.0 / (c.gamma * c.L));
  o.context.kind = c.kind;
  o.context.gamma = c.gamma;
  o.context.L = c.L;
  o.checks = table_checks(t, o.context);
  add(o.summary, "rows", std::to_string(t.rows.size()));
}

void run_equivalence(const ScenarioConfig& c, const fs::path& dir, Outcome& o) {
  using namespace reactor;
  const auto& p = c.reactor;
  ReactorInit init{ProfileFunction::half_sine(c.v0_amplitude), 0.0};
  init.xbar0 = compatible_xbar(init.v0, p);
  const auto u = scalar_signal(c.input);
  csv::Table t{{"M", "rel_error", "order"}, {}};
  double prev = kNaN;
  for (double Md : c.M_list) {
    const int M = static_cast<int>(Md);
    const auto lifted = lift_initial_condition(init.v0, init.xbar0, p, p.delay() / M);
    dde::HistoryBuffer pre(1, p.delay());
    for (std::size_t i = 0; i < lifted.history.size(); ++i)
      pre.append(lifted.history.time(i), Vec::Constant(1, lifted.history.value_ptr(i)[1]),
                 Vec::Constant(1, lifted.history.slope_left(i)[1]));
    PdeOptions opts;
    opts.xbar_prehistory = &pre;
    const auto tr = solve_pde_reactor(ReactorField::sample(init.v0, init.xbar0, M), u, p,
                                      c.horizon, p.delay() / M, M, opts);
    double worst = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < tr.t.size(); ++i) {
      const double id = delay_output_identity(tr.xbar_history, tr.t[i], p);
      worst = std::max(worst, std::abs(tr.outlet[i] - id));
      scale = std::max(scale, std::abs(tr.outlet[i]));
    }
    const double rel = worst / scale;
    const double order = std::isnan(prev) ? kNaN : std::log(prev / rel) /
                                                        std::log(Md / t.rows.back()[0]);
    t.rows.push_back({Md, rel, order});
    prev = rel;
  }
  csv::write_table(t, (dir / "table.csv").string());
  add(o.echo, "reactor.mu", p.mu);
  add(o.echo, "reactor.zeta", p.zeta);
  add(o.echo, "reactor.c", p.c);
  add(o.echo, "reactor.Phi", p.Phi);
  add(o.echo, "reactor.v0_amplitude", c.v0_amplitude);
  add(o.echo, "reactor.xbar0", init.xbar0);
  add(o.echo, "horizon", c.horizon);
  echo_signal(o, "input", c.input);
  o.context.kind = c.kind;
  o.context.delay = p.delay();
  o.context.zeta = p.zeta;
  o.checks = table_checks(t, o.context);
  add(o.summary, "rows", std::to_string(t.rows.size()));
}

}  // namespace

Outcome run_scenario(const ScenarioConfig& c, const std::string& out_dir) {
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  Outcome o;
  add(o.echo, "kind", to_string(c.kind));
  add(o.echo, "name", c.name);
  add(o.echo, "seed", std::to_string(c.seed));
  switch (c.kind) {
    case Kind::reactor_observer:
    case Kind::reactor_closed_loop: run_reactor(c, dir, o); break;
    case Kind::highgain_observer: run_highgain(c, dir, o); break;
    case Kind::bound_table: run_bound_table(c, dir, o); break;
    case Kind::equivalence_check: run_equivalence(c, dir, o); break;
  }
  echo_context(o);
  add(o.summary, "verdict", o.all_pass() ? "PASS" : "FAIL");
  write_pairs(o.echo, (dir / "params.echo").string());
  std::vector<std::pair<std::string, std::string>> head{{"kind", to_string(c.kind)}};
  head.insert(head.end(), o.summary.begin(), o.summary.end());
  write_pairs(head, (dir / "summary.txt").string(), &o.checks);
  return o;
}

std::vector<Check> read_summary_checks(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read '" + path + "'");
  std::vector<Check> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.rfind("check ", 0) != 0) continue;
    std::istringstream ss(line.substr(6));
    Check c;
    std::string verdict;
    ss >> c.name >> verdict;
    c.pass = verdict == "PASS";
    out.push_back(c);
  }
  return out;
}

CheckContext read_summary_context(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read '" + path + "'");
  CheckContext c;
  std::string line;
  while (std::getline(f, line)) {
    if (line.rfind("context.", 0) != 0) continue;
    const auto eq = line.find(" = ");
    const std::string key = line.substr(8, eq - 8), v = line.substr(eq + 3);
    if (key == "kind") {
      c.kind = kind_from_string(v, 0);
    } else if (key == "disturbance_constant") {
      c.disturbance_constant = v == "true";
    } else {
      const double x = std::strtod(v.c_str(), nullptr);
      if (key == "delay") c.delay = x;
      else if (key == "zeta") c.zeta = x;
      else if (key == "sigma") c.sigma = x;
      else if (key == "Q3") c.Q3 = x;
      else if (key == "noise_sup") c.noise_sup = x;
      else if (key == "disturbance_sup") c.disturbance_sup = x;
      else if (key == "gamma") c.gamma = x;
      else if (key == "L") c.L = x;
    }
  }
  return c;
}

}  // namespace obslab::scenario
