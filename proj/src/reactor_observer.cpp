#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "obslab/reactor.hpp"

namespace obslab::reactor {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Layout of the co-simulated state.
enum : int { XBAR = 0, SRC, Z1, Z2, I0, I1, W, DIM };

struct Event {
  double t;
  bool instant;
  bool boundary;
};

std::vector<Event> build_events(const std::vector<double>& instants, double H,
                                double horizon) {
  std::vector<Event> out;
  auto near = [](double a, double b) {
    return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a));
  };
  std::size_t i = 0;
  long k = 0;
  const long cells = static_cast<long>(std::ceil(horizon / H - 1e-9));
  while (true) {
    const double ti = i < instants.size() ? instants[i] : kNaN;
    const double tb = k <= cells ? k * H : kNaN;
    const bool have_i = i < instants.size() && (ti <= horizon || near(ti, horizon));
    const bool have_b = k <= cells;
    if (!have_i && !have_b) break;
    Event e{};
    if (have_i && have_b && near(ti, tb)) {
      e = {ti, true, true};
      ++i;
      ++k;
    } else if (have_i && (!have_b || ti < tb)) {
      e = {ti, true, false};
      ++i;
    } else {
      e = {tb, false, true};
      ++k;
    }
    if (!out.empty() && !(e.t > out.back().t)) continue;
    out.push_back(e);
  }
  if (out.back().t < horizon && !near(out.back().t, horizon))
    out.push_back({horizon, false, false});
  return out;
}

class CoSim {
 public:
  CoSim(const ReactorInit& init, const HistoryBuffer& init_z,
        const signals::SamplingSchedule& sched, const ReactorRun& cfg,
        bool closed_loop)
      : cfg_(cfg),
        p_(cfg.params),
        g_(cfg.gains),
        closed_(closed_loop),
        plant_(ReactorField::sample(init.v0, init.xbar0, cfg.M), cfg.params),
        err_window_(cfg.params.delay()),
        trace_(2, 1) {
    p_.validate();
    if (cfg.M < 1) throw std::invalid_argument("reactor run: M must be >= 1");
    if (init_z.dim() != 2) throw std::invalid_argument("reactor run: observer history must have dim 2");
    if (!signals::validate_schedule(sched, sched.diameter))
      throw std::invalid_argument("reactor run: invalid sampling schedule");
    if (closed_ && !(p_.mu + 1.0 + cfg.Q_fb > p_.Phi))
      throw std::invalid_argument("reactor run: need mu + 1 + Q_fb > Phi");
    r_ = p_.delay();
    H_ = plant_.cell_dt();
    E_ = std::exp(-p_.zeta * r_);
    h_ = cfg.h > 0.0 ? cfg.h : std::min(H_, sched.min_gap());
    if (h_ > H_ * (1 + 1e-12)) throw std::invalid_argument("reactor run: step exceeds r/M");
    if (h_ > sched.min_gap() * (1 + 1e-9))
      throw std::invalid_argument("reactor run: step exceeds the smallest sampling gap");
    horizon_ = cfg.horizon > 0.0 ? cfg.horizon : sched.instants.back();
    if (sched.instants.back() < horizon_ * (1 - 1e-12))
      throw std::invalid_argument("reactor run: schedule does not cover the horizon");
    record_every_ = cfg.record_interval > 0.0
                        ? std::max<long>(1, std::lround(cfg.record_interval / H_))
                        : 1;
    delta_ = sched.diameter;
    events_ = build_events(sched.instants, H_, horizon_);
    build_initial(init, init_z);
  }

  SimTrace run() {
    dde::IntegrateOptions io;
    io.on_step = [this](double t, const HistoryBuffer& b) { after_step(t, b); };
    auto rhs = [this](double t, const HistoryView& v) { return this->rhs(t, v); };
    handle_event(events_.front(), true);
    for (std::size_t i = 0; i + 1 < events_.size(); ++i) {
      dde::integrate_interval(rhs, buf_, events_[i].t, events_[i + 1].t, h_, io);
      handle_event(events_[i + 1], false);
    }
    finish_envelope();
    return std::move(trace_);
  }

 private:
  double elapsed(double t) const { return std::clamp(t - t_base_, 0.0, H_); }

  void build_initial(const ReactorInit& init, const HistoryBuffer& init_z) {
    const double spacing = H_ / 4.0;
    const auto lifted = lift_initial_condition(init.v0, init.xbar0, p_, spacing);
    const auto& xh = lifted.history;
    const double z = p_.zeta;

    // I0 = int e^{zeta s} z2(s) ds, I1 = int (-s) e^{zeta s} z2(s) ds on [-r, 0].
    const int panels = 20 * cfg_.M;
    double j0 = 0.0, j1 = 0.0;
    for (int j = 0; j <= panels; ++j) {
      const double s = -r_ + r_ * j / panels;
      const double wgt = (j == 0 || j == panels) ? 0.5 : 1.0;
      const double v = init_z.eval(s, 1) * std::exp(z * s);
      j0 += wgt * v;
      j1 += wgt * (-s) * v;
    }
    j0 *= r_ / panels;
    j1 *= r_ / panels;

    const double y0 = plant_.outlet(0.0, 0.0) + noise(0.0);
    buf_ = HistoryBuffer(DIM, r_);
    const double x1 = init.v0.v(1.0);
    for (std::size_t i = 0; i < xh.size(); ++i) {
      const double t = xh.time(i);
      Vec v = Vec::Zero(DIM), s = Vec::Zero(DIM);
      const Vec zv = init_z.eval(t), zd = init_z.eval_derivative(t);
      v[XBAR] = xh.value_ptr(i)[1];
      s[XBAR] = xh.slope_left(i)[1];
      v[Z1] = zv[0];
      v[Z2] = zv[1];
      s[Z1] = zd[0];
      s[Z2] = zd[1];
      v[I0] = j0;
      v[I1] = j1;
      v[W] = y0;
      buf_.append(t, v, s);
      err_window_.push(t, std::hypot(zv[0] - x1, zv[1] - v[XBAR]));
      init_x_sup_ = std::max(init_x_sup_, std::hypot(x1, v[XBAR]));
      init_z_sup_ = std::max(init_z_sup_, zv.norm());
    }
    init_z_sup_ = std::max(init_z_sup_, dde::sup_norm_window(init_z, 0.0, r_));
  }

  double noise(double t) const { return cfg_.xi ? cfg_.xi(t) : 0.0; }

  double input(double t) const {
    if (closed_) return u_held_;
    return cfg_.u ? cfg_.u(t) : 0.0;
  }

  Vec rhs(double t, const HistoryView& v) const {
    const Vec x = v.now();
    const double s = elapsed(t);
    const double z = p_.zeta;
    const double u = input(t);
    const double z2d = v.at(t - r_, Z2);
    Vec d(DIM);
    d[XBAR] = plant_.xbar_rate(x[XBAR], plant_.mean(s, x[SRC]), u);
    d[SRC] = plant_.source_rate(x[XBAR], x[SRC]);
    const double innov = x[Z1] - x[W];
    const double dist = x[I0] - x[I1] / r_;
    const double transport = z * x[Z2] - z * E_ * z2d - z * x[Z1];
    d[Z1] = transport - g_.k1 * innov;
    d[Z2] = p_.theta(x[Z2]) - (p_.mu + 1.0) * x[Z2] + p_.mu * z * dist + u -
            g_.k2 * innov;
    d[I0] = x[Z2] - E_ * z2d - z * x[I0];
    d[I1] = x[I0] - r_ * E_ * z2d - z * x[I1];
    d[W] = transport;
    return d;
  }

  void after_step(double t, const HistoryBuffer& b) {
    const double* x = b.value_ptr(b.size() - 1);
    const double out = plant_.outlet(elapsed(t), x[SRC]);
    err_window_.push(t, std::hypot(x[Z1] - out, x[Z2] - x[XBAR]));
  }

  void handle_event(const Event& e, bool first) {
    const double t = e.t;
    if (e.boundary && !first) {
      plant_.shift(buf_.back_value()[SRC]);
      buf_.jump_back(SRC, 0.0);
      t_base_ = t;
      ++cells_done_;
    }
    const bool last = &e == &events_.back();
    const bool due = first || last || (e.boundary && cells_done_ % record_every_ == 0);
    if (e.instant) {
      if (due && !first) push_row(t, RowKind::pre_reset);
      const double y = plant_.outlet(elapsed(t), buf_.back_value()[SRC]) + noise(t);
      buf_.jump_back(W, y);
      if (closed_) {
        // The mean of v_hat is carried exactly by the auxiliary integrals.
        const double* x = buf_.value_ptr(buf_.size() - 1);
        const double mean = p_.zeta * (x[I0] - x[I1] / r_);
        u_held_ = reactor_feedback(x[Z2], mean, cfg_.Q_fb, p_);
      }
      if (due) push_row(t, RowKind::post_reset);
    } else if (due) {
      push_row(t, RowKind::regular);
    }
  }

  void push_row(double t, RowKind kind) {
    const HistoryView view(buf_);
    const Vec x = view.now();
    const double s = elapsed(t);
    const double out = plant_.outlet(s, x[SRC]);
    const double y = out + noise(t);
    const int M = cfg_.M;
    const double r = r_, z = p_.zeta;

    double integral = 0.0;
    for (int j = 0; j <= M; ++j) {
      const double tau = r * j / M;
      const double e = view.at(t - tau, Z2) - view.at(t - tau, XBAR);
      integral += ((j == 0 || j == M) ? 0.5 : 1.0) * e * e * std::exp(-z * tau);
    }
    integral *= r / M;
    const double V = lyapunov_V_reactor(x[Z1] - out, x[Z2] - x[XBAR], integral, g_);

    const auto v = plant_.profile_at(s, x[SRC]);
    const auto vhat = reconstruct_profile(view.slice(Z2, 1), t, p_, M);
    double prof_err = 0.0, v_sup = 0.0, vhat_sup = 0.0;
    for (int j = 0; j <= M; ++j) {
      prof_err = std::max(prof_err, std::abs(v[j] - vhat[j]));
      v_sup = std::max(v_sup, std::abs(v[j]));
      vhat_sup = std::max(vhat_sup, std::abs(vhat[j]));
    }
    const double identity = delay_output_identity(view.slice(XBAR, 1), t, p_, M);

    trace_.push(t, Eigen::Vector2d(out, x[XBAR]), Eigen::Vector2d(x[Z1], x[Z2]),
                Vec::Constant(1, x[W]), Vec::Constant(1, y), err_window_.max_at(t),
                V, kNaN, kind);
    trace_.push_aux("err_xbar", std::abs(x[XBAR] - x[Z2]));
    trace_.push_aux("err_profile", prof_err);
    trace_.push_aux("manifold_residual", std::abs(out - identity));
    trace_.push_aux("state_norm", std::abs(x[XBAR]) + v_sup);
    trace_.push_aux("estimate_norm", std::abs(x[Z2]) + vhat_sup);
    trace_.push_aux("u", input(t));
  }

  void finish_envelope() {
    if (!cfg_.envelope) return;
    const double sigma = cfg_.sigma > 0.0 ? cfg_.sigma : p_.zeta / 8.0;
    const auto c = reactor_reo_constants(p_, g_, sigma);
    const auto omega = observer::certified_rate(c.gamma, c.L, c.sigma, delta_);
    if (!omega) return;
    observer::EnvelopeParams ep;
    try {
      ep = observer::EnvelopeParams::make(*omega, delta_, c.L, c.gamma);
    } catch (const std::domain_error&) {
      return;
    }
    std::vector<double> nz(trace_.size()), dist(trace_.size(), 0.0);
    for (std::size_t i = 0; i < trace_.size(); ++i) nz[i] = std::abs(noise(trace_.t[i]));
    trace_.envelope = observer::envelope_series(
        ep, c.a_coef * (init_x_sup_ + init_z_sup_), trace_.t, nz, dist,
        [](double) { return 0.0; });
  }

  ReactorRun cfg_;
  ReactorParams p_;
  ReactorGains g_;
  bool closed_;
  ReactorPlant plant_;
  double r_ = 0, H_ = 0, E_ = 0, h_ = 0, horizon_ = 0, delta_ = 0;
  double t_base_ = 0.0;
  long cells_done_ = 0;
  long record_every_ = 1;
  double u_held_ = 0.0;
  double init_x_sup_ = 0.0, init_z_sup_ = 0.0;
  std::vector<Event> events_;
  HistoryBuffer buf_;
  dde::WindowMax err_window_;
  SimTrace trace_;
};

}  // namespace

HistoryBuffer matched_observer_history(const ReactorInit& init,
                                       const ReactorParams& p, double spacing) {
  return lift_initial_condition(init.v0, init.xbar0, p, spacing).history;
}

double default_sampling_diameter(const ReactorParams& p, const ReactorGains& g,
                                 double sigma, int M) {
  const auto c = reactor_reo_constants(p, g, sigma);
  const double bound = *observer::max_sampling_diameter(c.gamma, c.L, c.sigma);
  const double H = p.delay() / M;
  const double target = 0.1 * bound;
  const double per_cell = std::ceil(H / target - 1e-9);
  return H / per_cell;
}

SimTrace run_reactor_observer(const ReactorInit& init,
                              const HistoryBuffer& init_z,
                              const signals::SamplingSchedule& sched,
                              const ReactorRun& cfg) {
  return CoSim(init, init_z, sched, cfg, false).run();
}

SimTrace run_reactor_closed_loop(const ReactorInit& init,
                                 const HistoryBuffer& init_z,
                                 const signals::SamplingSchedule& sched,
                                 const ReactorRun& cfg) {
  return CoSim(init, init_z, sched, cfg, true).run();
}

}  // namespace obslab::reactor
