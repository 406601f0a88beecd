#include "obslab/observer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace obslab::observer {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

enum class Mode { continuous, sampled, closed_loop };

bool is_zero(const Vec& v, double tol) {
  return v.size() == 0 || v.lpNorm<Eigen::Infinity>() <= tol;
}

Vec call_or_zero(const Input& f, double t, int dim) {
  if (!f) return Vec::Zero(dim);
  Vec v = f(t);
  if (v.size() != dim) throw std::invalid_argument("input signal has wrong dimension");
  return v;
}

double history_sup(const HistoryBuffer& buf, double r) {
  return dde::sup_norm_window(buf, 0.0, r);
}

class Engine {
 public:
  Engine(const ObservedSystem& sys, const ReoSpec& reo, Mode mode,
         const signals::SamplingSchedule* sched, const Feedback* feedback,
         const HistoryBuffer& init_x, const HistoryBuffer& init_z,
         const Exogenous& in, const RunOptions& opts)
      : sys_(sys),
        reo_(reo),
        mode_(mode),
        sched_(sched),
        feedback_(feedback),
        in_(in),
        opts_(opts),
        n_(sys.n),
        l_(reo.l),
        k_(sys.k),
        r_(sys.delay),
        err_window_(sys.delay),
        trace_(sys.n, sys.k) {
    sys_.validate();
    reo_.validate(n_);
    if (!(opts.h > 0.0)) throw std::invalid_argument("run: step h must be > 0");
    if (r_ > 0.0 && opts.h > r_ * (1 + 1e-12))
      throw std::invalid_argument("run: step h must not exceed the delay");
    if (init_x.dim() != n_ || init_z.dim() != l_)
      throw std::invalid_argument("run: initial history has wrong dimension");
    if (mode_ == Mode::continuous) {
      if (!(opts.horizon > 0.0)) throw std::invalid_argument("run: horizon must be > 0");
      horizon_ = opts.horizon;
    } else {
      if (!sched_ || !signals::validate_schedule(*sched_, sched_->diameter))
        throw std::invalid_argument("run: invalid sampling schedule");
      if (sched_->instants.size() < 2)
        throw std::invalid_argument("run: schedule needs at least two instants");
      if (opts.h > sched_->min_gap() * (1 + 1e-9))
        throw std::invalid_argument("run: step h exceeds the smallest sampling gap");
      horizon_ = opts.horizon > 0.0 ? opts.horizon : sched_->instants.back();
      if (sched_->instants.back() < horizon_ * (1 - 1e-12))
        throw std::invalid_argument("run: schedule does not cover the horizon");
    }
    if (mode_ == Mode::closed_loop && !(feedback_ && *feedback_))
      throw std::invalid_argument("run: closed loop needs a feedback");
    u_held_ = Vec::Zero(sys.m);
    init_norm_ = history_sup(init_x, r_) + history_sup(init_z, r_);
    build_initial(init_x, init_z);
  }

  SimTrace run() {
    std::vector<double> events;
    if (mode_ == Mode::continuous) {
      events = {0.0, horizon_};
    } else {
      const auto& ins = sched_->instants;
      for (double t : ins) {
        if (t > horizon_ * (1 + 1e-12)) break;
        events.push_back(t);
      }
      if (events.back() < horizon_) events.push_back(horizon_);
    }

    handle_event(0.0, /*sampling=*/mode_ != Mode::continuous, true);
    dde::IntegrateOptions io;
    io.on_step = [this](double t, const HistoryBuffer& b) { after_step(t, b); };
    const auto rhs = [this](double t, const HistoryView& v) { return this->rhs(t, v); };
    for (std::size_t i = 0; i + 1 < events.size(); ++i) {
      dde::integrate_interval(rhs, buf_, events[i], events[i + 1], opts_.h, io);
      const bool sampling = mode_ != Mode::continuous && i + 1 < events.size() &&
                            is_instant(events[i + 1]);
      handle_event(events[i + 1], sampling, false);
    }
    finish_envelope();
    return std::move(trace_);
  }

 private:
  bool is_instant(double t) const {
    const auto& ins = sched_->instants;
    return std::binary_search(ins.begin(), ins.end(), t);
  }

  Vec u_at(double t) const {
    return mode_ == Mode::closed_loop ? u_held_ : call_or_zero(in_.u, t, sys_.m);
  }

  Vec measured(double t, const HistoryView& xv) const {
    return sys_.output(xv) + call_or_zero(in_.xi, t, k_);
  }

  void build_initial(const HistoryBuffer& init_x, const HistoryBuffer& init_z) {
    const int N = n_ + l_ + k_;
    buf_ = HistoryBuffer(N, r_);
    const double h = opts_.h;
    const long count = r_ > 0.0 ? static_cast<long>(std::ceil(r_ / h - 1e-9)) : 0;
    HistoryView x0view(init_x);
    const Vec y0 = measured(0.0, x0view);
    for (long j = count; j >= 0; --j) {
      const double t = j == count ? -r_ : -j * h;
      Vec v(N), s(N);
      v << init_x.eval(t), init_z.eval(t), y0;
      s << init_x.eval_derivative(t), init_z.eval_derivative(t), Vec::Zero(k_);
      buf_.append(t, v, s);
      push_error(t, v);
    }
  }

  void push_error(double t, const Vec& state) {
    const double e = (state.segment(n_, n_) - state.head(n_)).norm();
    err_window_.push(t, e);
  }

  Vec rhs(double t, const HistoryView& v) const {
    const HistoryView xv = v.slice(0, n_);
    const HistoryView zv = v.slice(n_, l_);
    const Vec u = u_at(t);
    const Vec d = call_or_zero(in_.d, t, sys_.q);
    Vec out(n_ + l_ + k_);
    out.head(n_) = sys_.plant(t, xv, u, d);
    if (mode_ == Mode::continuous) {
      out.segment(n_, l_) = reo_.rhs(t, zv, measured(t, xv), u);
      out.tail(k_).setZero();
    } else {
      const Vec w = v.now().tail(k_);
      out.segment(n_, l_) = reo_.rhs(t, zv, w, u);
      out.tail(k_) = sys_.output_derivative(zv.slice(0, n_), u, Vec::Zero(sys_.q));
    }
    return out;
  }

  bool record_due(double t) const {
    if (opts_.record_interval <= 0.0) return true;
    return t >= next_record_ - 1e-12 * std::max(1.0, std::abs(t));
  }

  void push_row(double t, RowKind kind) {
    const HistoryView view(buf_);
    const Vec state = view.now();
    const HistoryView xv = view.slice(0, n_);
    const HistoryView xh = view.slice(n_, l_).slice(0, n_);
    const Vec y = measured(t, xv);
    const Vec w = mode_ == Mode::continuous ? y : Vec(state.tail(k_));
    const double v = opts_.lyapunov ? opts_.lyapunov(t, xv, xh) : kNaN;
    trace_.push(t, state.head(n_), state.segment(n_, n_), w, y,
                err_window_.max_at(t), v, kNaN, kind);
  }

  void advance_record(double t) {
    if (opts_.record_interval <= 0.0) return;
    while (next_record_ <= t + 1e-12 * std::max(1.0, std::abs(t)))
      next_record_ += opts_.record_interval;
  }

  void after_step(double t, const HistoryBuffer& b) {
    push_error(t, b.back_value());
    // Event boundaries are recorded by handle_event.
    if (t == b.back_time() && pending_boundary(t)) return;
    if (record_due(t)) {
      push_row(t, RowKind::regular);
      advance_record(t);
    }
  }

  bool pending_boundary(double t) const { return t == current_target_; }

  void handle_event(double t, bool sampling, bool first) {
    const bool due = record_due(t) || first;
    if (sampling) {
      const HistoryView view(buf_);
      if (due && !first) push_row(t, RowKind::pre_reset);
      const Vec y = measured(t, view.slice(0, n_));
      Vec state = buf_.back_value();
      state.tail(k_) = y;
      buf_.jump_back(state);
      if (mode_ == Mode::closed_loop)
        u_held_ = (*feedback_)(t, HistoryView(buf_).slice(n_, l_).slice(0, n_));
      if (due) push_row(t, RowKind::post_reset);
    } else if (due) {
      push_row(t, RowKind::regular);
    }
    if (due) advance_record(t);
    current_target_ = next_target_after(t);
  }

  double next_target_after(double t) const {
    if (mode_ == Mode::continuous) return t < horizon_ ? horizon_ : kNaN;
    const auto& ins = sched_->instants;
    auto it = std::upper_bound(ins.begin(), ins.end(), t);
    if (it == ins.end() || *it > horizon_) return t < horizon_ ? horizon_ : kNaN;
    return *it;
  }

  void finish_envelope() {
    const std::size_t N = trace_.size();
    std::optional<EnvelopeParams> p = opts_.envelope;
    if (!p && mode_ == Mode::continuous && reo_.a) {
      p = EnvelopeParams{};
      p->omega = reo_.sigma;
      p->gamma = reo_.gamma;
      p->L = sys_.output_lipschitz;
    }
    if (!p || !reo_.a) return;
    std::vector<double> noise(N), dist(N);
    for (std::size_t i = 0; i < N; ++i) {
      noise[i] = call_or_zero(in_.xi, trace_.t[i], k_).norm();
      dist[i] = call_or_zero(in_.d, trace_.t[i], sys_.q).norm();
    }
    trace_.envelope =
        envelope_series(*p, reo_.a(init_norm_), trace_.t, noise, dist, reo_.g);
  }

  const ObservedSystem& sys_;
  const ReoSpec& reo_;
  Mode mode_;
  const signals::SamplingSchedule* sched_;
  const Feedback* feedback_;
  Exogenous in_;
  RunOptions opts_;
  int n_, l_, k_;
  double r_;
  double horizon_ = 0.0;
  double init_norm_ = 0.0;
  double next_record_ = 0.0;
  double current_target_ = kNaN;
  Vec u_held_;
  HistoryBuffer buf_;
  dde::WindowMax err_window_;
  SimTrace trace_;
};

}  // namespace

void ObservedSystem::validate() const {
  if (n <= 0 || k <= 0 || m <= 0 || q <= 0)
    throw std::invalid_argument("ObservedSystem: dimensions must be positive");
  if (!(delay >= 0.0)) throw std::invalid_argument("ObservedSystem: delay must be >= 0");
  if (!plant || !output || !output_derivative)
    throw std::invalid_argument("ObservedSystem: missing map");
  const auto zero = HistoryBuffer::constant(Vec::Zero(n), delay, 0.0,
                                            delay > 0 ? delay / 4 : 1.0);
  const HistoryView v(zero);
  const Vec y = output(v);
  if (y.size() != k) throw std::invalid_argument("ObservedSystem: output has wrong dimension");
  if (!is_zero(y, 1e-12)) throw std::invalid_argument("ObservedSystem: h(0) != 0");
  const Vec r = output_derivative(v, Vec::Zero(m), Vec::Zero(q));
  if (r.size() != k || !is_zero(r, 1e-12))
    throw std::invalid_argument("ObservedSystem: R(0,0,0) != 0");
  const Vec f = plant(0.0, v, Vec::Zero(m), Vec::Zero(q));
  if (f.size() != n) throw std::invalid_argument("ObservedSystem: f has wrong dimension");
}

void ReoSpec::validate(int n) const {
  if (l < n) throw std::invalid_argument("ReoSpec: observer dimension below plant dimension");
  if (!rhs) throw std::invalid_argument("ReoSpec: missing F");
  if (!(gamma > 0.0) || !(sigma > 0.0))
    throw std::invalid_argument("ReoSpec: gamma and sigma must be > 0");
  if (a) {
    if (a(0.0) != 0.0) throw std::invalid_argument("ReoSpec: a(0) must be 0");
    if (!(a(2.0) > a(1.0))) throw std::invalid_argument("ReoSpec: a must be increasing");
  }
}

SimTrace run_continuous_reo(const ObservedSystem& sys, const ReoSpec& reo,
                            const HistoryBuffer& init_x,
                            const HistoryBuffer& init_z, const Exogenous& in,
                            const RunOptions& opts) {
  return Engine(sys, reo, Mode::continuous, nullptr, nullptr, init_x, init_z,
                in, opts)
      .run();
}

SimTrace run_sampled_observer(const ObservedSystem& sys, const ReoSpec& reo,
                              const signals::SamplingSchedule& sched,
                              const HistoryBuffer& init_x,
                              const HistoryBuffer& init_z,
                              const Exogenous& in, const RunOptions& opts) {
  return Engine(sys, reo, Mode::sampled, &sched, nullptr, init_x, init_z, in,
                opts)
      .run();
}

SimTrace run_closed_loop(const ObservedSystem& sys, const ReoSpec& reo,
                         const Feedback& feedback,
                         const signals::SamplingSchedule& sched,
                         const HistoryBuffer& init_x,
                         const HistoryBuffer& init_z, const Exogenous& in,
                         const RunOptions& opts) {
  return Engine(sys, reo, Mode::closed_loop, &sched, &feedback, init_x,
                init_z, in, opts)
      .run();
}

}  // namespace obslab::observer
