#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <deque>
#include <functional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace obslab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class OutOfRangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double t);
  double time() const noexcept { return time_; }

 private:
  double time_;
};

}  // namespace obslab

namespace obslab::dde {

// Dense record of a vector trajectory. Values and slopes are stored flat,
// one row of `dim` doubles per knot. Slopes are kept on both sides of a knot
// so that restarts (where the right-hand side may jump) interpolate cleanly.
class HistoryBuffer {
 public:
  HistoryBuffer() = default;
  HistoryBuffer(int dim, double window);

  // Knots at t_end - k*spacing down to t_end - window (inclusive).
  static HistoryBuffer sample(int dim, double window, double t_end,
                              double spacing,
                              const std::function<Vec(double)>& value,
                              const std::function<Vec(double)>& slope = {});
  static HistoryBuffer constant(const Vec& value, double window, double t_end,
                                double spacing);

  int dim() const { return dim_; }
  double window() const { return window_; }
  std::size_t size() const { return times_.size() - begin_; }
  bool empty() const { return size() == 0; }
  double front_time() const;
  double back_time() const;

  double time(std::size_t i) const { return times_[begin_ + i]; }
  const double* value_ptr(std::size_t i) const {
    return values_.data() + (begin_ + i) * dim_;
  }
  Vec value(std::size_t i) const;
  Vec slope_left(std::size_t i) const;
  Vec slope_right(std::size_t i) const;
  Vec back_value() const { return value(size() - 1); }
  Vec back_slope() const { return slope_right(size() - 1); }

  void append(double t, const Vec& x, const Vec& slope);
  void append(double t, const Vec& x, const Vec& slope_left,
              const Vec& slope_right);
  // Overwrites the slope used to the right of the last knot (restart).
  void set_back_slope(const Vec& slope);
  // Overwrites the value of the last knot (state reset at an event).
  void jump_back(const Vec& x);
  void jump_back(int component, double x);

  Vec eval(double t) const;
  double eval(double t, int component) const;
  Vec eval_derivative(double t) const;

  // Index of the last knot with time <= t (t must be inside the span).
  std::size_t locate(double t) const;

  // Drops knots strictly older than the last knot at or before `t`.
  void prune_before(double t);

  bool retain_all() const { return retain_all_; }
  void set_retain_all(bool on) { retain_all_ = on; }

 private:
  void check_span(double t) const;
  double hermite(std::size_t i, double t, int c) const;

  int dim_ = 0;
  double window_ = 0.0;
  bool retain_all_ = false;
  std::size_t begin_ = 0;
  std::vector<double> times_;
  std::vector<double> values_;
  std::vector<double> left_;
  std::vector<double> right_;
};

// State of an in-progress RK stage: the integrator knows the state at a time
// beyond the last committed knot. Lookups past the last knot use the
// quadratic through (t0, x0, slope0) that hits x1 at t1.
struct StageExtension {
  double t0 = 0.0;
  double t1 = 0.0;
  const Vec* x0 = nullptr;
  const Vec* slope0 = nullptr;
  const Vec* x1 = nullptr;
};

// Read-only accessor over [front, now] of a buffer, optionally restricted to a
// block of components and optionally extended to a stage state.
class HistoryView {
 public:
  explicit HistoryView(const HistoryBuffer& buf);
  HistoryView(const HistoryBuffer& buf, const StageExtension& ext);

  double now_time() const;
  double front_time() const { return buf_->front_time(); }
  int dim() const { return count_; }

  Vec now() const;
  Vec at(double s) const;
  double at(double s, int component) const;

  HistoryView slice(int offset, int count) const;

  // Composite trapezoid of f(s, x(s)) over [a, b] on the knot grid plus the
  // (interpolated) endpoints. f returns double or Vec.
  template <class F>
  auto integrate(double a, double b, F&& f) const;

  // Composite trapezoid with `n` uniform panels on [a, b].
  template <class F>
  auto integrate_uniform(double a, double b, int n, F&& f) const;

 private:
  bool extended_past(double s) const;
  double knot_value(std::size_t i, int c) const;

  const HistoryBuffer* buf_;
  StageExtension ext_{};
  bool has_ext_ = false;
  int offset_ = 0;
  int count_ = 0;
};

using StateDerivative = std::function<Vec(double t, const HistoryView& x)>;
using Input = std::function<Vec(double t)>;
using DelayFunctional = std::function<Vec(double t, const HistoryView& x,
                                          const Vec& u, const Vec& d)>;

StateDerivative bind_inputs(DelayFunctional f, Input u, Input d);

struct IntegrateOptions {
  std::function<void(double t, const HistoryBuffer& buf)> on_step;
};

// Fixed-step RK4 from t0 (the last knot of buf) to t1. The last step is
// shortened to land on t1.
void integrate_interval(const StateDerivative& rhs, HistoryBuffer& buf,
                        double t0, double t1, double h,
                        const IntegrateOptions& opts = {});

Vec eval_history(const HistoryBuffer& buf, double t);
double sup_norm_window(const HistoryBuffer& buf, double t, double r);

// Running max of a scalar over a trailing window, amortised O(1).
class WindowMax {
 public:
  explicit WindowMax(double window) : window_(window) {}
  void push(double t, double v);
  double max_at(double t);
  double window() const { return window_; }

 private:
  double window_;
  std::deque<std::pair<double, double>> q_;
};

// ---------------------------------------------------------------------------

template <class F>
auto HistoryView::integrate(double a, double b, F&& f) const {
  using R = std::decay_t<std::invoke_result_t<F&, double, const Vec&>>;
  if (b < a) throw std::invalid_argument("integrate: b < a");
  const double end = now_time();
  if (a < buf_->front_time() || b > end)
    throw OutOfRangeError("integrate: interval outside history span");
  Vec x = at(a);
  R fa = f(a, x);
  R sum = fa * 0.0;
  if (b == a) return sum;
  double prev_t = a;
  R prev_f = fa;
  const double last_knot = buf_->back_time();
  std::size_t i = a < last_knot ? buf_->locate(a) + 1 : buf_->size();
  const double stop = std::min(b, last_knot);
  for (; i < buf_->size() && buf_->time(i) < stop; ++i) {
    const double t = buf_->time(i);
    for (int c = 0; c < count_; ++c) x[c] = knot_value(i, c);
    R ft = f(t, x);
    sum += 0.5 * (t - prev_t) * (prev_f + ft);
    prev_t = t;
    prev_f = std::move(ft);
  }
  if (last_knot > prev_t && last_knot < b) {
    x = at(last_knot);
    R ft = f(last_knot, x);
    sum += 0.5 * (last_knot - prev_t) * (prev_f + ft);
    prev_t = last_knot;
    prev_f = std::move(ft);
  }
  x = at(b);
  R fb = f(b, x);
  sum += 0.5 * (b - prev_t) * (prev_f + fb);
  return sum;
}

template <class F>
auto HistoryView::integrate_uniform(double a, double b, int n, F&& f) const {
  using R = std::decay_t<std::invoke_result_t<F&, double, const Vec&>>;
  if (n < 1) throw std::invalid_argument("integrate_uniform: n < 1");
  const double step = (b - a) / n;
  R sum = f(a, at(a)) * 0.5;
  for (int j = 1; j < n; ++j) {
    const double s = a + j * step;
    sum += f(s, at(s));
  }
  sum += f(b, at(b)) * 0.5;
  return R(sum * step);
}

}  // namespace obslab::dde
