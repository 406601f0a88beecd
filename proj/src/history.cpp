#include "obslab/dde.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace obslab {

IntegrationError::IntegrationError(const std::string& what, double t)
    : std::runtime_error(what), time_(t) {}

}  // namespace obslab

namespace obslab::dde {

namespace {

double span_tol(double t) { return 1e-12 * std::max(1.0, std::abs(t)); }

std::string range_message(const char* what, double t, double lo, double hi) {
  std::ostringstream os;
  os.precision(17);
  os << what << ": t=" << t << " outside [" << lo << ", " << hi << "]";
  return os.str();
}

}  // namespace

HistoryBuffer::HistoryBuffer(int dim, double window)
    : dim_(dim), window_(window) {
  if (dim <= 0) throw std::invalid_argument("HistoryBuffer: dim must be > 0");
  if (!(window >= 0.0))
    throw std::invalid_argument("HistoryBuffer: window must be >= 0");
}

HistoryBuffer HistoryBuffer::sample(int dim, double window, double t_end,
                                    double spacing,
                                    const std::function<Vec(double)>& value,
                                    const std::function<Vec(double)>& slope) {
  if (!(spacing > 0.0))
    throw std::invalid_argument("HistoryBuffer::sample: spacing must be > 0");
  HistoryBuffer buf(dim, window);
  const long n = window > 0.0
                     ? static_cast<long>(std::ceil(window / spacing - 1e-9))
                     : 0;
  const double fd = 1e-6 * std::max(spacing, 1e-3);
  for (long k = n; k >= 0; --k) {
    const double t = k == n ? t_end - window : t_end - k * spacing;
    Vec x = value(t);
    if (x.size() != dim)
      throw std::invalid_argument("HistoryBuffer::sample: wrong dimension");
    Vec m = slope ? slope(t) : Vec((value(t + fd) - value(t - fd)) / (2 * fd));
    buf.append(t, x, m);
  }
  return buf;
}

HistoryBuffer HistoryBuffer::constant(const Vec& value, double window,
                                      double t_end, double spacing) {
  const Vec zero = Vec::Zero(value.size());
  return sample(
      static_cast<int>(value.size()), window, t_end, spacing,
      [&](double) { return value; }, [&](double) { return zero; });
}

double HistoryBuffer::front_time() const {
  if (empty()) throw OutOfRangeError("HistoryBuffer: empty");
  return times_[begin_];
}

double HistoryBuffer::back_time() const {
  if (empty()) throw OutOfRangeError("HistoryBuffer: empty");
  return times_.back();
}

Vec HistoryBuffer::value(std::size_t i) const {
  return Eigen::Map<const Vec>(value_ptr(i), dim_);
}

Vec HistoryBuffer::slope_left(std::size_t i) const {
  return Eigen::Map<const Vec>(left_.data() + (begin_ + i) * dim_, dim_);
}

Vec HistoryBuffer::slope_right(std::size_t i) const {
  return Eigen::Map<const Vec>(right_.data() + (begin_ + i) * dim_, dim_);
}

void HistoryBuffer::append(double t, const Vec& x, const Vec& slope) {
  append(t, x, slope, slope);
}

void HistoryBuffer::append(double t, const Vec& x, const Vec& slope_left,
                           const Vec& slope_right) {
  if (x.size() != dim_ || slope_left.size() != dim_ ||
      slope_right.size() != dim_)
    throw std::invalid_argument("HistoryBuffer::append: wrong dimension");
  if (!empty() && !(t > times_.back()))
    throw std::invalid_argument("HistoryBuffer::append: knots must increase");
  times_.push_back(t);
  values_.insert(values_.end(), x.data(), x.data() + dim_);
  left_.insert(left_.end(), slope_left.data(), slope_left.data() + dim_);
  right_.insert(right_.end(), slope_right.data(), slope_right.data() + dim_);
}

void HistoryBuffer::set_back_slope(const Vec& slope) {
  if (empty()) throw OutOfRangeError("HistoryBuffer: empty");
  std::copy(slope.data(), slope.data() + dim_, right_.end() - dim_);
}

void HistoryBuffer::jump_back(const Vec& x) {
  if (empty()) throw OutOfRangeError("HistoryBuffer: empty");
  std::copy(x.data(), x.data() + dim_, values_.end() - dim_);
}

void HistoryBuffer::jump_back(int component, double x) {
  if (empty()) throw OutOfRangeError("HistoryBuffer: empty");
  values_[values_.size() - dim_ + component] = x;
}

void HistoryBuffer::check_span(double t) const {
  if (empty()) throw OutOfRangeError("HistoryBuffer: empty");
  const double lo = times_[begin_], hi = times_.back();
  if (t < lo - span_tol(lo) || t > hi + span_tol(hi) || std::isnan(t))
    throw OutOfRangeError(range_message("eval_history", t, lo, hi));
}

std::size_t HistoryBuffer::locate(double t) const {
  const std::size_t n = size();
  if (n <= 1 || t <= times_[begin_]) return 0;
  if (t >= times_.back()) return n - 1;
  // Knots are close to uniform, so start from a proportional guess and walk.
  const double lo = times_[begin_], hi = times_.back();
  auto i = static_cast<std::size_t>((t - lo) / (hi - lo) * double(n - 1));
  i = std::min(i, n - 2);
  if (time(i) > t) {
    std::size_t step = 1;
    std::size_t hi_i = i;
    while (true) {
      const std::size_t lo_i = hi_i > step ? hi_i - step : 0;
      if (time(lo_i) <= t) {
        auto first = times_.begin() + begin_ + lo_i;
        auto last = times_.begin() + begin_ + hi_i;
        return std::upper_bound(first, last, t) - (times_.begin() + begin_) - 1;
      }
      hi_i = lo_i;
      step *= 2;
    }
  }
  if (time(i + 1) > t) return i;
  std::size_t step = 1;
  std::size_t lo_i = i + 1;
  while (true) {
    const std::size_t hi_i = std::min(lo_i + step, n - 1);
    if (time(hi_i) > t) {
      auto first = times_.begin() + begin_ + lo_i;
      auto last = times_.begin() + begin_ + hi_i;
      return std::upper_bound(first, last, t) - (times_.begin() + begin_) - 1;
    }
    lo_i = hi_i;
    step *= 2;
  }
}

double HistoryBuffer::hermite(std::size_t i, double t, int c) const {
  const std::size_t a = begin_ + i;
  const double t0 = times_[a], t1 = times_[a + 1];
  const double y0 = values_[a * dim_ + c], y1 = values_[(a + 1) * dim_ + c];
  const double h = t1 - t0;
  const double s = (t - t0) / h;
  const double m0 = right_[a * dim_ + c] * h, m1 = left_[(a + 1) * dim_ + c] * h;
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * m0 +
         (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * m1;
}

double HistoryBuffer::eval(double t, int component) const {
  check_span(t);
  const std::size_t i = locate(t);
  if (i + 1 >= size() || time(i) == t) return value_ptr(i)[component];
  return hermite(i, t, component);
}

Vec HistoryBuffer::eval(double t) const {
  check_span(t);
  const std::size_t i = locate(t);
  if (i + 1 >= size() || time(i) == t) return value(i);
  Vec out(dim_);
  for (int c = 0; c < dim_; ++c) out[c] = hermite(i, t, c);
  return out;
}

Vec HistoryBuffer::eval_derivative(double t) const {
  check_span(t);
  const std::size_t i = locate(t);
  if (i + 1 >= size()) return slope_left(i);
  const std::size_t a = begin_ + i;
  const double t0 = times_[a], h = times_[a + 1] - t0;
  const double s = (t - t0) / h;
  Vec out(dim_);
  for (int c = 0; c < dim_; ++c) {
    const double y0 = values_[a * dim_ + c], y1 = values_[(a + 1) * dim_ + c];
    const double m0 = right_[a * dim_ + c], m1 = left_[(a + 1) * dim_ + c];
    out[c] = (6 * s * s - 6 * s) * (y0 - y1) / h +
             (3 * s * s - 4 * s + 1) * m0 + (3 * s * s - 2 * s) * m1;
  }
  return out;
}

void HistoryBuffer::prune_before(double t) {
  if (retain_all_ || size() < 3) return;
  if (t <= front_time()) return;
  const std::size_t keep = locate(t);
  if (keep == 0) return;
  begin_ += keep;
  // Compact once the dead prefix dominates storage.
  if (begin_ > 1024 && begin_ > times_.size() / 2) {
    times_.erase(times_.begin(), times_.begin() + begin_);
    const auto off = static_cast<std::ptrdiff_t>(begin_ * dim_);
    values_.erase(values_.begin(), values_.begin() + off);
    left_.erase(left_.begin(), left_.begin() + off);
    right_.erase(right_.begin(), right_.begin() + off);
    begin_ = 0;
  }
}

// ---------------------------------------------------------------------------

HistoryView::HistoryView(const HistoryBuffer& buf)
    : buf_(&buf), count_(buf.dim()) {}

HistoryView::HistoryView(const HistoryBuffer& buf, const StageExtension& ext)
    : buf_(&buf), ext_(ext), has_ext_(true), count_(buf.dim()) {}

double HistoryView::now_time() const {
  return has_ext_ ? ext_.t1 : buf_->back_time();
}

bool HistoryView::extended_past(double s) const {
  return has_ext_ && s > ext_.t0;
}

double HistoryView::knot_value(std::size_t i, int c) const {
  return buf_->value_ptr(i)[offset_ + c];
}

Vec HistoryView::now() const {
  if (has_ext_) return ext_.x1->segment(offset_, count_);
  return Eigen::Map<const Vec>(buf_->value_ptr(buf_->size() - 1) + offset_,
                               count_);
}

double HistoryView::at(double s, int component) const {
  const int c = offset_ + component;
  if (extended_past(s)) {
    const double dt = ext_.t1 - ext_.t0;
    if (s > ext_.t1 + span_tol(ext_.t1))
      throw OutOfRangeError(
          range_message("history lookup", s, buf_->front_time(), ext_.t1));
    const double sig = s - ext_.t0;
    const double x0 = (*ext_.x0)[c], m0 = (*ext_.slope0)[c];
    if (dt <= 0.0) return x0;
    const double curv = ((*ext_.x1)[c] - x0 - m0 * dt) / (dt * dt);
    return x0 + sig * (m0 + sig * curv);
  }
  return buf_->eval(s, c);
}

Vec HistoryView::at(double s) const {
  Vec out(count_);
  if (extended_past(s)) {
    for (int c = 0; c < count_; ++c) out[c] = at(s, c);
    return out;
  }
  const Vec full = buf_->eval(s);
  return full.segment(offset_, count_);
}

HistoryView HistoryView::slice(int offset, int count) const {
  if (offset < 0 || count <= 0 || offset + count > count_)
    throw std::invalid_argument("HistoryView::slice: bad component range");
  HistoryView v = *this;
  v.offset_ = offset_ + offset;
  v.count_ = count;
  return v;
}

// ---------------------------------------------------------------------------

Vec eval_history(const HistoryBuffer& buf, double t) { return buf.eval(t); }

double sup_norm_window(const HistoryBuffer& buf, double t, double r) {
  if (r < 0) throw std::invalid_argument("sup_norm_window: r < 0");
  const double a = t - r;
  if (buf.empty()) throw OutOfRangeError("sup_norm_window: empty buffer");
  const double lo = buf.front_time(), hi = buf.back_time();
  if (a < lo - span_tol(lo) || t > hi + span_tol(hi))
    throw OutOfRangeError(range_message("sup_norm_window", a, lo, hi));
  double best = std::max(buf.eval(std::max(a, lo)).norm(),
                         buf.eval(std::min(t, hi)).norm());
  const int d = buf.dim();
  for (std::size_t i = buf.locate(std::max(a, lo)); i < buf.size(); ++i) {
    const double ti = buf.time(i);
    if (ti > t) break;
    if (ti < a) continue;
    best = std::max(best, Eigen::Map<const Vec>(buf.value_ptr(i), d).norm());
  }
  return best;
}

void WindowMax::push(double t, double v) {
  while (!q_.empty() && q_.back().second <= v) q_.pop_back();
  q_.emplace_back(t, v);
}

double WindowMax::max_at(double t) {
  const double cut = t - window_ - 1e-12 * std::max(1.0, std::abs(t));
  while (q_.size() > 1 && q_.front().first < cut) q_.pop_front();
  return q_.empty() ? 0.0 : q_.front().second;
}

}  // namespace obslab::dde
