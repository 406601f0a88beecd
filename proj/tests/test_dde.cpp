#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "obslab/dde.hpp"

using namespace obslab;
using namespace obslab::dde;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

double cos_dde_error(double h) {
  const double r = std::numbers::pi / 2;
  auto buf = HistoryBuffer::sample(
      1, r, 0.0, h, [](double t) { return v1(std::cos(t)); },
      [](double t) { return v1(-std::sin(t)); });
  double err = 0.0;
  IntegrateOptions opts;
  opts.on_step = [&](double t, const HistoryBuffer& b) {
    err = std::max(err, std::abs(b.back_value()[0] - std::cos(t)));
  };
  integrate_interval(
      [r](double t, const HistoryView& x) { return v1(-x.at(t - r, 0)); }, buf,
      0.0, 10.0, h, opts);
  return err;
}

}  // namespace

TEST(HistoryBuffer, ConstantValueEverywhere) {
  Vec c(2);
  c << 3.0, -1.5;
  auto buf = HistoryBuffer::constant(c, 1.0, 0.0, 0.1);
  for (double t : {-1.0, -0.73, -0.5, 0.0}) EXPECT_EQ(buf.eval(t), c);
}

TEST(HistoryBuffer, LinearDataReproduced) {
  HistoryBuffer buf(1, 1.0);
  buf.append(0.0, v1(0.0), v1(1.0));
  buf.append(1.0, v1(1.0), v1(1.0));
  EXPECT_DOUBLE_EQ(buf.eval(0.5)[0], 0.5);
}

TEST(HistoryBuffer, SineWithinTolerance) {
  auto buf = HistoryBuffer::sample(
      1, 6.0, 6.0, 0.01, [](double t) { return v1(std::sin(t)); },
      [](double t) { return v1(std::cos(t)); });
  double worst = 0;
  for (int i = 0; i <= 6000; ++i) {
    const double t = 6.0 * i / 6000.0 + 1e-4 * std::sin(i);
    if (t < 0 || t > 6) continue;
    worst = std::max(worst, std::abs(buf.eval(t)[0] - std::sin(t)));
  }
  EXPECT_LT(worst, 1e-8);
}

TEST(HistoryBuffer, KnotReproductionIsExact) {
  auto buf = HistoryBuffer::sample(
      2, 3.0, 1.0, 0.037,
      [](double t) {
        Vec v(2);
        v << std::exp(t), std::cos(3 * t);
        return v;
      });
  for (std::size_t i = 0; i < buf.size(); ++i) {
    const Vec v = buf.eval(buf.time(i));
    EXPECT_EQ(v[0], buf.value(i)[0]);
    EXPECT_EQ(v[1], buf.value(i)[1]);
  }
}

TEST(HistoryBuffer, OutOfRangeThrows) {
  auto buf = HistoryBuffer::constant(v1(1.0), 1.0, 0.0, 0.1);
  EXPECT_THROW(buf.eval(-1.5), OutOfRangeError);
  EXPECT_THROW(buf.eval(0.1), OutOfRangeError);
}

TEST(HistoryBuffer, ContinuityBetweenKnots) {
  auto buf = HistoryBuffer::sample(1, 1.0, 0.0, 0.1,
                                   [](double t) { return v1(t * t * t); });
  for (std::size_t i = 1; i + 1 < buf.size(); ++i) {
    const double t = buf.time(i);
    EXPECT_NEAR(buf.eval(t - 1e-12)[0], buf.eval(t + 1e-12)[0], 1e-10);
  }
}

TEST(SupNorm, ConstantVector) {
  Vec c(2);
  c << 3.0, 4.0;
  auto buf = HistoryBuffer::constant(c, 2.0, 0.0, 0.1);
  EXPECT_DOUBLE_EQ(sup_norm_window(buf, 0.0, 1.0), 5.0);
  auto zero = HistoryBuffer::constant(Vec::Zero(3), 2.0, 0.0, 0.1);
  EXPECT_EQ(sup_norm_window(zero, -0.5, 1.0), 0.0);
}

TEST(SupNorm, SineWindow) {
  const double tp = 2 * std::numbers::pi;
  auto buf = HistoryBuffer::sample(
      1, tp, tp, 1e-3, [](double t) { return v1(std::sin(t)); },
      [](double t) { return v1(std::cos(t)); });
  EXPECT_NEAR(sup_norm_window(buf, tp, std::numbers::pi), 1.0, 1e-6);
  EXPECT_THROW(sup_norm_window(buf, tp, 7.0), OutOfRangeError);
}

TEST(Integrate, ZeroDerivativeKeepsConstant) {
  auto buf = HistoryBuffer::constant(v1(2.5), 1.0, 0.0, 0.1);
  integrate_interval([](double, const HistoryView&) { return v1(0.0); }, buf,
                     0.0, 7.3, 0.1);
  EXPECT_EQ(buf.back_value()[0], 2.5);
  EXPECT_DOUBLE_EQ(buf.back_time(), 7.3);
}

TEST(Integrate, CosineSolvesDelayedEquation) { EXPECT_LT(cos_dde_error(1e-3), 1e-6); }

TEST(Integrate, MethodOfSteps) {
  auto buf = HistoryBuffer::constant(v1(1.0), 1.0, 0.0, 0.01);
  buf.set_retain_all(true);
  integrate_interval(
      [](double t, const HistoryView& x) { return v1(x.at(t - 1.0, 0)); }, buf,
      0.0, 2.0, 0.01);
  EXPECT_NEAR(buf.eval(1.0)[0], 2.0, 1e-8);
  EXPECT_NEAR(buf.eval(2.0)[0], 3.5, 1e-8);
}

TEST(Integrate, ConvergenceOrder) {
  // The Hermite lookup error depends on where t - pi/2 falls between knots,
  // which shifts with every halving, so single ratios scatter around 16.
  // Check the mean ratio over four halvings and a floor on each one.
  std::vector<double> errs;
  for (double h = 0.1; h > 0.005; h /= 2) errs.push_back(cos_dde_error(h));
  double log_sum = 0.0;
  for (std::size_t i = 1; i < errs.size(); ++i) {
    const double ratio = errs[i - 1] / errs[i];
    EXPECT_GE(ratio, 4.0) << "halving " << i;
    log_sum += std::log(ratio);
  }
  const double mean_ratio = std::exp(log_sum / double(errs.size() - 1));
  EXPECT_GE(mean_ratio, 8.0);
  EXPECT_LE(mean_ratio, 32.0);
}

TEST(Integrate, Deterministic) {
  auto run = [] {
    auto buf = HistoryBuffer::sample(2, 0.7, 0.0, 0.01, [](double t) {
      Vec v(2);
      v << std::sin(t), 1.0 + t;
      return v;
    });
    buf.set_retain_all(true);
    integrate_interval(
        [](double t, const HistoryView& x) {
          Vec d(2);
          d << -x.at(t - 0.7, 1) + std::tanh(x.now()[0]),
              x.integrate(t - 0.7, t, [](double, const Vec& s) { return s[0]; });
          return d;
        },
        buf, 0.0, 3.0, 0.01);
    std::vector<double> out;
    for (std::size_t i = 0; i < buf.size(); ++i)
      for (int c = 0; c < 2; ++c) out.push_back(buf.value(i)[c]);
    return out;
  };
  EXPECT_EQ(run(), run());
}

TEST(Integrate, RejectsBadArguments) {
  auto buf = HistoryBuffer::constant(v1(1.0), 1.0, 0.0, 0.1);
  auto f = [](double, const HistoryView&) { return v1(0.0); };
  EXPECT_THROW(integrate_interval(f, buf, 0.0, 1.0, 0.0), IntegrationError);
  EXPECT_THROW(integrate_interval(f, buf, 0.0, -1.0, 0.1), IntegrationError);
  EXPECT_THROW(integrate_interval(f, buf, 0.0, 1.0, 2.0), IntegrationError);
}

TEST(Integrate, NonFiniteReportsFailureTime) {
  auto buf = HistoryBuffer::constant(v1(1.0), 0.5, 0.0, 0.01);
  auto blow = [](double t, const HistoryView& x) {
    return v1(t > 0.3 ? std::numeric_limits<double>::infinity() : x.now()[0]);
  };
  try {
    integrate_interval(blow, buf, 0.0, 1.0, 0.01);
    FAIL() << "expected IntegrationError";
  } catch (const IntegrationError& e) {
    EXPECT_GT(e.time(), 0.29);
    EXPECT_LT(e.time(), 0.32);
  }
}

TEST(Integrate, DistributedIntegralOnKnots) {
  // x' = -int_{t-1}^t x(s) ds with x = 1 on history; compare with a fine run.
  auto run = [](double h) {
    auto buf = HistoryBuffer::constant(v1(1.0), 1.0, 0.0, h);
    integrate_interval(
        [](double t, const HistoryView& x) {
          return v1(-x.integrate(t - 1.0, t,
                                 [](double, const Vec& s) { return s[0]; }));
        },
        buf, 0.0, 2.0, h);
    return buf.back_value()[0];
  };
  const double a = run(0.02), b = run(0.01), c = run(0.005);
  // Trapezoid on the knot grid: second order.
  EXPECT_GT(std::abs(a - b) / std::abs(b - c), 3.0);
}

TEST(WindowMaxTest, TracksTrailingMax) {
  WindowMax w(1.0);
  w.push(0.0, 5.0);
  w.push(0.5, 1.0);
  EXPECT_EQ(w.max_at(0.5), 5.0);
  w.push(1.2, 2.0);
  EXPECT_EQ(w.max_at(1.2), 2.0);
}
