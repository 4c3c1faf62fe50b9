#ifndef THERMOWEIGHT_LOG_VALUE_HPP
#define THERMOWEIGHT_LOG_VALUE_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace thermoweight {

// A nonnegative real stored as its natural log; -inf encodes zero.
// Multiplication is addition of logs, addition is log-sum-exp with the
// larger term factored out.
class LogValue {
 public:
  constexpr LogValue() : lg_(-std::numeric_limits<double>::infinity()) {}

  static constexpr LogValue zero() { return LogValue{}; }
  static constexpr LogValue one() { return from_log(0.0); }
  static constexpr LogValue from_log(double lg) {
    LogValue v;
    v.lg_ = lg;
    return v;
  }
  static LogValue from_linear(double x) { return from_log(std::log(x)); }

  double log() const { return lg_; }
  double linear() const { return std::exp(lg_); }
  bool is_zero() const { return std::isinf(lg_) && lg_ < 0; }

  LogValue operator*(LogValue o) const {
    if (is_zero() || o.is_zero()) return zero();
    return from_log(lg_ + o.lg_);
  }
  LogValue operator/(LogValue o) const { return from_log(lg_ - o.lg_); }
  LogValue& operator*=(LogValue o) { return *this = *this * o; }

  LogValue operator+(LogValue o) const {
    if (is_zero()) return o;
    if (o.is_zero()) return *this;
    const double hi = std::max(lg_, o.lg_);
    const double lo = std::min(lg_, o.lg_);
    return from_log(hi + std::log1p(std::exp(lo - hi)));
  }
  LogValue& operator+=(LogValue o) { return *this = *this + o; }

  // x^s for s > 0 (and s = 0 giving one); zero^s stays zero.
  LogValue pow(double s) const {
    if (is_zero()) return s == 0.0 ? one() : zero();
    return from_log(lg_ * s);
  }

  friend bool operator<(LogValue a, LogValue b) { return a.lg_ < b.lg_; }
  friend bool operator>(LogValue a, LogValue b) { return a.lg_ > b.lg_; }
  friend bool operator<=(LogValue a, LogValue b) { return a.lg_ <= b.lg_; }
  friend bool operator>=(LogValue a, LogValue b) { return a.lg_ >= b.lg_; }
  friend bool operator==(LogValue a, LogValue b) { return a.lg_ == b.lg_; }

 private:
  double lg_;
};

// log(sum exp(x_i)) with the maximum factored out; empty input is log 0.
// Terms are consumed left to right so results are deterministic.
inline double log_sum_exp(std::span<const double> xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (std::isinf(m) && m < 0) return m;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - m);
  return m + std::log(acc);
}

// One-pass log-sum-exp accumulator: the running sum is rescaled whenever a
// new maximum arrives, so the working sum never overflows.  Results depend
// only on the insertion order.
class OnlineLogSum {
 public:
  void add(double lg) {
    if (std::isinf(lg) && lg < 0) return;
    if (lg <= max_) {
      sum_ += std::exp(lg - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - lg) + 1.0;
      max_ = lg;
    }
  }
  void add(LogValue v) { add(v.log()); }
  double result_log() const {
    if (sum_ == 0.0) return -std::numeric_limits<double>::infinity();
    return max_ + std::log(sum_);
  }
  LogValue result() const { return LogValue::from_log(result_log()); }

 private:
  double max_ = -std::numeric_limits<double>::infinity();
  double sum_ = 0.0;
};

inline LogValue sum(std::span<const LogValue> vals) {
  std::vector<double> xs;
  xs.reserve(vals.size());
  for (LogValue v : vals) xs.push_back(v.log());
  return LogValue::from_log(log_sum_exp(xs));
}

}  // namespace thermoweight

#endif
