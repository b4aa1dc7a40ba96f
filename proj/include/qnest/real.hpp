#pragma once

// Extended-precision scalars and outward-rounded intervals on top of MPFR.
//
// Scalar arithmetic rounds to nearest. Interval arithmetic rounds the lower
// endpoint down and the upper endpoint up, so the computed interval always
// contains the exact result. The precision of a binary operation is the
// maximum of the operand precisions.

#include <mpfr.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace qnest {

inline constexpr mpfr_prec_t kMinPrecisionBits = 64;
inline constexpr mpfr_prec_t kDefaultPrecisionBits = 256;

class Real {
 public:
  explicit Real(mpfr_prec_t prec = kDefaultPrecisionBits) {
    mpfr_init2(v_, std::max(prec, kMinPrecisionBits));
    mpfr_set_zero(v_, 1);
  }

  Real(double d, mpfr_prec_t prec) : Real(prec) { mpfr_set_d(v_, d, MPFR_RNDN); }

  Real(long v, mpfr_prec_t prec) : Real(prec) { mpfr_set_si(v_, v, MPFR_RNDN); }

  Real(int v, mpfr_prec_t prec) : Real(static_cast<long>(v), prec) {}

  // Parses a decimal (or any mpfr_strtofr-accepted) literal, rounding to nearest.
  static Real parse(std::string_view text, mpfr_prec_t prec = kDefaultPrecisionBits) {
    Real r(prec);
    std::string s(text);
    char* end = nullptr;
    if (!s.empty()) mpfr_strtofr(r.v_, s.c_str(), &end, 10, MPFR_RNDN);
    if (s.empty() || end == s.c_str() || *end != '\0') {
      throw std::invalid_argument("not a real number: '" + s + "'");
    }
    return r;
  }

  // Same value carried at a different precision (rounded to nearest).
  Real with_precision(mpfr_prec_t prec) const {
    Real r(prec);
    mpfr_set(r.v_, v_, MPFR_RNDN);
    return r;
  }

  Real(const Real& o) {
    mpfr_init2(v_, mpfr_get_prec(o.v_));
    mpfr_set(v_, o.v_, MPFR_RNDN);
  }

  Real(Real&& o) noexcept {
    mpfr_init2(v_, mpfr_get_prec(o.v_));
    mpfr_swap(v_, o.v_);
  }

  Real& operator=(const Real& o) {
    if (this != &o) {
      if (mpfr_get_prec(v_) != mpfr_get_prec(o.v_)) mpfr_set_prec(v_, mpfr_get_prec(o.v_));
      mpfr_set(v_, o.v_, MPFR_RNDN);
    }
    return *this;
  }

  Real& operator=(Real&& o) noexcept {
    mpfr_swap(v_, o.v_);
    return *this;
  }

  ~Real() { mpfr_clear(v_); }

  mpfr_prec_t precision() const { return mpfr_get_prec(v_); }
  mpfr_srcptr raw() const { return v_; }
  mpfr_ptr raw() { return v_; }

  double to_double() const { return mpfr_get_d(v_, MPFR_RNDN); }
  long double to_long_double() const { return mpfr_get_ld(v_, MPFR_RNDN); }

  bool is_zero() const { return mpfr_zero_p(v_) != 0; }
  bool is_finite() const { return mpfr_number_p(v_) != 0; }
  int sign() const { return mpfr_sgn(v_); }

  // Shortest decimal string that reads back to the same value at this precision.
  std::string to_string() const {
    if (mpfr_nan_p(v_)) return "nan";
    if (mpfr_inf_p(v_)) return mpfr_sgn(v_) > 0 ? "inf" : "-inf";
    if (mpfr_zero_p(v_)) return "0";
    mpfr_exp_t exp = 0;
    char* digits = mpfr_get_str(nullptr, &exp, 10, 0, v_, MPFR_RNDN);
    std::string mant(digits);
    mpfr_free_str(digits);
    bool neg = !mant.empty() && mant[0] == '-';
    if (neg) mant.erase(0, 1);
    while (mant.size() > 1 && mant.back() == '0') mant.pop_back();
    std::string out = neg ? "-" : "";
    out += mant.substr(0, 1);
    if (mant.size() > 1) out += "." + mant.substr(1);
    if (exp - 1 != 0) out += "e" + std::to_string(static_cast<long>(exp) - 1);
    return out;
  }

  // Fixed number of significant decimal digits, for human-facing output.
  std::string to_string(int digits) const {
    std::string fmt = "%." + std::to_string(std::max(1, digits)) + "Rg";
    char buf[512];
    mpfr_snprintf(buf, sizeof buf, fmt.c_str(), v_);
    return buf;
  }

  Real& operator+=(const Real& o) { return assign_binary(o, mpfr_add); }
  Real& operator-=(const Real& o) { return assign_binary(o, mpfr_sub); }
  Real& operator*=(const Real& o) { return assign_binary(o, mpfr_mul); }
  Real& operator/=(const Real& o) { return assign_binary(o, mpfr_div); }

  friend Real operator+(const Real& x, const Real& y) { return binary(x, y, mpfr_add); }
  friend Real operator-(const Real& x, const Real& y) { return binary(x, y, mpfr_sub); }
  friend Real operator*(const Real& x, const Real& y) { return binary(x, y, mpfr_mul); }
  friend Real operator/(const Real& x, const Real& y) { return binary(x, y, mpfr_div); }
  friend Real operator-(const Real& x) {
    Real r(x.precision());
    mpfr_neg(r.v_, x.v_, MPFR_RNDN);
    return r;
  }

  friend Real operator+(const Real& x, long y) {
    Real r(x.precision());
    mpfr_add_si(r.v_, x.v_, y, MPFR_RNDN);
    return r;
  }
  friend Real operator-(const Real& x, long y) {
    Real r(x.precision());
    mpfr_sub_si(r.v_, x.v_, y, MPFR_RNDN);
    return r;
  }
  friend Real operator*(const Real& x, long y) {
    Real r(x.precision());
    mpfr_mul_si(r.v_, x.v_, y, MPFR_RNDN);
    return r;
  }
  friend Real operator/(const Real& x, long y) {
    Real r(x.precision());
    mpfr_div_si(r.v_, x.v_, y, MPFR_RNDN);
    return r;
  }

  friend bool operator==(const Real& x, const Real& y) { return mpfr_equal_p(x.v_, y.v_) != 0; }
  friend bool operator<(const Real& x, const Real& y) { return mpfr_less_p(x.v_, y.v_) != 0; }
  friend bool operator<=(const Real& x, const Real& y) { return mpfr_lessequal_p(x.v_, y.v_) != 0; }
  friend bool operator>(const Real& x, const Real& y) { return mpfr_greater_p(x.v_, y.v_) != 0; }
  friend bool operator>=(const Real& x, const Real& y) {
    return mpfr_greaterequal_p(x.v_, y.v_) != 0;
  }

  friend std::ostream& operator<<(std::ostream& os, const Real& x) { return os << x.to_string(); }

  template <typename Fn>
  static Real unary(const Real& x, Fn fn, mpfr_rnd_t rnd = MPFR_RNDN) {
    Real r(x.precision());
    fn(r.v_, x.v_, rnd);
    return r;
  }

  template <typename Fn>
  static Real binary(const Real& x, const Real& y, Fn fn, mpfr_rnd_t rnd = MPFR_RNDN) {
    Real r(std::max(x.precision(), y.precision()));
    fn(r.v_, x.v_, y.v_, rnd);
    return r;
  }

 private:
  template <typename Fn>
  Real& assign_binary(const Real& o, Fn fn) {
    if (o.precision() > precision()) {
      Real tmp = binary(*this, o, fn);
      *this = std::move(tmp);
    } else {
      fn(v_, v_, o.v_, MPFR_RNDN);
    }
    return *this;
  }

  mpfr_t v_;
};

inline Real sqrt(const Real& x) { return Real::unary(x, mpfr_sqrt); }
inline Real abs(const Real& x) { return Real::unary(x, mpfr_abs); }
inline Real log(const Real& x) { return Real::unary(x, mpfr_log); }
inline Real exp(const Real& x) { return Real::unary(x, mpfr_exp); }
inline Real sqr(const Real& x) { return Real::unary(x, mpfr_sqr); }
inline Real pow(const Real& x, const Real& y) { return Real::binary(x, y, mpfr_pow); }
inline Real min(const Real& x, const Real& y) { return x <= y ? x : y; }
inline Real max(const Real& x, const Real& y) { return x >= y ? x : y; }

// 2^e at the given precision (exact).
inline Real pow2(long e, mpfr_prec_t prec) {
  Real r(prec);
  mpfr_set_ui_2exp(r.raw(), 1, e, MPFR_RNDN);
  return r;
}

// The quadratic family f_a(x) = a - x^2, rounded to nearest.
inline Real quadratic(const Real& a, const Real& x) {
  Real r(std::max(a.precision(), x.precision()));
  mpfr_sqr(r.raw(), x.raw(), MPFR_RNDN);
  mpfr_sub(r.raw(), a.raw(), r.raw(), MPFR_RNDN);
  return r;
}

// Closed interval [lo, hi] with outward-rounded arithmetic.
class Interval {
 public:
  explicit Interval(mpfr_prec_t prec = kDefaultPrecisionBits) : lo_(prec), hi_(prec) {}
  explicit Interval(const Real& point) : lo_(point), hi_(point) {}
  Interval(Real lo, Real hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
    if (hi_ < lo_) throw std::invalid_argument("interval with lo > hi");
  }

  const Real& lo() const { return lo_; }
  const Real& hi() const { return hi_; }
  mpfr_prec_t precision() const { return std::max(lo_.precision(), hi_.precision()); }

  // Width rounded up.
  Real width() const {
    Real w(precision());
    mpfr_sub(w.raw(), hi_.raw(), lo_.raw(), MPFR_RNDU);
    return w;
  }
  Real mid() const {
    Real m = lo_ + hi_;
    mpfr_div_2ui(m.raw(), m.raw(), 1, MPFR_RNDN);
    return m;
  }
  // Largest |x| over the interval (rounded up is exact here).
  Real mag() const { return max(qnest::abs(lo_), qnest::abs(hi_)); }
  // Smallest |x| over the interval; zero when the interval contains 0.
  Real mig() const {
    if (contains_zero()) return Real(precision());
    return min(qnest::abs(lo_), qnest::abs(hi_));
  }

  bool contains(const Real& x) const { return lo_ <= x && x <= hi_; }
  bool contains(const Interval& o) const { return lo_ <= o.lo_ && o.hi_ <= hi_; }
  bool contains_zero() const { return lo_.sign() <= 0 && hi_.sign() >= 0; }
  bool interior_contains(const Real& x) const { return lo_ < x && x < hi_; }
  bool intersects(const Interval& o) const { return !(hi_ < o.lo_ || o.hi_ < lo_); }
  bool disjoint_interior(const Interval& o) const { return hi_ <= o.lo_ || o.hi_ <= lo_; }

  Interval hull(const Interval& o) const { return {min(lo_, o.lo_), max(hi_, o.hi_)}; }

  Interval with_precision(mpfr_prec_t prec) const {
    Interval r(prec);
    mpfr_set(r.lo_.raw(), lo_.raw(), MPFR_RNDD);
    mpfr_set(r.hi_.raw(), hi_.raw(), MPFR_RNDU);
    return r;
  }

  friend Interval operator+(const Interval& x, const Interval& y) {
    Interval r(std::max(x.precision(), y.precision()));
    mpfr_add(r.lo_.raw(), x.lo_.raw(), y.lo_.raw(), MPFR_RNDD);
    mpfr_add(r.hi_.raw(), x.hi_.raw(), y.hi_.raw(), MPFR_RNDU);
    return r;
  }
  friend Interval operator-(const Interval& x, const Interval& y) {
    Interval r(std::max(x.precision(), y.precision()));
    mpfr_sub(r.lo_.raw(), x.lo_.raw(), y.hi_.raw(), MPFR_RNDD);
    mpfr_sub(r.hi_.raw(), x.hi_.raw(), y.lo_.raw(), MPFR_RNDU);
    return r;
  }
  friend Interval operator-(const Interval& x) {
    Interval r(x.precision());
    mpfr_neg(r.lo_.raw(), x.hi_.raw(), MPFR_RNDD);
    mpfr_neg(r.hi_.raw(), x.lo_.raw(), MPFR_RNDU);
    return r;
  }
  friend Interval operator*(const Interval& x, const Interval& y) {
    const mpfr_prec_t prec = std::max(x.precision(), y.precision());
    Interval r(prec);
    Real t(prec);
    bool first = true;
    for (const Real* u : {&x.lo_, &x.hi_}) {
      for (const Real* v : {&y.lo_, &y.hi_}) {
        mpfr_mul(t.raw(), u->raw(), v->raw(), MPFR_RNDD);
        if (first || t < r.lo_) r.lo_ = t;
        mpfr_mul(t.raw(), u->raw(), v->raw(), MPFR_RNDU);
        if (first || t > r.hi_) r.hi_ = t;
        first = false;
      }
    }
    return r;
  }

  Interval square() const {
    Interval r(precision());
    const Real lo_mag = mig();
    const Real hi_mag = mag();
    mpfr_sqr(r.lo_.raw(), lo_mag.raw(), MPFR_RNDD);
    mpfr_sqr(r.hi_.raw(), hi_mag.raw(), MPFR_RNDU);
    return r;
  }

  // Requires lo >= 0 (negative parts are clipped to 0).
  Interval sqrt() const {
    Interval r(precision());
    if (lo_.sign() < 0) {
      r.lo_ = Real(precision());
    } else {
      mpfr_sqrt(r.lo_.raw(), lo_.raw(), MPFR_RNDD);
    }
    if (hi_.sign() < 0) throw std::domain_error("sqrt of a negative interval");
    mpfr_sqrt(r.hi_.raw(), hi_.raw(), MPFR_RNDU);
    return r;
  }

  Interval abs() const {
    if (lo_.sign() >= 0) return *this;
    if (hi_.sign() <= 0) return -*this;
    return {Real(precision()), mag()};
  }

  Interval scaled(long k) const {
    Interval r(precision());
    mpfr_mul_si(r.lo_.raw(), (k >= 0 ? lo_ : hi_).raw(), k, MPFR_RNDD);
    mpfr_mul_si(r.hi_.raw(), (k >= 0 ? hi_ : lo_).raw(), k, MPFR_RNDU);
    return r;
  }

  // Natural log of a positive interval.
  Interval log() const {
    if (lo_.sign() <= 0) throw std::domain_error("log of a non-positive interval");
    Interval r(precision());
    mpfr_log(r.lo_.raw(), lo_.raw(), MPFR_RNDD);
    mpfr_log(r.hi_.raw(), hi_.raw(), MPFR_RNDU);
    return r;
  }

  // Relative width |hi - lo| / max(|lo|, |hi|); zero for a degenerate point.
  double relative_width() const {
    const Real m = mag();
    if (m.is_zero()) return 0.0;
    return (width() / m).to_double();
  }

  std::string to_string_dbg() const { return "[" + lo_.to_string(20) + ", " + hi_.to_string(20) + "]"; }

  friend std::ostream& operator<<(std::ostream& os, const Interval& x) {
    return os << '[' << x.lo_ << ", " << x.hi_ << ']';
  }

 private:
  Real lo_;
  Real hi_;
};

// Outward-rounded image of X under f_a(x) = a - x^2.
inline Interval quadratic(const Interval& a, const Interval& x) { return a - x.square(); }
inline Interval quadratic(const Real& a, const Interval& x) { return Interval(a) - x.square(); }

}  // namespace qnest
