#pragma once
// Exact rational arithmetic over 64-bit integers. Intermediate products are
// carried in 128-bit registers and overflow of the reduced result is an error,
// never a silent wrap.

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace varicart {

class arithmetic_error : public std::runtime_error {
 public:
  explicit arithmetic_error(const std::string& what) : std::runtime_error(what) {}
};

class Rational {
 public:
  Rational() : num_(0), den_(1) {}
  Rational(long long n) : num_(n), den_(1) {}
  Rational(long long n, long long d) { assign(n, d); }

  long long num() const { return num_; }
  long long den() const { return den_; }

  bool is_zero() const { return num_ == 0; }
  bool is_one() const { return num_ == 1 && den_ == 1; }
  bool is_negative() const { return num_ < 0; }
  bool is_integer() const { return den_ == 1; }

  friend Rational operator+(const Rational& a, const Rational& b) {
    __int128 n = i128(a.num_) * b.den_ + i128(b.num_) * a.den_;
    __int128 d = i128(a.den_) * b.den_;
    return make(n, d);
  }
  friend Rational operator-(const Rational& a, const Rational& b) {
    __int128 n = i128(a.num_) * b.den_ - i128(b.num_) * a.den_;
    __int128 d = i128(a.den_) * b.den_;
    return make(n, d);
  }
  friend Rational operator*(const Rational& a, const Rational& b) {
    return make(i128(a.num_) * b.num_, i128(a.den_) * b.den_);
  }
  friend Rational operator/(const Rational& a, const Rational& b) {
    if (b.num_ == 0) throw arithmetic_error("division by zero rational");
    return make(i128(a.num_) * b.den_, i128(a.den_) * b.num_);
  }
  Rational operator-() const {
    Rational r;
    r.num_ = -num_;
    r.den_ = den_;
    return r;
  }
  Rational& operator+=(const Rational& o) { return *this = *this + o; }
  Rational& operator-=(const Rational& o) { return *this = *this - o; }
  Rational& operator*=(const Rational& o) { return *this = *this * o; }
  Rational& operator/=(const Rational& o) { return *this = *this / o; }

  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend bool operator!=(const Rational& a, const Rational& b) { return !(a == b); }
  friend bool operator<(const Rational& a, const Rational& b) {
    return i128(a.num_) * b.den_ < i128(b.num_) * a.den_;
  }

  Rational pow(int e) const {
    if (e < 0) throw arithmetic_error("negative exponent on rational");
    Rational r(1), base = *this;
    while (e > 0) {
      if (e & 1) r *= base;
      base = (e > 1) ? base * base : base;
      e >>= 1;
    }
    return r;
  }

  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  std::string str() const {
    if (den_ == 1) return std::to_string(num_);
    return std::to_string(num_) + "/" + std::to_string(den_);
  }

 private:
  using i128 = __int128;

  static Rational make(__int128 n, __int128 d) {
    if (d == 0) throw arithmetic_error("division by zero rational");
    if (d < 0) {
      n = -n;
      d = -d;
    }
    __int128 g = gcd128(n < 0 ? -n : n, d);
    if (g > 1) {
      n /= g;
      d /= g;
    }
    Rational r;
    r.num_ = checked_narrow(n);
    r.den_ = checked_narrow(d);
    return r;
  }

  void assign(long long n, long long d) {
    Rational r = make(n, d);
    num_ = r.num_;
    den_ = r.den_;
  }

  static __int128 gcd128(__int128 a, __int128 b) {
    while (b != 0) {
      __int128 t = a % b;
      a = b;
      b = t;
    }
    return a == 0 ? 1 : a;
  }

  static long long checked_narrow(__int128 v) {
    if (v > INT64_MAX || v < INT64_MIN)
      throw arithmetic_error("rational overflow: value exceeds 64-bit range");
    return static_cast<long long>(v);
  }

  long long num_;
  long long den_;
};

}  // namespace varicart
