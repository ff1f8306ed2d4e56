#pragma once
// Canonical polynomial form: a sum of monomials with exact rational
// coefficients. Monomials are sorted products of symbol powers; the term order
// is graded (total degree first) then lexicographic on the expanded factor
// sequence. Two expressions are semantically equal iff these forms coincide.

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "varicart/rational.hpp"
#include "varicart/symbol.hpp"

namespace varicart {

class eval_error : public std::runtime_error {
 public:
  explicit eval_error(const std::string& what) : std::runtime_error(what) {}
};

class Monomial {
 public:
  Monomial() = default;
  explicit Monomial(const Symbol& s, int exp = 1) {
    if (exp < 1) throw std::invalid_argument("monomial exponent must be >= 1");
    factors_.emplace_back(s, exp);
  }

  const std::vector<std::pair<Symbol, int>>& factors() const { return factors_; }
  bool empty() const { return factors_.empty(); }

  int total_degree() const {
    int d = 0;
    for (const auto& [s, e] : factors_) d += e;
    return d;
  }

  int exponent_of(const Symbol& s) const {
    for (const auto& [sym, e] : factors_)
      if (sym == s) return e;
    return 0;
  }

  Monomial times(const Monomial& o) const {
    Monomial r;
    auto a = factors_.begin(), ae = factors_.end();
    auto b = o.factors_.begin(), be = o.factors_.end();
    while (a != ae && b != be) {
      if (a->first == b->first) {
        r.factors_.emplace_back(a->first, a->second + b->second);
        ++a;
        ++b;
      } else if (a->first < b->first) {
        r.factors_.push_back(*a++);
      } else {
        r.factors_.push_back(*b++);
      }
    }
    r.factors_.insert(r.factors_.end(), a, ae);
    r.factors_.insert(r.factors_.end(), b, be);
    return r;
  }

  /// Divide out one power of `s`; exponent must be >= 1.
  Monomial without_one(const Symbol& s) const {
    Monomial r;
    for (const auto& [sym, e] : factors_) {
      if (sym == s) {
        if (e > 1) r.factors_.emplace_back(sym, e - 1);
      } else {
        r.factors_.emplace_back(sym, e);
      }
    }
    return r;
  }

  friend bool operator==(const Monomial& a, const Monomial& b) { return a.factors_ == b.factors_; }
  friend bool operator!=(const Monomial& a, const Monomial& b) { return !(a == b); }

  // Graded order, ties broken by the expanded symbol sequence (so x^2 < x*y
  // when x < y).
  friend bool operator<(const Monomial& a, const Monomial& b) {
    int da = a.total_degree(), db = b.total_degree();
    if (da != db) return da < db;
    std::size_t ia = 0, ib = 0;
    int ra = ia < a.factors_.size() ? a.factors_[ia].second : 0;
    int rb = ib < b.factors_.size() ? b.factors_[ib].second : 0;
    while (ia < a.factors_.size() && ib < b.factors_.size()) {
      const Symbol& sa = a.factors_[ia].first;
      const Symbol& sb = b.factors_[ib].first;
      if (sa != sb) return sa < sb;
      int take = ra < rb ? ra : rb;
      ra -= take;
      rb -= take;
      if (ra == 0) {
        ++ia;
        ra = ia < a.factors_.size() ? a.factors_[ia].second : 0;
      }
      if (rb == 0) {
        ++ib;
        rb = ib < b.factors_.size() ? b.factors_[ib].second : 0;
      }
    }
    return false;  // equal degree and one exhausted => identical sequences
  }

 private:
  std::vector<std::pair<Symbol, int>> factors_;  // sorted by symbol, exps >= 1
};

class Polynomial {
 public:
  using TermMap = std::map<Monomial, Rational>;

  Polynomial() = default;
  explicit Polynomial(const Rational& c) {
    if (!c.is_zero()) terms_[Monomial{}] = c;
  }
  explicit Polynomial(const Symbol& s) { terms_[Monomial(s)] = Rational(1); }

  static Polynomial zero() { return Polynomial(); }
  static Polynomial one() { return Polynomial(Rational(1)); }

  const TermMap& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  bool is_constant() const {
    return terms_.empty() || (terms_.size() == 1 && terms_.begin()->first.empty());
  }
  Rational constant_value() const {
    if (terms_.empty()) return Rational(0);
    if (!is_constant()) throw std::logic_error("polynomial is not constant");
    return terms_.begin()->second;
  }

  int total_degree() const {
    int d = 0;
    for (const auto& [m, c] : terms_)
      if (m.total_degree() > d) d = m.total_degree();
    return d;
  }

  friend bool operator==(const Polynomial& a, const Polynomial& b) { return a.terms_ == b.terms_; }
  friend bool operator!=(const Polynomial& a, const Polynomial& b) { return !(a == b); }

  friend Polynomial operator+(const Polynomial& a, const Polynomial& b) {
    Polynomial r = a;
    for (const auto& [m, c] : b.terms_) r.add_term(m, c);
    return r;
  }
  friend Polynomial operator-(const Polynomial& a, const Polynomial& b) {
    Polynomial r = a;
    for (const auto& [m, c] : b.terms_) r.add_term(m, -c);
    return r;
  }
  Polynomial operator-() const {
    Polynomial r;
    for (const auto& [m, c] : terms_) r.terms_[m] = -c;
    return r;
  }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    Polynomial r;
    for (const auto& [ma, ca] : a.terms_)
      for (const auto& [mb, cb] : b.terms_) r.add_term(ma.times(mb), ca * cb);
    return r;
  }
  Polynomial scaled(const Rational& c) const {
    Polynomial r;
    if (c.is_zero()) return r;
    for (const auto& [m, k] : terms_) r.terms_[m] = k * c;
    return r;
  }
  Polynomial pow(int e) const {
    if (e < 0) throw std::invalid_argument("negative polynomial exponent");
    Polynomial r = one();
    for (int i = 0; i < e; ++i) r = r * *this;
    return r;
  }

  /// Formal partial derivative with respect to one symbol; every other symbol
  /// is held constant.
  Polynomial diff(const Symbol& s) const {
    Polynomial r;
    for (const auto& [m, c] : terms_) {
      int e = m.exponent_of(s);
      if (e == 0) continue;
      r.add_term(m.without_one(s), c * Rational(e));
    }
    return r;
  }

  /// Simultaneous substitution of symbols by polynomials.
  Polynomial substitute(const std::map<Symbol, Polynomial>& bindings) const {
    Polynomial r;
    for (const auto& [m, c] : terms_) {
      Polynomial term(c);
      for (const auto& [sym, e] : m.factors()) {
        auto it = bindings.find(sym);
        if (it == bindings.end()) {
          term = term * Polynomial(sym).pow(e);
        } else {
          term = term * it->second.pow(e);
        }
      }
      r = r + term;
    }
    return r;
  }

  double eval(const std::map<Symbol, double>& env) const {
    double acc = 0.0;
    for (const auto& [m, c] : terms_) {
      double t = c.to_double();
      for (const auto& [sym, e] : m.factors()) {
        auto it = env.find(sym);
        if (it == env.end()) throw eval_error("unbound symbol in evaluation: " + sym.str());
        double v = it->second;
        for (int i = 0; i < e; ++i) t *= v;
      }
      acc += t;
    }
    return acc;
  }

  Rational eval_exact(const std::map<Symbol, Rational>& env) const {
    Rational acc(0);
    for (const auto& [m, c] : terms_) {
      Rational t = c;
      for (const auto& [sym, e] : m.factors()) {
        auto it = env.find(sym);
        if (it == env.end()) throw eval_error("unbound symbol in evaluation: " + sym.str());
        t *= it->second.pow(e);
      }
      acc += t;
    }
    return acc;
  }

  std::set<Symbol> symbols() const {
    std::set<Symbol> out;
    for (const auto& [m, c] : terms_)
      for (const auto& [sym, e] : m.factors()) out.insert(sym);
    return out;
  }

  void add_term(const Monomial& m, const Rational& c) {
    if (c.is_zero()) return;
    auto it = terms_.find(m);
    if (it == terms_.end()) {
      terms_[m] = c;
    } else {
      it->second += c;
      if (it->second.is_zero()) terms_.erase(it);
    }
  }

 private:
  TermMap terms_;
};

}  // namespace varicart
