#pragma once
// ScalarExpr: immutable expression trees over exact rationals, symbols, n-ary
// sums/products and integer powers. Canonicalization expands a tree into the
// polynomial normal form and rebuilds a tree in a fixed shape, so canonical
// forms compare byte-for-byte. All operations are pure; values are freely
// shareable across threads.

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "varicart/polynomial.hpp"

namespace varicart {

class expr_error : public std::runtime_error {
 public:
  explicit expr_error(const std::string& what) : std::runtime_error(what) {}
};

class ScalarExpr {
 public:
  enum class Kind { constant, symbol, sum, product, power };

  ScalarExpr() : ScalarExpr(Rational(0)) {}
  ScalarExpr(const Rational& c) : node_(std::make_shared<Node>(c)) {}
  ScalarExpr(long long n) : ScalarExpr(Rational(n)) {}
  explicit ScalarExpr(const Symbol& s) : node_(std::make_shared<Node>(s)) {}

  static ScalarExpr sum(std::vector<ScalarExpr> terms) {
    if (terms.empty()) return ScalarExpr(Rational(0));
    if (terms.size() == 1) return terms.front();
    return ScalarExpr(std::make_shared<Node>(Kind::sum, std::move(terms)));
  }
  static ScalarExpr product(std::vector<ScalarExpr> factors) {
    if (factors.empty()) return ScalarExpr(Rational(1));
    if (factors.size() == 1) return factors.front();
    return ScalarExpr(std::make_shared<Node>(Kind::product, std::move(factors)));
  }
  static ScalarExpr power(ScalarExpr base, int exp) {
    if (exp < 1) throw expr_error("integer power requires exponent >= 1");
    if (exp == 1) return base;
    auto n = std::make_shared<Node>(Kind::power, std::vector<ScalarExpr>{std::move(base)});
    n->exp = exp;
    return ScalarExpr(std::move(n));
  }

  Kind kind() const { return node_->kind; }
  const Rational& constant_value() const { return node_->c; }
  const Symbol& symbol_value() const { return node_->s; }
  const std::vector<ScalarExpr>& operands() const { return node_->kids; }
  int exponent() const { return node_->exp; }

  friend ScalarExpr operator+(const ScalarExpr& a, const ScalarExpr& b) {
    return sum({a, b});
  }
  friend ScalarExpr operator-(const ScalarExpr& a, const ScalarExpr& b) {
    return sum({a, product({ScalarExpr(Rational(-1)), b})});
  }
  friend ScalarExpr operator*(const ScalarExpr& a, const ScalarExpr& b) {
    return product({a, b});
  }
  friend ScalarExpr operator/(const ScalarExpr& a, const Rational& c) {
    if (c.is_zero()) throw expr_error("division by zero constant");
    return product({a, ScalarExpr(Rational(1) / c)});
  }
  ScalarExpr operator-() const { return product({ScalarExpr(Rational(-1)), *this}); }

 private:
  struct Node {
    explicit Node(const Rational& v) : kind(Kind::constant), c(v) {}
    explicit Node(const Symbol& sym) : kind(Kind::symbol), s(sym) {}
    Node(Kind k, std::vector<ScalarExpr> operands) : kind(k), kids(std::move(operands)) {}

    Kind kind;
    Rational c;
    Symbol s;
    std::vector<ScalarExpr> kids;
    int exp = 0;
  };

  explicit ScalarExpr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

  std::shared_ptr<const Node> node_;
};

inline ScalarExpr pow(const ScalarExpr& base, int exp) { return ScalarExpr::power(base, exp); }

// ---------------------------------------------------------------------------
// Tree <-> polynomial
// ---------------------------------------------------------------------------

inline Polynomial to_polynomial(const ScalarExpr& e) {
  switch (e.kind()) {
    case ScalarExpr::Kind::constant:
      return Polynomial(e.constant_value());
    case ScalarExpr::Kind::symbol:
      return Polynomial(e.symbol_value());
    case ScalarExpr::Kind::sum: {
      Polynomial r;
      for (const auto& k : e.operands()) r = r + to_polynomial(k);
      return r;
    }
    case ScalarExpr::Kind::product: {
      Polynomial r = Polynomial::one();
      for (const auto& k : e.operands()) r = r * to_polynomial(k);
      return r;
    }
    case ScalarExpr::Kind::power:
      return to_polynomial(e.operands().front()).pow(e.exponent());
  }
  throw expr_error("corrupt expression node");
}

/// Rebuild the canonical tree: a sum of monomial products in term order.
inline ScalarExpr from_polynomial(const Polynomial& p) {
  std::vector<ScalarExpr> terms;
  for (const auto& [m, c] : p.terms()) {
    std::vector<ScalarExpr> factors;
    if (!c.is_one() || m.empty()) factors.push_back(ScalarExpr(c));
    for (const auto& [sym, e] : m.factors()) {
      ScalarExpr s(sym);
      factors.push_back(e == 1 ? s : ScalarExpr::power(s, e));
    }
    terms.push_back(ScalarExpr::product(std::move(factors)));
  }
  return ScalarExpr::sum(std::move(terms));
}

// ---------------------------------------------------------------------------
// Core operations
// ---------------------------------------------------------------------------

inline ScalarExpr canonicalize(const ScalarExpr& e) { return from_polynomial(to_polynomial(e)); }

inline bool is_zero(const ScalarExpr& e) { return to_polynomial(e).is_zero(); }

/// True iff e1 - e2 canonicalizes to the zero expression.
inline bool equivalent(const ScalarExpr& e1, const ScalarExpr& e2) {
  return (to_polynomial(e1) - to_polynomial(e2)).is_zero();
}

/// Formal partial derivative with respect to a parameter or jet-like symbol.
inline ScalarExpr diff_partial(const ScalarExpr& e, const Symbol& s) {
  if (s.kind() == SymbolKind::independent)
    throw expr_error("cannot take a partial derivative with respect to independent variable '" +
                     s.name() + "'; use the total derivative");
  if (s.kind() == SymbolKind::input)
    throw expr_error("cannot take a partial derivative with respect to input '" + s.name() + "'");
  return from_polynomial(to_polynomial(e).diff(s));
}

using SubstitutionMap = std::map<Symbol, ScalarExpr>;

/// Simultaneous substitution followed by canonicalization.
inline ScalarExpr substitute(const ScalarExpr& e, const SubstitutionMap& bindings) {
  std::map<Symbol, Polynomial> polys;
  for (const auto& [sym, expr] : bindings) polys.emplace(sym, to_polynomial(expr));
  return from_polynomial(to_polynomial(e).substitute(polys));
}

/// IEEE-double evaluation of the canonical form. Missing bindings raise
/// eval_error naming the symbol.
inline double eval_numeric(const ScalarExpr& e, const std::map<Symbol, double>& env) {
  return to_polynomial(e).eval(env);
}

inline Rational eval_rational(const ScalarExpr& e, const std::map<Symbol, Rational>& env) {
  return to_polynomial(e).eval_exact(env);
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace detail {

inline std::string monomial_string(const Monomial& m, const Rational& c, bool spaces) {
  std::string out;
  Rational a = c.is_negative() ? -c : c;
  if (!a.is_one() || m.empty()) out += a.str();
  for (const auto& [sym, e] : m.factors()) {
    if (!out.empty()) out += "*";
    out += sym.str();
    if (e > 1) out += "^" + std::to_string(e);
  }
  (void)spaces;
  return out;
}

}  // namespace detail

/// Deterministic flat rendering of the canonical form, terms in canonical
/// order joined with " + " / " - ".
inline std::string canonical_string(const ScalarExpr& e) {
  Polynomial p = to_polynomial(e);
  if (p.is_zero()) return "0";
  std::string out;
  bool first = true;
  for (const auto& [m, c] : p.terms()) {
    if (first) {
      if (c.is_negative()) out += "-";
      first = false;
    } else {
      out += c.is_negative() ? " - " : " + ";
    }
    out += detail::monomial_string(m, c, false);
  }
  return out;
}

/// Report rendering: monomials grouped by their jet-like part, parameter
/// coefficients collected in front, e.g. "w[0,0,3] + (2-nu)*w[0,2,1]".
inline std::string grouped_string(const ScalarExpr& e) {
  Polynomial p = to_polynomial(e);
  if (p.is_zero()) return "0";

  // Split each monomial into (jet part, parameter part).
  std::map<Monomial, Polynomial> groups;
  for (const auto& [m, c] : p.terms()) {
    Monomial jets, params;
    for (const auto& [sym, exp] : m.factors()) {
      Monomial f(sym, exp);
      if (sym.kind() == SymbolKind::parameter)
        params = params.times(f);
      else
        jets = jets.times(f);
    }
    groups[jets].add_term(params, c);
  }

  auto coeff_paren = [](const Polynomial::TermMap& terms) {
    std::string cs;
    bool cfirst = true;
    for (const auto& [m, c] : terms) {
      if (!cfirst)
        cs += c.is_negative() ? "-" : "+";
      else if (c.is_negative())
        cs += "-";
      cfirst = false;
      cs += detail::monomial_string(m, c, false);
    }
    return "(" + cs + ")";
  };

  std::string out;
  bool first = true;
  for (const auto& [jets, coeff] : groups) {
    const auto& terms = coeff.terms();
    bool single = terms.size() == 1;
    bool negative = single && terms.begin()->second.is_negative();

    std::string js;
    for (const auto& [sym, exp] : jets.factors()) {
      if (!js.empty()) js += "*";
      js += sym.str();
      if (exp > 1) js += "^" + std::to_string(exp);
    }

    std::string piece;  // unsigned when `negative` is set
    if (single) {
      const auto& [m, c] = *terms.begin();
      Rational a = c.is_negative() ? -c : c;
      if (js.empty())
        piece = detail::monomial_string(m, a, false);
      else if (a.is_one() && m.empty())
        piece = js;
      else
        piece = detail::monomial_string(m, a, false) + "*" + js;
    } else {
      piece = js.empty() ? coeff_paren(terms) : coeff_paren(terms) + "*" + js;
    }

    if (first) {
      if (negative) out += "-";
      first = false;
    } else {
      out += negative ? " - " : " + ";
    }
    out += piece;
  }
  return out;
}

}  // namespace varicart
