#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "test_util.hpp"

using namespace varicart;

namespace {
const Symbol a = Symbol::parameter("a");
const Symbol b = Symbol::parameter("b");
const Symbol x = Symbol::parameter("x");
const Symbol y = Symbol::parameter("y");

std::vector<Symbol> abxy() { return {a, b, x, y}; }
}  // namespace

TEST_CASE("canonicalize expands products and collects powers") {
  ScalarExpr ea(a), eb(b);
  ScalarExpr prod = (ea + eb) * (ea - eb);
  CHECK(canonical_string(canonicalize(prod)) == "a^2 - b^2");

  // (1/2)*rho*A*w10*w10 collects into a squared power with sorted factors.
  BundleSpec beam({{"t", true}, {"X", false}}, {"w"}, {"rho", "A"});
  ScalarExpr half(Rational(1, 2));
  ScalarExpr w10(beam.jet("w", {1, 0}));
  ScalarExpr e = half * ScalarExpr(beam.parameter("rho")) * ScalarExpr(beam.parameter("A")) * w10 * w10;
  CHECK(canonical_string(canonicalize(e)) == "1/2*A*rho*w[1,0]^2");
}

TEST_CASE("canonicalize is semantics-preserving under random rational valuations") {
  std::mt19937 rng(101);
  for (int trial = 0; trial < 100; ++trial) {
    ScalarExpr e = vt::random_tree(rng, abxy(), 4);
    ScalarExpr diff = e - canonicalize(e);
    std::map<Symbol, Rational> env;
    for (const auto& s : abxy()) env[s] = vt::random_rational(rng, 4, 3);
    CHECK(eval_rational(diff, env) == Rational(0));
  }
}

TEST_CASE("canonicalize is idempotent byte-for-byte") {
  std::mt19937 rng(202);
  for (int trial = 0; trial < 50; ++trial) {
    ScalarExpr e = vt::random_tree(rng, abxy(), 4);
    ScalarExpr once = canonicalize(e);
    ScalarExpr twice = canonicalize(once);
    CHECK(canonical_string(once) == canonical_string(twice));
    CHECK(to_polynomial(once) == to_polynomial(twice));
  }
}

TEST_CASE("diff_partial applies the power rule on jet variables") {
  BundleSpec beam({{"t", true}, {"X", false}}, {"w"}, {"rho", "A", "nu"});
  Symbol w10 = beam.jet("w", {1, 0});
  ScalarExpr e = ScalarExpr(Rational(1, 2)) * ScalarExpr(beam.parameter("rho")) *
                 ScalarExpr(beam.parameter("A")) * pow(ScalarExpr(w10), 2);
  CHECK(canonical_string(diff_partial(e, w10)) == "A*rho*w[1,0]");

  // 2(1-nu)*q^2 differentiates to 4(1-nu)*q.
  BundleSpec plate({{"t", true}, {"X", false}, {"Y", false}}, {"w"}, {"nu"});
  Symbol w011 = plate.jet("w", {0, 1, 1});
  ScalarExpr nu(plate.parameter("nu"));
  ScalarExpr f = ScalarExpr(2) * (ScalarExpr(1) - nu) * pow(ScalarExpr(w011), 2);
  CHECK(equivalent(diff_partial(f, w011),
                   ScalarExpr(4) * ScalarExpr(w011) - ScalarExpr(4) * nu * ScalarExpr(w011)));
}

TEST_CASE("diff_partial rejects independent variables") {
  Symbol t = Symbol::independent("t");
  CHECK_THROWS_AS(diff_partial(ScalarExpr(x), t), expr_error);
  CHECK_THROWS_AS(diff_partial(ScalarExpr(x), Symbol::input("u1")), expr_error);
}

TEST_CASE("diff_partial matches central finite differences") {
  std::mt19937 rng(303);
  std::uniform_real_distribution<double> point(0.6, 1.4);
  for (int trial = 0; trial < 20; ++trial) {
    ScalarExpr e = vt::random_tree(rng, abxy(), 3);
    ScalarExpr de = diff_partial(e, x);
    std::map<Symbol, double> env;
    for (const auto& s : abxy()) env[s] = point(rng);
    const double h = 1e-5;
    auto at = [&](double xv) {
      auto env2 = env;
      env2[x] = xv;
      return eval_numeric(e, env2);
    };
    double fd = (at(env[x] + h) - at(env[x] - h)) / (2 * h);
    double exact = eval_numeric(de, env);
    CHECK(std::abs(fd - exact) <= 1e-8 * std::max(1.0, std::abs(exact)) + 1e-8);
  }
}

TEST_CASE("diff_partial is linear and Leibniz, and kills absent symbols") {
  std::mt19937 rng(404);
  for (int trial = 0; trial < 30; ++trial) {
    ScalarExpr e1 = vt::random_tree(rng, {a, x, y}, 3);
    ScalarExpr e2 = vt::random_tree(rng, {a, x, y}, 3);
    CHECK(equivalent(diff_partial(e1 * e2, x),
                     diff_partial(e1, x) * e2 + e1 * diff_partial(e2, x)));
    CHECK(equivalent(diff_partial(e1 + e2, x), diff_partial(e1, x) + diff_partial(e2, x)));
    CHECK(is_zero(diff_partial(e1, b)));  // b never occurs
  }
}

TEST_CASE("equivalent distinguishes expressions by canonical difference") {
  ScalarExpr ex(x), ey(y);
  CHECK(equivalent(pow(ex + ey, 2), pow(ex, 2) + ScalarExpr(2) * ex * ey + pow(ey, 2)));
  CHECK_FALSE(equivalent(ex * ey, ex + ey));
}

TEST_CASE("ring axioms hold under equivalence for random trees") {
  std::mt19937 rng(505);
  for (int trial = 0; trial < 30; ++trial) {
    ScalarExpr e1 = vt::random_tree(rng, abxy(), 3);
    ScalarExpr e2 = vt::random_tree(rng, abxy(), 3);
    ScalarExpr e3 = vt::random_tree(rng, abxy(), 3);
    CHECK(equivalent(e1 + e2, e2 + e1));
    CHECK(equivalent(e1 * (e2 + e3), e1 * e2 + e1 * e3));
    CHECK(equivalent((e1 * e2) * e3, e1 * (e2 * e3)));
  }
}

TEST_CASE("substitute performs simultaneous substitution then canonicalizes") {
  ScalarExpr ex(x);
  SubstitutionMap swap{{x, ScalarExpr(a) + ScalarExpr(b)}};
  CHECK(canonical_string(substitute(pow(ex, 2), swap)) == "a^2 + 2*a*b + b^2");

  // Empty binding is canonicalization.
  ScalarExpr e = (ScalarExpr(a) + ScalarExpr(b)) * (ScalarExpr(a) - ScalarExpr(b));
  CHECK(canonical_string(substitute(e, {})) == canonical_string(canonicalize(e)));

  // Simultaneity: {x -> y, y -> x} does not cascade.
  SubstitutionMap both{{x, ScalarExpr(y)}, {y, ScalarExpr(x)}};
  CHECK(canonical_string(substitute(ScalarExpr(x) * pow(ScalarExpr(y), 2), both)) == "x^2*y");
}

TEST_CASE("substitute composed with evaluate equals evaluate of composition") {
  std::mt19937 rng(606);
  std::uniform_real_distribution<double> point(0.5, 1.5);
  for (int trial = 0; trial < 20; ++trial) {
    ScalarExpr e = vt::random_tree(rng, {x, y}, 3);
    ScalarExpr gx = vt::random_tree(rng, {a, b}, 2);
    ScalarExpr gy = vt::random_tree(rng, {a, b}, 2);
    ScalarExpr composed = substitute(e, {{x, gx}, {y, gy}});
    std::map<Symbol, double> env{{a, point(rng)}, {b, point(rng)}};
    std::map<Symbol, double> inner{{x, eval_numeric(gx, env)}, {y, eval_numeric(gy, env)}};
    double direct = eval_numeric(e, inner);
    double viasub = eval_numeric(composed, env);
    CHECK(std::abs(direct - viasub) <= 1e-9 * std::max(1.0, std::abs(direct)));
  }
}

TEST_CASE("eval_numeric basics and missing-binding error") {
  ScalarExpr e = pow(ScalarExpr(x), 2) + ScalarExpr(1);
  CHECK(eval_numeric(e, {{x, 2.0}}) == doctest::Approx(5.0));
  CHECK(eval_numeric(ScalarExpr(Rational(0)), {}) == 0.0);
  try {
    eval_numeric(e, {});
    FAIL("expected eval_error");
  } catch (const eval_error& err) {
    CHECK(std::string(err.what()).find("x") != std::string::npos);
  }
}

TEST_CASE("eval_numeric agrees with the independent tree evaluator") {
  std::mt19937 rng(707);
  std::uniform_real_distribution<double> point(0.5, 1.5);
  for (int trial = 0; trial < 100; ++trial) {
    ScalarExpr e = vt::random_tree(rng, abxy(), 4);
    std::map<Symbol, double> env;
    for (const auto& s : abxy()) env[s] = point(rng);
    double direct = vt::tree_eval(e, env);
    double canon = eval_numeric(e, env);
    CHECK(std::abs(direct - canon) <= 1e-12 * std::max(1.0, std::abs(direct)));
  }
}

TEST_CASE("rational arithmetic is exact and overflow-checked") {
  CHECK(Rational(1, 2) + Rational(1, 3) == Rational(5, 6));
  CHECK(Rational(2, 4) == Rational(1, 2));
  CHECK((Rational(-3, 6)).str() == "-1/2");
  CHECK_THROWS_AS(Rational(1, 0), arithmetic_error);
  Rational big(INT64_MAX / 2, 1);
  CHECK_THROWS_AS(big * Rational(8), arithmetic_error);
  CHECK_THROWS_AS(ScalarExpr(x) / Rational(0), expr_error);
}

TEST_CASE("power nodes require positive integer exponents") {
  CHECK_THROWS_AS(ScalarExpr::power(ScalarExpr(x), 0), expr_error);
  CHECK_THROWS_AS(ScalarExpr::power(ScalarExpr(x), -2), expr_error);
}
