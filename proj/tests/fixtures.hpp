#pragma once
// Programmatic builds of the beam/plate regression models used across the
// test suites. The .vb sources under models/ describe the same systems.

#include "varicart/porthamil.hpp"

namespace fixtures {

using namespace varicart;

/// Timoshenko beam: deflection w and cross-section rotation phi over (t, X).
/// L = 1/2 (rho*w_t^2 + J*phi_t^2 - E*I*phi_X^2 - k*A*G*(w_X - phi)^2)
inline Density timoshenko() {
  BundleSpec b({{"t", true}, {"X", false}}, {"w", "phi"}, {"rho", "J", "E", "I", "k", "A", "G"});
  ScalarExpr rho(b.parameter("rho")), J(b.parameter("J")), E(b.parameter("E")),
      I(b.parameter("I")), k(b.parameter("k")), A(b.parameter("A")), G(b.parameter("G"));
  ScalarExpr w10(b.jet("w", {1, 0})), w01(b.jet("w", {0, 1}));
  ScalarExpr phi(b.jet("phi", {0, 0})), phi10(b.jet("phi", {1, 0})), phi01(b.jet("phi", {0, 1}));
  ScalarExpr half(Rational(1, 2));
  ScalarExpr L = half * rho * pow(w10, 2) + half * J * pow(phi10, 2) -
                 half * E * I * pow(phi01, 2) - half * k * A * G * pow(w01 - phi, 2);
  return Density(b, L, 1);
}

/// Euler-Bernoulli beam: L = 1/2 rho*A*w_t^2 - 1/2 E*I*w_XX^2 over (t, X).
inline Density euler_bernoulli() {
  BundleSpec b({{"t", true}, {"X", false}}, {"w"}, {"rho", "A", "E", "I"});
  ScalarExpr rho(b.parameter("rho")), A(b.parameter("A")), E(b.parameter("E")), I(b.parameter("I"));
  ScalarExpr w10(b.jet("w", {1, 0})), w02(b.jet("w", {0, 2}));
  ScalarExpr half(Rational(1, 2));
  return Density(b, half * rho * A * pow(w10, 2) - half * E * I * pow(w02, 2), 2);
}

/// Kirchhoff plate over (t, X, Y), physical constants normalized except the
/// Poisson ratio nu:
/// L = 1/2 w_t^2 - 1/2 (w_XX^2 + w_YY^2 + 2 nu w_XX w_YY + 2(1-nu) w_XY^2)
inline Density kirchhoff() {
  BundleSpec b({{"t", true}, {"X", false}, {"Y", false}}, {"w"}, {"nu"});
  ScalarExpr nu(b.parameter("nu"));
  ScalarExpr w100(b.jet("w", {1, 0, 0})), w020(b.jet("w", {0, 2, 0})), w002(b.jet("w", {0, 0, 2})),
      w011(b.jet("w", {0, 1, 1}));
  ScalarExpr half(Rational(1, 2));
  ScalarExpr L = half * pow(w100, 2) -
                 half * (pow(w020, 2) + pow(w002, 2) + ScalarExpr(2) * nu * w020 * w002 +
                         ScalarExpr(2) * (ScalarExpr(1) - nu) * pow(w011, 2));
  return Density(b, L, 2);
}

/// Kirchhoff plate in port-Hamiltonian form over spatial (X, Y) with momentum
/// p: H = 1/2 p^2 + 1/2 (w_XX^2 + w_YY^2 + 2 nu w_XX w_YY + 2(1-nu) w_XY^2),
/// canonical skew structure, no dissipation, no inputs.
inline PHSystem kirchhoff_ph() {
  BundleSpec b({{"X", false}, {"Y", false}}, {"w", "p"}, {"nu"});
  ScalarExpr nu(b.parameter("nu"));
  ScalarExpr p(b.jet("p", {0, 0}));
  ScalarExpr w20(b.jet("w", {2, 0})), w02(b.jet("w", {0, 2})), w11(b.jet("w", {1, 1}));
  ScalarExpr half(Rational(1, 2));
  ScalarExpr H = half * pow(p, 2) +
                 half * (pow(w20, 2) + pow(w02, 2) + ScalarExpr(2) * nu * w20 * w02 +
                         ScalarExpr(2) * (ScalarExpr(1) - nu) * pow(w11, 2));
  ExprMatrix Jm{{ScalarExpr(0), ScalarExpr(1)}, {ScalarExpr(-1), ScalarExpr(0)}};
  ExprMatrix Rm{{ScalarExpr(0), ScalarExpr(0)}, {ScalarExpr(0), ScalarExpr(0)}};
  return PHSystem(b, Density(b, H, 2), Jm, Rm, {}, {});
}

/// Euler-Bernoulli beam in port-Hamiltonian form over spatial (X) with unit
/// mass density: H = 1/2 p^2 + 1/2 E*I*w_XX^2.
inline PHSystem beam_ph() {
  BundleSpec b({{"X", false}}, {"w", "p"}, {"E", "I"});
  ScalarExpr E(b.parameter("E")), I(b.parameter("I"));
  ScalarExpr p(b.jet("p", {0}));
  ScalarExpr w2(b.jet("w", {2}));
  ScalarExpr half(Rational(1, 2));
  ScalarExpr H = half * pow(p, 2) + half * E * I * pow(w2, 2);
  ExprMatrix Jm{{ScalarExpr(0), ScalarExpr(1)}, {ScalarExpr(-1), ScalarExpr(0)}};
  ExprMatrix Rm{{ScalarExpr(0), ScalarExpr(0)}, {ScalarExpr(0), ScalarExpr(0)}};
  return PHSystem(b, Density(b, H, 2), Jm, Rm, {}, {});
}

}  // namespace fixtures
