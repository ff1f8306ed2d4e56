#pragma once
// Euler-Lagrange operator for first- and second-order densities, the Cartan
// coefficient solver with the boundary-adapted choice, extraction of the
// minimal boundary conditions on a coordinate face, the non-adapted comparison
// report, and the symbolic decomposition-identity verifier.
//
// Coefficient conventions for a density L of order <= 2:
//   rho2[a][k][j] + rho2[a][j][k] = dL/dx^a_{1_k+1_j}   (k != j)
//   rho2[a][k][k]                 = dL/dx^a_{1_k+1_k}
//   rho1[a][l] = dL/dx^a_{1_l} - sum_j d_{1_j} rho2[a][l][j]
// The adapted choice zeroes rho2[a][k][face] for k != face, which makes the
// face report close under the independent boundary variations (slots for
// x^a and its face-normal derivative only).

#include <vector>

#include "varicart/jetcalc.hpp"

namespace varicart {

class time_boundary_error : public model_error {
 public:
  explicit time_boundary_error(const std::string& what) : model_error(what) {}
};

struct SplitChoice {
  enum class Rule { adapted, weighted };
  Rule rule = Rule::adapted;
  Rational weight = Rational(1, 2);  // share assigned to rho2[a][k][j] with k < j

  static SplitChoice adapted() { return SplitChoice{Rule::adapted, Rational(1, 2)}; }
  static SplitChoice symmetric() { return SplitChoice{Rule::weighted, Rational(1, 2)}; }
  static SplitChoice weighted(Rational w) { return SplitChoice{Rule::weighted, w}; }
};

struct CartanCoefficients {
  std::size_t face = 0;
  std::vector<std::vector<ScalarExpr>> rho1;               // [alpha][l]
  std::vector<std::vector<std::vector<ScalarExpr>>> rho2;  // [alpha][k][j]
};

enum class FaceSide { min, max, unspecified };

struct BoundarySlot {
  Symbol slot;       // eta[x] or eta[x][...1_face...] (v[...] in the PH layer)
  ScalarExpr coeff;  // density coefficient paired with Omega_d = d_face _| Omega
};

struct BoundaryReport {
  std::size_t face = 0;
  FaceSide side = FaceSide::unspecified;
  int orientation_sign = +1;  // outward-flux sign: +1 at the max side, -1 at the min side
  int face_volume_sign = +1;  // Omega_d = face_volume_sign * dX^1^...^dX^r with dX^face omitted
  std::vector<BoundarySlot> entries;
};

/// Sign of d_face _| (dX^1 ^ ... ^ dX^r) relative to the positive boundary
/// volume with the face direction omitted.
inline int face_volume_sign(std::size_t face) { return face % 2 == 0 ? +1 : -1; }

// ---------------------------------------------------------------------------
// Euler-Lagrange operator
// ---------------------------------------------------------------------------

/// delta_alpha L = sum over distinct multi-indices #I <= 2 of
/// (-1)^{#I} d_I (dL/dx^alpha_I), in canonical form.
inline std::vector<ScalarExpr> euler_lagrange(const Density& L) {
  L.validate();
  const auto& bundle = L.bundle;
  Polynomial lp = to_polynomial(L.expr);
  std::vector<ScalarExpr> out;
  for (std::size_t alpha = 0; alpha < bundle.m(); ++alpha) {
    Polynomial acc;
    for (const auto& I : all_multi_indices(bundle.r(), 2)) {
      Polynomial partial = lp.diff(bundle.jet(alpha, I));
      if (partial.is_zero()) continue;
      for (std::size_t dir = 0; dir < bundle.r(); ++dir)
        for (int k = 0; k < I[dir]; ++k) partial = detail::total_derivative_poly(partial, dir);
      acc = (I.order() % 2 == 0) ? acc + partial : acc - partial;
    }
    out.push_back(from_polynomial(acc));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cartan coefficients
// ---------------------------------------------------------------------------

inline void require_spatial_face(const BundleSpec& bundle, std::size_t face) {
  if (face >= bundle.r()) throw model_error("boundary face index out of range");
  if (bundle.is_time(face))
    throw time_boundary_error("face '" + bundle.independent()[face].name +
                              "' is time-flagged: no variation on the time boundary");
}

inline CartanCoefficients cartan_coefficients(const Density& L, std::size_t face,
                                              const SplitChoice& split = SplitChoice::adapted()) {
  L.validate();
  const auto& bundle = L.bundle;
  require_spatial_face(bundle, face);
  const std::size_t r = bundle.r(), m = bundle.m();
  Polynomial lp = to_polynomial(L.expr);

  CartanCoefficients cc;
  cc.face = face;
  cc.rho2.assign(m, std::vector<std::vector<ScalarExpr>>(r, std::vector<ScalarExpr>(r, ScalarExpr())));
  cc.rho1.assign(m, std::vector<ScalarExpr>(r, ScalarExpr()));

  for (std::size_t alpha = 0; alpha < m; ++alpha) {
    std::vector<std::vector<Polynomial>> rho2(r, std::vector<Polynomial>(r));
    for (std::size_t k = 0; k < r; ++k) {
      // Diagonal coefficients are fixed by the symmetric-sum condition.
      MultiIndex kk = MultiIndex::unit(r, k).plus(MultiIndex::unit(r, k));
      rho2[k][k] = lp.diff(bundle.jet(alpha, kk));
      for (std::size_t j = k + 1; j < r; ++j) {
        Polynomial mixed = lp.diff(bundle.jet(alpha, MultiIndex::unit(r, k).plus(MultiIndex::unit(r, j))));
        if (split.rule == SplitChoice::Rule::adapted && j == face) {
          // rho2[a][k][face] = 0, so the partner takes the whole mixed partial.
          rho2[j][k] = mixed;
        } else if (split.rule == SplitChoice::Rule::adapted && k == face) {
          rho2[k][j] = mixed;
        } else {
          rho2[k][j] = mixed.scaled(split.weight);
          rho2[j][k] = mixed.scaled(Rational(1) - split.weight);
        }
      }
    }
    for (std::size_t l = 0; l < r; ++l) {
      Polynomial rho1 = lp.diff(bundle.jet(alpha, MultiIndex::unit(r, l)));
      for (std::size_t j = 0; j < r; ++j)
        rho1 = rho1 - detail::total_derivative_poly(rho2[l][j], j);
      cc.rho1[alpha][l] = from_polynomial(rho1);
    }
    for (std::size_t k = 0; k < r; ++k)
      for (std::size_t j = 0; j < r; ++j) cc.rho2[alpha][k][j] = from_polynomial(rho2[k][j]);
  }
  return cc;
}

// ---------------------------------------------------------------------------
// Boundary reports
// ---------------------------------------------------------------------------

namespace detail {

inline BoundaryReport boundary_report_from(const Density& L, const CartanCoefficients& cc,
                                           bool all_first_order_slots, const std::string& prefix) {
  const auto& bundle = L.bundle;
  const std::size_t face = cc.face;
  BoundaryReport report;
  report.face = face;
  report.face_volume_sign = face_volume_sign(face);
  for (std::size_t alpha = 0; alpha < bundle.m(); ++alpha)
    if (!is_zero(cc.rho1[alpha][face]))
      report.entries.push_back({bundle.slot(alpha, MultiIndex(bundle.r()), prefix),
                                canonicalize(cc.rho1[alpha][face])});
  for (std::size_t alpha = 0; alpha < bundle.m(); ++alpha)
    for (std::size_t k = 0; k < bundle.r(); ++k) {
      if (!all_first_order_slots && k != face) continue;
      const ScalarExpr& coeff = cc.rho2[alpha][k][face];
      if (is_zero(coeff)) continue;
      report.entries.push_back(
          {bundle.slot(alpha, MultiIndex::unit(bundle.r(), k), prefix), canonicalize(coeff)});
    }
  return report;
}

}  // namespace detail

/// Minimal boundary report on a coordinate face: at most one slot per field
/// plus one per face-normal derivative, with the boundary-adapted choice.
/// Zero-coefficient slots are omitted.
inline BoundaryReport boundary_terms(const Density& L, std::size_t face,
                                     const std::string& slot_prefix = "eta") {
  auto cc = cartan_coefficients(L, face, SplitChoice::adapted());
  return detail::boundary_report_from(L, cc, false, slot_prefix);
}

/// Boundary report with a non-adapted split. Tangential-derivative slots may
/// appear; used to demonstrate non-minimality of naive coefficient choices.
inline BoundaryReport boundary_terms_naive(const Density& L, std::size_t face,
                                           const SplitChoice& split = SplitChoice::symmetric(),
                                           const std::string& slot_prefix = "eta") {
  auto cc = cartan_coefficients(L, face, split);
  return detail::boundary_report_from(L, cc, true, slot_prefix);
}

// ---------------------------------------------------------------------------
// Decomposition identity
// ---------------------------------------------------------------------------

/// Residual of the pointwise decomposition
///   sum_{#J<=2} (d_J eta^a) dL/dx^a_J
///     = eta^a delta_a L + sum_i d_{1_i}( rho1[a][i] eta^a + rho2[a][k][i] eta^a_{1_k} ).
/// Canonically zero for every coefficient set satisfying the symmetric-sum and
/// first-order conditions, for any split and any face.
inline ScalarExpr verify_decomposition(const Density& L, std::size_t face,
                                       const SplitChoice& split = SplitChoice::adapted()) {
  const auto& bundle = L.bundle;
  auto cc = cartan_coefficients(L, face, split);
  auto delta = euler_lagrange(L);
  Polynomial lp = to_polynomial(L.expr);

  Polynomial residual;
  // Lie-derivative side: variations through every jet slot.
  for (std::size_t alpha = 0; alpha < bundle.m(); ++alpha)
    for (const auto& J : all_multi_indices(bundle.r(), 2)) {
      Polynomial partial = lp.diff(bundle.jet(alpha, J));
      if (partial.is_zero()) continue;
      residual = residual + partial * Polynomial(bundle.slot(alpha, J));
    }
  // Euler-Lagrange part.
  for (std::size_t alpha = 0; alpha < bundle.m(); ++alpha)
    residual = residual - to_polynomial(delta[alpha]) * Polynomial(bundle.slot(alpha, MultiIndex(bundle.r())));
  // Divergence of the boundary currents.
  for (std::size_t i = 0; i < bundle.r(); ++i) {
    Polynomial current;
    for (std::size_t alpha = 0; alpha < bundle.m(); ++alpha) {
      current = current + to_polynomial(cc.rho1[alpha][i]) *
                              Polynomial(bundle.slot(alpha, MultiIndex(bundle.r())));
      for (std::size_t k = 0; k < bundle.r(); ++k)
        current = current + to_polynomial(cc.rho2[alpha][k][i]) *
                                Polynomial(bundle.slot(alpha, MultiIndex::unit(bundle.r(), k)));
    }
    residual = residual - detail::total_derivative_poly(current, i);
  }
  return from_polynomial(residual);
}

/// Flip the overall sign so the first canonical term is positive; handy when
/// printing equations of the form e = 0.
inline ScalarExpr normalize_equation_sign(const ScalarExpr& e) {
  Polynomial p = to_polynomial(e);
  if (!p.is_zero() && p.terms().begin()->second.is_negative()) return from_polynomial(-p);
  return from_polynomial(p);
}

}  // namespace varicart
