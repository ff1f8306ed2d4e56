#pragma once
// Total derivatives on jet expressions and prolongation of vertical fields.
// Jet variables are formal coordinates: the total derivative in direction i
// maps x^alpha_J to x^alpha_{J+1_i} and annihilates parameters. Densities
// never depend explicitly on the base coordinates, so no partial term arises.

#include <map>
#include <vector>

#include "varicart/bundle.hpp"

namespace varicart {

namespace detail {

inline Polynomial total_derivative_poly(const Polynomial& p, std::size_t dir) {
  Polynomial out;
  for (const auto& s : p.symbols()) {
    switch (s.kind()) {
      case SymbolKind::jet:
      case SymbolKind::slot: {
        if (dir >= s.jet_index().size())
          throw expr_error("total derivative direction out of range for '" + s.str() + "'");
        Polynomial d = p.diff(s);
        if (!d.is_zero()) out = out + d * Polynomial(s.raised(dir));
        break;
      }
      case SymbolKind::parameter:
      case SymbolKind::input:
        break;  // constants along the base
      case SymbolKind::independent:
        throw expr_error("explicit independent variable '" + s.name() +
                         "' in a jet expression is unsupported");
    }
  }
  return out;
}

}  // namespace detail

/// d_{1_i}: raises the jet order by at most one; result is canonical.
inline ScalarExpr total_derivative(const ScalarExpr& e, std::size_t dir) {
  return from_polynomial(detail::total_derivative_poly(to_polynomial(e), dir));
}

/// d_J as the composition of single total derivatives; the application order
/// does not matter.
inline ScalarExpr total_derivative_multi(const ScalarExpr& e, const MultiIndex& j) {
  Polynomial p = to_polynomial(e);
  for (std::size_t dir = 0; dir < j.size(); ++dir)
    for (int k = 0; k < j[dir]; ++k) p = detail::total_derivative_poly(p, dir);
  return from_polynomial(p);
}

/// Components of the n-th jet prolongation of a vertical field: one fresh slot
/// symbol per dependent variable and multi-index of order <= n. Mixed indices
/// appear once (jet coordinates are symmetric).
struct Prolongation {
  // per dependent alpha: (J, slot symbol) in canonical multi-index order
  std::vector<std::vector<std::pair<MultiIndex, Symbol>>> components;
};

inline Prolongation prolong_vertical_field(const BundleSpec& bundle, int n,
                                           const std::string& prefix = "eta") {
  if (n < 0 || n > 2) throw unsupported_order_error("unsupported-order: prolongation limited to n <= 2");
  Prolongation out;
  out.components.resize(bundle.m());
  auto indices = all_multi_indices(bundle.r(), n);
  for (std::size_t alpha = 0; alpha < bundle.m(); ++alpha)
    for (const auto& j : indices)
      out.components[alpha].emplace_back(j, bundle.slot(alpha, j, prefix));
  return out;
}

}  // namespace varicart
