#pragma once
// Port-Hamiltonian layer on spatial bundles: structural validation of the
// J/R/G maps, the evolution field v = (J - R)(delta H) + G u, and the power
// balance split into domain dissipation, domain ports and collocated boundary
// ports on a coordinate face.

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "varicart/cartan.hpp"

namespace varicart {

class structure_error : public model_error {
 public:
  explicit structure_error(const std::string& what) : model_error(what) {}
};

using ExprMatrix = std::vector<std::vector<ScalarExpr>>;

struct PHSystem {
  BundleSpec bundle;  // spatial directions only; time is the evolution parameter
  Density H;
  ExprMatrix Jmat;  // m x m, skew-symmetric
  ExprMatrix Rmat;  // m x m, symmetric positive semi-definite
  ExprMatrix Gmat;  // m x p
  std::vector<Symbol> inputs;  // p input symbols

  PHSystem() = default;
  PHSystem(BundleSpec b, Density h, ExprMatrix jm, ExprMatrix rm, ExprMatrix gm,
           std::vector<Symbol> u)
      : bundle(std::move(b)),
        H(std::move(h)),
        Jmat(std::move(jm)),
        Rmat(std::move(rm)),
        Gmat(std::move(gm)),
        inputs(std::move(u)) {
    check_shapes();
  }

  std::size_t input_count() const { return inputs.size(); }

  void check_shapes() const {
    for (const auto& v : bundle.independent())
      if (v.is_time)
        throw model_error("port-Hamiltonian bundles use spatial directions only; '" + v.name +
                          "' is time-flagged");
    auto square = [&](const ExprMatrix& mat, const char* name) {
      if (mat.size() != bundle.m()) throw model_error(std::string(name) + " must be m x m");
      for (const auto& row : mat)
        if (row.size() != bundle.m()) throw model_error(std::string(name) + " must be m x m");
    };
    square(Jmat, "structure matrix J");
    square(Rmat, "structure matrix R");
    if (!Gmat.empty()) {
      if (Gmat.size() != bundle.m()) throw model_error("input map G must have m rows");
      for (const auto& row : Gmat)
        if (row.size() != inputs.size())
          throw model_error("input map G must have one column per input");
    } else if (!inputs.empty()) {
      throw model_error("inputs declared but input map G is empty");
    }
  }
};

struct Violation {
  std::string code;    // e.g. "skew", "symmetric", "psd", "operator-freedom"
  std::string detail;
};

namespace detail {

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations.
inline std::vector<double> symmetric_eigenvalues(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a[i][j] * a[i][j];
    if (off < 1e-26) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        double theta = (a[q][q] - a[p][p]) / (2 * a[p][q]);
        double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a[i][i];
  return ev;
}

inline void check_operator_free(const ExprMatrix& mat, const char* name,
                                std::vector<Violation>& out) {
  for (std::size_t a = 0; a < mat.size(); ++a)
    for (std::size_t b = 0; b < mat[a].size(); ++b)
      for (const auto& s : to_polynomial(mat[a][b]).symbols()) {
        bool ok = s.kind() == SymbolKind::parameter ||
                  (s.kind() == SymbolKind::jet && s.jet_index().order() == 0);
        if (!ok)
          out.push_back({"operator-freedom",
                         std::string(name) + "[" + std::to_string(a + 1) + "][" +
                             std::to_string(b + 1) + "] contains '" + s.str() +
                             "'; entries may use parameters and zeroth-order fields only"});
      }
}

}  // namespace detail

/// Structural checks: symbolic skew-symmetry of J, symbolic symmetry of R,
/// numeric positive semi-definiteness of R on seeded random valuations
/// (parameters in (0,2], fields in [-1,1]), and operator-freedom of all
/// entries. Returns the empty list when the system is valid.
inline std::vector<Violation> validate_structure(const PHSystem& sys, unsigned psd_samples = 128,
                                                 unsigned seed = 20240915) {
  std::vector<Violation> out;
  const std::size_t m = sys.bundle.m();

  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a; b < m; ++b) {
      if (!is_zero(sys.Jmat[a][b] + sys.Jmat[b][a]))
        out.push_back({"skew", "J[" + std::to_string(a + 1) + "][" + std::to_string(b + 1) +
                                   "] + J[" + std::to_string(b + 1) + "][" + std::to_string(a + 1) +
                                   "] != 0"});
      if (!equivalent(sys.Rmat[a][b], sys.Rmat[b][a]))
        out.push_back({"symmetric", "R[" + std::to_string(a + 1) + "][" + std::to_string(b + 1) +
                                        "] != R[" + std::to_string(b + 1) + "][" +
                                        std::to_string(a + 1) + "]"});
    }

  detail::check_operator_free(sys.Jmat, "J", out);
  detail::check_operator_free(sys.Rmat, "R", out);
  detail::check_operator_free(sys.Gmat, "G", out);

  // Collect the symbols appearing in R once; sample them per trial.
  std::set<Symbol> rsyms;
  for (const auto& row : sys.Rmat)
    for (const auto& e : row)
      for (const auto& s : to_polynomial(e).symbols()) rsyms.insert(s);

  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> par(0.0, 2.0), fld(-1.0, 1.0);
  for (unsigned trial = 0; trial < psd_samples; ++trial) {
    std::map<Symbol, double> env;
    for (const auto& s : rsyms)
      env[s] = s.kind() == SymbolKind::parameter ? std::max(par(rng), 1e-6) : fld(rng);
    std::vector<std::vector<double>> rv(m, std::vector<double>(m, 0.0));
    bool evaluable = true;
    for (std::size_t a = 0; a < m && evaluable; ++a)
      for (std::size_t b = 0; b < m && evaluable; ++b) {
        try {
          rv[a][b] = eval_numeric(sys.Rmat[a][b], env);
        } catch (const eval_error&) {
          evaluable = false;
        }
      }
    if (!evaluable) continue;
    auto ev = detail::symmetric_eigenvalues(rv);
    double lo = 0;
    for (double e : ev) lo = std::min(lo, e);
    if (lo < -1e-10) {
      std::ostringstream witness;
      witness << "R has eigenvalue " << lo << " at valuation {";
      bool first = true;
      for (const auto& [s, v] : env) {
        if (!first) witness << ", ";
        first = false;
        witness << s.str() << "=" << v;
      }
      witness << "}";
      out.push_back({"psd", witness.str()});
      break;
    }
  }
  return out;
}

/// Variational derivative of the Hamiltonian density (the same second-order
/// Euler-Lagrange operator as in the Lagrangian picture).
inline std::vector<ScalarExpr> variational_derivative(const Density& H) {
  return euler_lagrange(H);
}

/// v^alpha = sum_beta (J - R)[alpha][beta] * delta_beta H + sum_xi G[alpha][xi] u^xi.
/// Structural violations are reported before any computation.
inline std::vector<ScalarExpr> evolution_field(const PHSystem& sys) {
  sys.check_shapes();
  if (auto violations = validate_structure(sys); !violations.empty()) {
    std::string msg = "invalid port-Hamiltonian structure:";
    for (const auto& v : violations) msg += "\n  [" + v.code + "] " + v.detail;
    throw structure_error(msg);
  }
  auto delta = variational_derivative(sys.H);
  std::vector<ScalarExpr> v;
  for (std::size_t a = 0; a < sys.bundle.m(); ++a) {
    Polynomial acc;
    for (std::size_t b = 0; b < sys.bundle.m(); ++b)
      acc = acc + (to_polynomial(sys.Jmat[a][b]) - to_polynomial(sys.Rmat[a][b])) *
                      to_polynomial(delta[b]);
    for (std::size_t xi = 0; xi < sys.input_count(); ++xi)
      acc = acc + to_polynomial(sys.Gmat[a][xi]) * Polynomial(sys.inputs[xi]);
    v.push_back(from_polynomial(acc));
  }
  return v;
}

struct PowerBalance {
  ScalarExpr domain_dissipation;               // -delta_a H R^{ab} delta_b H
  ScalarExpr domain_port;                      // y_xi u^xi
  std::vector<ScalarExpr> collocated_outputs;  // y = G* (delta H)
  BoundaryReport boundary;                     // slots v[x], v[x][1_face] with rho coefficients
};

/// Power-balance decomposition for a spatial face. Boundary slots equal the
/// Lagrangian-picture boundary report of H with eta slots renamed to v slots.
/// Structural violations are reported before any computation.
inline PowerBalance power_balance(const PHSystem& sys, std::size_t face) {
  sys.check_shapes();
  if (auto violations = validate_structure(sys); !violations.empty()) {
    std::string msg = "invalid port-Hamiltonian structure:";
    for (const auto& v : violations) msg += "\n  [" + v.code + "] " + v.detail;
    throw structure_error(msg);
  }
  auto delta = variational_derivative(sys.H);

  PowerBalance pb;
  Polynomial diss;
  for (std::size_t a = 0; a < sys.bundle.m(); ++a)
    for (std::size_t b = 0; b < sys.bundle.m(); ++b)
      diss = diss - to_polynomial(delta[a]) * to_polynomial(sys.Rmat[a][b]) * to_polynomial(delta[b]);
  pb.domain_dissipation = from_polynomial(diss);

  Polynomial port;
  for (std::size_t xi = 0; xi < sys.input_count(); ++xi) {
    Polynomial y;
    for (std::size_t a = 0; a < sys.bundle.m(); ++a)
      y = y + to_polynomial(sys.Gmat[a][xi]) * to_polynomial(delta[a]);
    pb.collocated_outputs.push_back(from_polynomial(y));
    port = port + y * Polynomial(sys.inputs[xi]);
  }
  pb.domain_port = from_polynomial(port);

  pb.boundary = boundary_terms(sys.H, face, "v");
  return pb;
}

}  // namespace varicart
