#pragma once
// Numerical audit of the symbolic power balance. The port-Hamiltonian
// evolution equations are discretized with second-order central stencils in
// one or two spatial dimensions, integrated with a classical fourth-order
// one-step scheme, and the computed dH/dt is compared against the boundary
// flux assembled from the collocated port report.
//
// Boundary closures work through two ghost layers per face:
//   clamped   field and normal derivative prescribed to zero: the face line is
//             pinned and ghosts mirror the interior.
//   free      the two report coefficients are forced to zero; each condition
//             determines one ghost layer through its central stencil at the
//             face node (conditions must be linear in the jets).
//   periodic  both faces of a direction wrap.
// Two-dimensional grids support a periodic direction crossed with any pair of
// face policies, or clamped faces all around (corner ghosts are the tensor
// product of the two reflections). A free face needs a periodic tangential
// direction.

#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>

#include "varicart/porthamil.hpp"

namespace varicart {

class stability_error : public model_error {
 public:
  explicit stability_error(const std::string& what) : model_error(what) {}
};

class discretize_error : public model_error {
 public:
  explicit discretize_error(const std::string& what) : model_error(what) {}
};

enum class FacePolicy { clamped, free, periodic };

struct GridSpec {
  std::vector<std::size_t> nodes;                     // per direction, >= 8
  std::vector<double> extent;                         // domain length per direction
  std::vector<std::array<FacePolicy, 2>> policy;      // per direction {min side, max side}
};

namespace fd {

/// Second-order central stencil weights for derivative counts 0..4
/// (unscaled; divide by h^count).
inline const std::vector<std::pair<int, double>>& stencil(int count) {
  static const std::vector<std::vector<std::pair<int, double>>> table = {
      {{0, 1.0}},
      {{-1, -0.5}, {1, 0.5}},
      {{-1, 1.0}, {0, -2.0}, {1, 1.0}},
      {{-2, -0.5}, {-1, 1.0}, {1, -1.0}, {2, 0.5}},
      {{-2, 1.0}, {-1, -4.0}, {0, 6.0}, {1, -4.0}, {2, 1.0}},
  };
  if (count < 0 || count > 4)
    throw discretize_error("stencils are available for derivative counts 0..4 only");
  return table[static_cast<std::size_t>(count)];
}

inline int halfwidth(int count) { return count <= 0 ? 0 : (count <= 2 ? 1 : 2); }

}  // namespace fd

// ---------------------------------------------------------------------------
// Grid and fields
// ---------------------------------------------------------------------------

class Grid {
 public:
  static constexpr long margin = 2;

  explicit Grid(const GridSpec& spec) : spec_(spec) {
    dims_ = spec.nodes.size();
    if (dims_ < 1 || dims_ > 2) throw discretize_error("grids support 1 or 2 spatial dimensions");
    if (spec.extent.size() != dims_ || spec.policy.size() != dims_)
      throw discretize_error("grid spec arrays must have one entry per dimension");
    for (std::size_t d = 0; d < dims_; ++d) {
      if (spec.nodes[d] < 8) throw discretize_error("grids need at least 8 nodes per direction");
      bool per_min = spec.policy[d][0] == FacePolicy::periodic;
      bool per_max = spec.policy[d][1] == FacePolicy::periodic;
      if (per_min != per_max)
        throw discretize_error("periodic closure applies to both faces of a direction");
      periodic_[d] = per_min;
      n_[d] = spec.nodes[d];
      h_[d] = periodic_[d] ? spec.extent[d] / static_cast<double>(n_[d])
                           : spec.extent[d] / static_cast<double>(n_[d] - 1);
    }
    for (std::size_t d = 0; d < dims_; ++d)
      for (int side = 0; side < 2; ++side)
        if (spec.policy[d][side] == FacePolicy::free) {
          if (dims_ == 2 && !periodic_[1 - d])
            throw discretize_error(
                "free faces require a periodic tangential direction in this version");
        }
    stride_[dims_ - 1] = 1;
    if (dims_ == 2) stride_[0] = static_cast<long>(n_[1]) + 2 * margin;
    padded_ = 1;
    for (std::size_t d = 0; d < dims_; ++d) padded_ *= n_[d] + 2 * static_cast<std::size_t>(margin);
  }

  std::size_t dims() const { return dims_; }
  std::size_t nodes(std::size_t d) const { return n_[d]; }
  double spacing(std::size_t d) const { return h_[d]; }
  double min_spacing() const { return dims_ == 1 ? h_[0] : std::min(h_[0], h_[1]); }
  bool periodic(std::size_t d) const { return periodic_[d]; }
  FacePolicy policy(std::size_t d, int side) const { return spec_.policy[d][side]; }
  std::size_t padded_size() const { return padded_; }

  /// Flat index of logical node coordinates; ghosts use negative or >= n
  /// coordinates within the margin.
  long at(long i, long j = 0) const {
    if (dims_ == 1) return i + margin;
    return (i + margin) * stride_[0] + (j + margin);
  }
  long flat_offset(const std::array<int, 2>& off) const {
    return dims_ == 1 ? off[0] : off[0] * stride_[0] + off[1];
  }

  double coord(std::size_t d, long i) const { return static_cast<double>(i) * h_[d]; }

  /// Maps a padded flat index to its canonical cell: coordinates along
  /// periodic directions are wrapped into range, everything else is kept.
  long canonical_flat(long flat) const {
    long i, j = 0;
    if (dims_ == 1) {
      i = flat - margin;
    } else {
      i = flat / stride_[0] - margin;
      j = flat % stride_[0] - margin;
    }
    auto wrap = [](long c, long n) { return ((c % n) + n) % n; };
    if (periodic_[0]) i = wrap(i, static_cast<long>(n_[0]));
    if (dims_ == 2 && periodic_[1]) j = wrap(j, static_cast<long>(n_[1]));
    return at(i, j);
  }

  /// Composite trapezoid weight of a node (uniform along periodic directions).
  double quad_weight(long i, long j = 0) const {
    double w = 1.0;
    std::array<long, 2> idx{i, j};
    for (std::size_t d = 0; d < dims_; ++d) {
      double wd = h_[d];
      if (!periodic_[d] && (idx[d] == 0 || idx[d] == static_cast<long>(n_[d]) - 1)) wd *= 0.5;
      w *= wd;
    }
    return w;
  }

  template <typename Fn>
  void for_interior(Fn&& fn) const {
    if (dims_ == 1) {
      for (long i = 0; i < static_cast<long>(n_[0]); ++i) fn(i, 0L);
    } else {
      for (long i = 0; i < static_cast<long>(n_[0]); ++i)
        for (long j = 0; j < static_cast<long>(n_[1]); ++j) fn(i, j);
    }
  }

 private:
  GridSpec spec_;
  std::size_t dims_ = 1;
  std::array<std::size_t, 2> n_{1, 1};
  std::array<double, 2> h_{1.0, 1.0};
  std::array<bool, 2> periodic_{false, false};
  std::array<long, 2> stride_{1, 1};
  std::size_t padded_ = 0;
};

using Field = std::vector<double>;  // padded storage, ghosts included

struct GridState {
  std::vector<Field> fields;  // one padded field per dependent variable
};

// ---------------------------------------------------------------------------
// Compiled polynomial evaluation over grid jets
// ---------------------------------------------------------------------------

namespace detail {

struct CompiledFactor {
  std::size_t alpha;
  std::array<int, 2> counts;  // derivative counts per direction
  int exp;
};

struct CompiledTerm {
  double coeff;
  std::vector<CompiledFactor> factors;
};

struct CompiledExpr {
  std::vector<CompiledTerm> terms;
};

inline CompiledExpr compile_expr(const ScalarExpr& e, const std::map<Symbol, double>& params) {
  CompiledExpr out;
  Polynomial poly = to_polynomial(e);
  for (const auto& [mono, coeff] : poly.terms()) {
    CompiledTerm term;
    term.coeff = coeff.to_double();
    for (const auto& [sym, exp] : mono.factors()) {
      switch (sym.kind()) {
        case SymbolKind::parameter: {
          auto it = params.find(sym);
          if (it == params.end())
            throw eval_error("no numeric value supplied for parameter '" + sym.name() + "'");
          for (int k = 0; k < exp; ++k) term.coeff *= it->second;
          break;
        }
        case SymbolKind::input:
          term.coeff = 0.0;  // inputs are held at zero in the numerical audit
          break;
        case SymbolKind::jet: {
          CompiledFactor f;
          f.alpha = static_cast<std::size_t>(sym.dep_index());
          f.counts = {0, 0};
          for (std::size_t d = 0; d < sym.jet_index().size(); ++d) {
            if (sym.jet_index()[d] > 4)
              throw discretize_error("jet derivative count exceeds the supported stencils");
            f.counts[d] = sym.jet_index()[d];
          }
          if (sym.jet_index().size() > 2)
            throw discretize_error("numerical audits support 1 or 2 spatial dimensions");
          f.exp = exp;
          term.factors.push_back(f);
          break;
        }
        default:
          throw eval_error("cannot evaluate symbol '" + sym.str() + "' on a grid");
      }
    }
    if (term.coeff != 0.0) out.terms.push_back(std::move(term));
  }
  return out;
}

/// Flattened tensor-product stencil taps for one jet factor.
struct FlatStencil {
  std::vector<std::pair<long, double>> taps;
};

inline FlatStencil flatten_stencil(const Grid& grid, const std::array<int, 2>& counts) {
  FlatStencil fs;
  const auto& sx = fd::stencil(counts[0]);
  double scale_x = std::pow(grid.spacing(0), -counts[0]);
  if (grid.dims() == 1) {
    for (const auto& [off, w] : sx)
      fs.taps.emplace_back(grid.flat_offset({off, 0}), w * scale_x);
    return fs;
  }
  const auto& sy = fd::stencil(counts[1]);
  double scale_y = std::pow(grid.spacing(1), -counts[1]);
  for (const auto& [ox, wx] : sx)
    for (const auto& [oy, wy] : sy)
      fs.taps.emplace_back(grid.flat_offset({ox, oy}), wx * scale_x * wy * scale_y);
  return fs;
}

/// A compiled expression bound to a grid: jet factors carry flat stencils.
struct GridExpr {
  struct Factor {
    std::size_t alpha;
    FlatStencil stencil;
    int exp;
  };
  struct Term {
    double coeff;
    std::vector<Factor> factors;
  };
  std::vector<Term> terms;

  double eval(const std::vector<Field>& fields, long base) const {
    double acc = 0;
    for (const auto& term : terms) {
      double t = term.coeff;
      for (const auto& f : term.factors) {
        double jet = 0;
        const double* data = fields[f.alpha].data() + base;
        for (const auto& [off, w] : f.stencil.taps) jet += w * data[off];
        for (int k = 0; k < f.exp; ++k) t *= jet;
      }
      acc += t;
    }
    return acc;
  }
};

inline GridExpr bind_expr(const CompiledExpr& ce, const Grid& grid) {
  GridExpr ge;
  for (const auto& term : ce.terms) {
    GridExpr::Term t;
    t.coeff = term.coeff;
    for (const auto& f : term.factors)
      t.factors.push_back({f.alpha, flatten_stencil(grid, f.counts), f.exp});
    ge.terms.push_back(std::move(t));
  }
  return ge;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Semi-discrete port-Hamiltonian system
// ---------------------------------------------------------------------------

class SemiDiscretePH {
 public:
  SemiDiscretePH(const PHSystem& sys, const GridSpec& grid_spec,
                 const std::map<Symbol, double>& params)
      : grid_(grid_spec), bundle_(sys.bundle), params_(params) {
    if (bundle_.r() != grid_.dims())
      throw discretize_error("grid dimensionality must match the spatial bundle");

    auto v = evolution_field(sys);
    for (const auto& expr : v)
      velocity_.push_back(detail::bind_expr(detail::compile_expr(expr, params_), grid_));
    density_ = detail::bind_expr(detail::compile_expr(sys.H.expr, params_), grid_);

    // Per-jet partial derivatives of the density (for the discrete gradient).
    for (std::size_t a = 0; a < bundle_.m(); ++a)
      for (const auto& J : all_multi_indices(bundle_.r(), 2)) {
        ScalarExpr partial = diff_partial(sys.H.expr, bundle_.jet(a, J));
        if (is_zero(partial)) continue;
        std::array<int, 2> counts{0, 0};
        for (std::size_t d = 0; d < J.size(); ++d) counts[d] = J[d];
        density_partials_.push_back(
            {a, counts, detail::bind_expr(detail::compile_expr(partial, params_), grid_)});
      }

    // Boundary ports per non-periodic face.
    for (std::size_t d = 0; d < grid_.dims(); ++d) {
      if (grid_.periodic(d)) continue;
      PowerBalance pb = power_balance(sys, d);
      for (int side = 0; side < 2; ++side) {
        FacePorts fp;
        fp.dir = d;
        fp.side = side;
        fp.policy = grid_.policy(d, side);
        for (const auto& entry : pb.boundary.entries) {
          PortSlot slot;
          slot.alpha = static_cast<std::size_t>(entry.slot.dep_index());
          slot.normal_order = entry.slot.jet_index().order();  // 0 or 1
          slot.coeff =
              detail::bind_expr(detail::compile_expr(entry.coeff, params_), grid_);
          slot.coeff_expr = entry.coeff;
          fp.slots.push_back(std::move(slot));
        }
        faces_.push_back(std::move(fp));
      }
    }

    build_pin_mask();
    prepare_free_closures();
  }

  const Grid& grid() const { return grid_; }
  const BundleSpec& bundle() const { return bundle_; }

  GridState zero_state() const {
    GridState s;
    s.fields.assign(bundle_.m(), Field(grid_.padded_size(), 0.0));
    return s;
  }

  /// Fills one field from a function of the spatial coordinates and applies
  /// the pinned-node constraints.
  void set_field(GridState& s, std::size_t alpha,
                 const std::function<double(double, double)>& fn) const {
    grid_.for_interior([&](long i, long j) {
      s.fields[alpha][static_cast<std::size_t>(grid_.at(i, j))] =
          fn(grid_.coord(0, i), grid_.dims() == 2 ? grid_.coord(1, j) : 0.0);
    });
    apply_pins(s);
  }

  void apply_pins(GridState& s) const {
    for (std::size_t a = 0; a < s.fields.size(); ++a)
      for (long p : pinned_) s.fields[a][static_cast<std::size_t>(p)] = 0.0;
  }

  /// Fills ghost layers according to the face policies.
  void extend(GridState& s) const {
    for (auto& f : s.fields) extend_field(f);
  }

  /// Nodal evolution rates v^alpha; ghosts of `s` are refreshed.
  void derivative(GridState& s, GridState& out) const {
    extend(s);
    for (std::size_t a = 0; a < bundle_.m(); ++a) {
      Field& dst = out.fields[a];
      grid_.for_interior([&](long i, long j) {
        dst[static_cast<std::size_t>(grid_.at(i, j))] = velocity_[a].eval(s.fields, grid_.at(i, j));
      });
    }
    for (std::size_t a = 0; a < bundle_.m(); ++a)
      for (long p : pinned_) out.fields[a][static_cast<std::size_t>(p)] = 0.0;
  }

  /// Composite trapezoid quadrature of the Hamiltonian density.
  double hamiltonian(GridState& s) const {
    extend(s);
    double acc = 0;
    grid_.for_interior(
        [&](long i, long j) { acc += grid_.quad_weight(i, j) * density_.eval(s.fields, grid_.at(i, j)); });
    return acc;
  }

  /// Analytic gradient of the discrete Hamiltonian functional with respect to
  /// the nodal values, divided by the quadrature weights: the discrete
  /// counterpart of the variational derivative, closure effects included.
  std::vector<Field> delta_h(GridState& s) const {
    extend(s);
    std::vector<Field> grad(bundle_.m(), Field(grid_.padded_size(), 0.0));
    for (const auto& dp : density_partials_) {
      detail::FlatStencil st = detail::flatten_stencil(grid_, dp.counts);
      grid_.for_interior([&](long i, long j) {
        long base = grid_.at(i, j);
        double g = grid_.quad_weight(i, j) * dp.expr.eval(s.fields, base);
        if (g == 0.0) return;
        double* dst = grad[dp.alpha].data() + base;
        for (const auto& [off, w] : st.taps) dst[off] += w * g;
      });
    }
    for (auto& g : grad) fold_ghosts(g);
    for (std::size_t a = 0; a < bundle_.m(); ++a) {
      grid_.for_interior([&](long i, long j) {
        grad[a][static_cast<std::size_t>(grid_.at(i, j))] /= grid_.quad_weight(i, j);
      });
      for (long p : pinned_) grad[a][static_cast<std::size_t>(p)] = 0.0;
    }
    return grad;
  }

  /// Boundary flux: sum over non-periodic faces of the outward-signed face
  /// quadrature of sum_slots coeff * flow. Flows of prescribed (clamped)
  /// slots vanish identically; the face-normal flow of a free face is the
  /// one-sided derivative of the nodal rate field.
  double boundary_flux(GridState& s, const GridState& rate) const {
    extend(s);
    double total = 0;
    for (const auto& fp : faces_) {
      if (fp.policy == FacePolicy::clamped) continue;  // prescribed slots: zero flow
      double face_sum = 0;
      for_face(fp, [&](long i, long j, double weight) {
        long base = grid_.at(i, j);
        double node_sum = 0;
        for (const auto& slot : fp.slots) {
          double flow;
          if (slot.normal_order == 0) {
            flow = rate.fields[slot.alpha][static_cast<std::size_t>(base)];
          } else {
            flow = one_sided_normal(rate.fields[slot.alpha], fp, i, j);
          }
          node_sum += slot.coeff.eval(s.fields, base) * flow;
        }
        face_sum += weight * node_sum;
      });
      total += (fp.side == 1 ? +1.0 : -1.0) * face_sum;
    }
    return total;
  }

  /// Spectral-radius estimate of the linearized rate map and the resulting
  /// step bound for the classical fourth-order scheme, reported as
  /// dt <= c * h_min^2. The iteration runs on the squared map: conservative
  /// systems have purely imaginary rate spectra, on which plain power
  /// iteration two-cycles instead of converging.
  std::pair<double, double> stability_bound(const GridState& reference) const {
    GridState x0 = reference, xp = zero_state(), xm = zero_state(), z = zero_state(),
              y = zero_state();
    std::mt19937 rng(777);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& f : z.fields)
      for (auto& v : f) v = u(rng);
    apply_pins(z);

    auto norm_of = [](const GridState& s) {
      double n = 0;
      for (const auto& f : s.fields)
        for (double v : f) n += v * v;
      return std::sqrt(n);
    };
    // out = J(in / |in|) by a centered probe around x0; returns |out|.
    const double eps = 1e-7;
    auto probe = [&](const GridState& in, GridState& out) {
      double n = norm_of(in);
      if (n == 0) return 0.0;
      GridState pp = x0, pm = x0;
      for (std::size_t a = 0; a < in.fields.size(); ++a)
        for (std::size_t k = 0; k < in.fields[a].size(); ++k) {
          pp.fields[a][k] += eps / n * in.fields[a][k];
          pm.fields[a][k] -= eps / n * in.fields[a][k];
        }
      derivative(pp, xp);
      derivative(pm, xm);
      for (std::size_t a = 0; a < in.fields.size(); ++a)
        for (std::size_t k = 0; k < in.fields[a].size(); ++k)
          out.fields[a][k] = (xp.fields[a][k] - xm.fields[a][k]) / (2 * eps);
      apply_pins(out);
      return norm_of(out);
    };

    double omega = 0;
    for (int iter = 0; iter < 30; ++iter) {
      double ny = probe(z, y);
      if (ny == 0) break;
      double nz = probe(y, z);
      if (nz == 0) break;
      omega = std::max(omega, std::sqrt(ny * nz));  // |J^2 zhat| = ny * nz
    }
    double dt_bound = omega > 0 ? 2.8 / omega : 1.0;
    double c = dt_bound / (grid_.min_spacing() * grid_.min_spacing());
    return {dt_bound, c};
  }

 private:
  struct DensityPartial {
    std::size_t alpha;
    std::array<int, 2> counts;
    detail::GridExpr expr;
  };

  struct PortSlot {
    std::size_t alpha;
    int normal_order;  // 0: value flow, 1: normal-derivative flow
    detail::GridExpr coeff;
    ScalarExpr coeff_expr;
  };

  struct FacePorts {
    std::size_t dir;
    int side;  // 0: min, 1: max
    FacePolicy policy;
    std::vector<PortSlot> slots;
  };

  /// Ghost-cell fill rule: value = sum of weighted interior reads.
  struct GhostRule {
    long target;                                  // flat index of the ghost cell
    std::vector<std::pair<long, double>> source;  // flat interior index, weight
  };

  void build_pin_mask() {
    for (std::size_t d = 0; d < grid_.dims(); ++d)
      for (int side = 0; side < 2; ++side) {
        if (grid_.policy(d, side) != FacePolicy::clamped) continue;
        long face = side == 0 ? 0 : static_cast<long>(grid_.nodes(d)) - 1;
        if (grid_.dims() == 1) {
          pinned_.push_back(grid_.at(face));
        } else if (d == 0) {
          for (long j = 0; j < static_cast<long>(grid_.nodes(1)); ++j)
            pinned_.push_back(grid_.at(face, j));
        } else {
          for (long i = 0; i < static_cast<long>(grid_.nodes(0)); ++i)
            pinned_.push_back(grid_.at(i, face));
        }
      }
  }

  template <typename Fn>
  void for_face(const FacePorts& fp, Fn&& fn) const {
    long face = fp.side == 0 ? 0 : static_cast<long>(grid_.nodes(fp.dir)) - 1;
    if (grid_.dims() == 1) {
      fn(face, 0L, 1.0);  // point evaluation on a zero-dimensional face
      return;
    }
    std::size_t tdir = 1 - fp.dir;
    for (long t = 0; t < static_cast<long>(grid_.nodes(tdir)); ++t) {
      double w = grid_.spacing(tdir);
      if (!grid_.periodic(tdir) && (t == 0 || t == static_cast<long>(grid_.nodes(tdir)) - 1))
        w *= 0.5;
      if (fp.dir == 0)
        fn(face, t, w);
      else
        fn(t, face, w);
    }
  }

  double one_sided_normal(const Field& f, const FacePorts& fp, long i, long j) const {
    auto value = [&](long depth) {
      long ii = i, jj = j;
      long step = fp.side == 0 ? depth : -depth;
      if (fp.dir == 0)
        ii += step;
      else if (grid_.dims() == 2)
        jj += step;
      else
        ii += step;
      return f[static_cast<std::size_t>(grid_.at(ii, jj))];
    };
    double h = grid_.spacing(fp.dir);
    double d = (-3.0 * value(0) + 4.0 * value(1) - value(2)) / (2 * h);
    return fp.side == 0 ? d : -d;  // derivative along the +axis
  }

  // --- ghost machinery ---

  void extend_field(Field& f) const {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t d = 0; d < grid_.dims(); ++d)
        if (grid_.periodic(d)) wrap_periodic(f, d);
      for (std::size_t d = 0; d < grid_.dims(); ++d)
        for (int side = 0; side < 2; ++side) {
          FacePolicy p = grid_.policy(d, side);
          if (p == FacePolicy::clamped) reflect_clamped(f, d, side, pass == 1);
        }
    }
    for (const auto& rule : free_rules_) {
      double v = 0;
      for (const auto& [src, w] : rule.source) v += w * f[static_cast<std::size_t>(src)];
      f[static_cast<std::size_t>(rule.target)] = v;
    }
    // Propagate free-face ghosts across a periodic seam (corner cells of the
    // padded array read by mixed stencils near the seam).
    if (!free_rules_.empty())
      for (std::size_t d = 0; d < grid_.dims(); ++d)
        if (grid_.periodic(d)) wrap_periodic(f, d);
  }

  void wrap_periodic(Field& f, std::size_t d) const {
    long n = static_cast<long>(grid_.nodes(d));
    auto copy = [&](long ghost, long src) {
      if (grid_.dims() == 1) {
        f[static_cast<std::size_t>(grid_.at(ghost))] = f[static_cast<std::size_t>(grid_.at(src))];
        return;
      }
      long other_n = static_cast<long>(grid_.nodes(1 - d));
      for (long t = -Grid::margin; t < other_n + Grid::margin; ++t) {
        long gi = d == 0 ? ghost : t, gj = d == 0 ? t : ghost;
        long si = d == 0 ? src : t, sj = d == 0 ? t : src;
        f[static_cast<std::size_t>(grid_.at(gi, gj))] = f[static_cast<std::size_t>(grid_.at(si, sj))];
      }
    };
    for (long g = 1; g <= Grid::margin; ++g) {
      copy(-g, n - g);
      copy(n - 1 + g, g - 1);
    }
  }

  void reflect_clamped(Field& f, std::size_t d, int side, bool include_ghost_rows) const {
    long n = static_cast<long>(grid_.nodes(d));
    auto assign = [&](long t) {
      for (long g = 1; g <= Grid::margin; ++g) {
        long ghost = side == 0 ? -g : n - 1 + g;
        long mirror = side == 0 ? g : n - 1 - g;
        long gi = d == 0 ? ghost : t, gj = d == 0 ? t : ghost;
        long mi = d == 0 ? mirror : t, mj = d == 0 ? t : mirror;
        f[static_cast<std::size_t>(grid_.at(gi, gj))] = f[static_cast<std::size_t>(grid_.at(mi, mj))];
      }
    };
    if (grid_.dims() == 1) {
      assign(0);
      return;
    }
    long other_n = static_cast<long>(grid_.nodes(1 - d));
    long lo = include_ghost_rows ? -Grid::margin : 0;
    long hi = include_ghost_rows ? other_n + Grid::margin : other_n;
    for (long t = lo; t < hi; ++t) assign(t);
  }

  /// Adjoint of extend_field: accumulates ghost contributions back onto the
  /// interior cells they were copied or solved from.
  void fold_ghosts(Field& g) const {
    // Reverse of extend_field: the trailing periodic wrap first, then the
    // free rules, then the main passes.
    if (!free_rules_.empty())
      for (std::size_t d = grid_.dims(); d-- > 0;)
        if (grid_.periodic(d)) fold_periodic(g, d);
    for (auto it = free_rules_.rbegin(); it != free_rules_.rend(); ++it) {
      double v = g[static_cast<std::size_t>(it->target)];
      if (v == 0.0) continue;
      g[static_cast<std::size_t>(it->target)] = 0.0;
      for (const auto& [src, w] : it->source) g[static_cast<std::size_t>(src)] += w * v;
    }
    // Reflections and wraps are plain copies; fold in exact reverse order of
    // extend_field's composition.
    for (int pass = 1; pass >= 0; --pass) {
      for (std::size_t d = grid_.dims(); d-- > 0;)
        for (int side = 1; side >= 0; --side)
          if (grid_.policy(d, side) == FacePolicy::clamped) fold_clamped(g, d, side, pass == 1);
      for (std::size_t d = grid_.dims(); d-- > 0;)
        if (grid_.periodic(d)) fold_periodic(g, d);
    }
  }

  void fold_periodic(Field& g, std::size_t d) const {
    long n = static_cast<long>(grid_.nodes(d));
    auto fold = [&](long ghost, long src) {
      if (grid_.dims() == 1) {
        g[static_cast<std::size_t>(grid_.at(src))] += g[static_cast<std::size_t>(grid_.at(ghost))];
        g[static_cast<std::size_t>(grid_.at(ghost))] = 0.0;
        return;
      }
      long other_n = static_cast<long>(grid_.nodes(1 - d));
      for (long t = -Grid::margin; t < other_n + Grid::margin; ++t) {
        long gi = d == 0 ? ghost : t, gj = d == 0 ? t : ghost;
        long si = d == 0 ? src : t, sj = d == 0 ? t : src;
        g[static_cast<std::size_t>(grid_.at(si, sj))] += g[static_cast<std::size_t>(grid_.at(gi, gj))];
        g[static_cast<std::size_t>(grid_.at(gi, gj))] = 0.0;
      }
    };
    for (long gdx = Grid::margin; gdx >= 1; --gdx) {
      fold(-gdx, n - gdx);
      fold(n - 1 + gdx, gdx - 1);
    }
  }

  void fold_clamped(Field& g, std::size_t d, int side, bool include_ghost_rows) const {
    long n = static_cast<long>(grid_.nodes(d));
    auto fold_line = [&](long t) {
      for (long gdx = Grid::margin; gdx >= 1; --gdx) {
        long ghost = side == 0 ? -gdx : n - 1 + gdx;
        long mirror = side == 0 ? gdx : n - 1 - gdx;
        long gi = d == 0 ? ghost : t, gj = d == 0 ? t : ghost;
        long mi = d == 0 ? mirror : t, mj = d == 0 ? t : mirror;
        g[static_cast<std::size_t>(grid_.at(mi, mj))] += g[static_cast<std::size_t>(grid_.at(gi, gj))];
        g[static_cast<std::size_t>(grid_.at(gi, gj))] = 0.0;
      }
    };
    if (grid_.dims() == 1) {
      fold_line(0);
      return;
    }
    long other_n = static_cast<long>(grid_.nodes(1 - d));
    long lo = include_ghost_rows ? -Grid::margin : 0;
    long hi = include_ghost_rows ? other_n + Grid::margin : other_n;
    for (long t = hi - 1; t >= lo; --t) fold_line(t);
  }

  /// Precomputes the linear ghost rules of every free face by probing the
  /// central-stencil conditions with unit impulses. Conditions are enforced
  /// in ascending normal order: the first determines the first ghost layer,
  /// the second the second layer.
  void prepare_free_closures() {
    for (const auto& fp : faces_) {
      if (fp.policy != FacePolicy::free) continue;
      if (fp.slots.empty())
        throw discretize_error("free face has no boundary conditions to enforce");

      // Conditions sorted by the highest normal derivative they contain.
      struct Cond {
        const PortSlot* slot;
        int max_normal;
      };
      std::vector<Cond> conds;
      for (const auto& slot : fp.slots) {
        int mn = 0;
        for (const auto& s : to_polynomial(slot.coeff_expr).symbols())
          if (s.kind() == SymbolKind::jet)
            mn = std::max(mn, s.jet_index()[fp.dir]);
        conds.push_back({&slot, mn});
      }
      std::sort(conds.begin(), conds.end(),
                [](const Cond& a, const Cond& b) { return a.max_normal < b.max_normal; });

      long n = static_cast<long>(grid_.nodes(fp.dir));
      long face = fp.side == 0 ? 0 : n - 1;
      long ghost_step = fp.side == 0 ? -1 : +1;

      // Condition-major insertion: every first-layer rule precedes any
      // second-layer rule, so rules only ever read cells that are already
      // filled when they run.
      long tangential_count = grid_.dims() == 2 ? static_cast<long>(grid_.nodes(1 - fp.dir)) : 1;
      int layer = 0;
      for (const auto& cond : conds) {
        ++layer;
        for (long t = 0; t < tangential_count; ++t) {
          long fi = face, fj = t;
          if (grid_.dims() == 2 && fp.dir == 1) {
            fi = t;
            fj = face;
          }
          long ghost_i = fi + (fp.dir == 0 ? ghost_step * layer : 0);
          long ghost_j = fj + (fp.dir == 1 ? ghost_step * layer : 0);
          GhostRule rule = solve_condition(*cond.slot, grid_.at(fi, fj), grid_.at(ghost_i, ghost_j));
          free_rules_.push_back(std::move(rule));
        }
      }
    }
    validate_free_rules();
  }

  /// Replays the ghost-fill order and checks every free rule reads only cells
  /// that are interior, supplied by wraps/reflections, or produced by an
  /// earlier rule.
  void validate_free_rules() const {
    std::vector<char> known(grid_.padded_size(), 0);
    auto in_range = [&](long c, std::size_t d) {
      return c >= 0 && c < static_cast<long>(grid_.nodes(d));
    };
    auto mark = [&](long i, long j) { known[static_cast<std::size_t>(grid_.at(i, j))] = 1; };
    long n0 = static_cast<long>(grid_.nodes(0));
    long n1 = grid_.dims() == 2 ? static_cast<long>(grid_.nodes(1)) : 1;
    for (long i = -Grid::margin; i < n0 + Grid::margin; ++i)
      for (long j = grid_.dims() == 2 ? -Grid::margin : 0;
           j < (grid_.dims() == 2 ? n1 + Grid::margin : 1); ++j) {
        bool ok = true;
        if (!in_range(i, 0))
          ok = ok && (grid_.periodic(0) ||
                      grid_.policy(0, i < 0 ? 0 : 1) == FacePolicy::clamped);
        if (grid_.dims() == 2 && !in_range(j, 1))
          ok = ok && (grid_.periodic(1) ||
                      grid_.policy(1, j < 0 ? 0 : 1) == FacePolicy::clamped);
        if (ok) mark(i, grid_.dims() == 2 ? j : 0);
      }
    for (const auto& rule : free_rules_) {
      for (const auto& [src, w] : rule.source) {
        (void)w;
        if (!known[static_cast<std::size_t>(src)])
          throw discretize_error(
              "free boundary closure is not sequentially solvable on this grid");
      }
      known[static_cast<std::size_t>(rule.target)] = 1;
    }
  }

  /// Solves condition(coeff expr) == 0 at the face node for one ghost cell.
  /// The condition must be linear in the jets; probing with unit impulses
  /// recovers the ghost's linear dependence on the other cells.
  GhostRule solve_condition(const PortSlot& slot, long face_base, long ghost_target) {
    std::vector<Field> probe(bundle_.m(), Field(grid_.padded_size(), 0.0));

    auto eval_condition = [&]() { return slot.coeff.eval(probe, face_base); };

    double c0 = eval_condition();
    probe[slot.alpha][static_cast<std::size_t>(ghost_target)] = 1.0;
    double c1 = eval_condition();
    probe[slot.alpha][static_cast<std::size_t>(ghost_target)] = 2.0;
    double c2 = eval_condition();
    probe[slot.alpha][static_cast<std::size_t>(ghost_target)] = 0.0;
    double A = c1 - c0;
    if (std::abs((c2 - c0) - 2 * A) > 1e-9 * (std::abs(c2) + std::abs(c1) + 1))
      throw discretize_error("free boundary conditions must be linear in the jet variables");
    if (std::abs(A) < 1e-14)
      throw discretize_error("free boundary condition does not determine the ghost layer");

    GhostRule rule;
    rule.target = ghost_target;

    // Dependence window: every cell a coefficient stencil can reach from the
    // face node, except the target ghost itself. Cells across a periodic seam
    // are folded onto their canonical images.
    std::set<long> window;
    for (const auto& term : slot.coeff.terms)
      for (const auto& f : term.factors)
        for (const auto& [off, w] : f.stencil.taps) {
          (void)w;
          window.insert(off);
        }
    std::map<long, double> sources;
    for (long off : window) {
      long cell = face_base + off;
      if (cell == ghost_target) continue;
      for (std::size_t a = 0; a < bundle_.m(); ++a) {
        probe[a][static_cast<std::size_t>(cell)] = 1.0;
        double c = eval_condition();
        probe[a][static_cast<std::size_t>(cell)] = 0.0;
        if (a != slot.alpha) {
          if (std::abs(c - c0) > 1e-12)
            throw discretize_error("free boundary conditions may involve one field only");
          continue;
        }
        double coeff = -(c - c0) / A;
        if (coeff != 0.0) sources[grid_.canonical_flat(cell)] += coeff;
      }
    }
    for (const auto& [cell, coeff] : sources)
      if (coeff != 0.0) rule.source.emplace_back(cell, coeff);
    return rule;
  }

  Grid grid_;
  BundleSpec bundle_;
  std::map<Symbol, double> params_;
  std::vector<detail::GridExpr> velocity_;
  detail::GridExpr density_;
  std::vector<DensityPartial> density_partials_;
  std::vector<FacePorts> faces_;
  std::vector<long> pinned_;
  std::vector<GhostRule> free_rules_;
};

// ---------------------------------------------------------------------------
// Time integration and audit
// ---------------------------------------------------------------------------

struct Trajectory {
  std::vector<double> times;
  std::vector<GridState> samples;
  double dt = 0;
};

/// Classical fourth-order one-step integration with a fixed step and output
/// stride. Deterministic; NaN or overflow aborts with the stability bound.
inline Trajectory simulate(const SemiDiscretePH& ode, const GridState& initial, double dt, double t_end,
                           std::size_t stride = 1) {
  if (dt <= 0) throw stability_error("time step must be positive");
  if (stride == 0) stride = 1;
  Trajectory traj;
  traj.dt = dt;

  GridState y = initial, k1 = ode.zero_state(), k2 = ode.zero_state(), k3 = ode.zero_state(),
            k4 = ode.zero_state(), tmp = ode.zero_state();
  ode.apply_pins(y);

  auto axpy = [&](GridState& dst, const GridState& base, const GridState& k, double a) {
    for (std::size_t f = 0; f < dst.fields.size(); ++f)
      for (std::size_t i = 0; i < dst.fields[f].size(); ++i)
        dst.fields[f][i] = base.fields[f][i] + a * k.fields[f][i];
  };

  std::size_t steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-12));
  traj.times.push_back(0.0);
  traj.samples.push_back(y);
  for (std::size_t step = 1; step <= steps; ++step) {
    ode.derivative(y, k1);
    axpy(tmp, y, k1, dt / 2);
    ode.derivative(tmp, k2);
    axpy(tmp, y, k2, dt / 2);
    ode.derivative(tmp, k3);
    axpy(tmp, y, k3, dt);
    ode.derivative(tmp, k4);
    for (std::size_t f = 0; f < y.fields.size(); ++f)
      for (std::size_t i = 0; i < y.fields[f].size(); ++i)
        y.fields[f][i] += dt / 6 *
                          (k1.fields[f][i] + 2 * k2.fields[f][i] + 2 * k3.fields[f][i] +
                           k4.fields[f][i]);
    ode.apply_pins(y);

    if (step % stride == 0 || step == steps) {
      double probe = 0;
      for (const auto& f : y.fields)
        for (double v : f) probe += v;
      if (!std::isfinite(probe)) {
        auto [dt_bound, c] = ode.stability_bound(initial);
        std::ostringstream os;
        os << "time integration became unstable at t=" << step * dt << "; the explicit scheme needs"
           << " dt <= c*h_min^2 with c ~= " << c << " (dt_max ~= " << dt_bound << ", dt = " << dt
           << ")";
        throw stability_error(os.str());
      }
      traj.times.push_back(step * dt);
      traj.samples.push_back(y);
    }
  }
  return traj;
}

struct AuditResult {
  std::vector<double> t;
  std::vector<double> H;
  std::vector<double> flux;      // boundary flux Phi(t)
  std::vector<double> residual;  // |dH/dt - Phi|
  double max_residual = 0;
  double max_rel_residual = 0;
  double energy_drift = 0;  // max |H - H(0)| / max(|H(0)|, eps)
  double dt_bound = 0;      // estimated stable step
  double dt_bound_c = 0;    // dt_bound / h_min^2
};

/// Energy audit of a trajectory: H by quadrature, Phi by port-product
/// quadrature, dH/dt by centered differencing of the H series (one-sided at
/// the ends). Deterministic.
inline AuditResult energy_audit(const SemiDiscretePH& ode, const Trajectory& traj) {
  AuditResult res;
  res.t = traj.times;
  const std::size_t n = traj.samples.size();
  res.H.resize(n);
  res.flux.resize(n);
  GridState rate = ode.zero_state();
  for (std::size_t k = 0; k < n; ++k) {
    GridState s = traj.samples[k];
    res.H[k] = ode.hamiltonian(s);
    ode.derivative(s, rate);
    res.flux[k] = ode.boundary_flux(s, rate);
  }
  res.residual.resize(n, 0.0);
  // Centered differencing over the sample triple around k (exact for
  // quadratics, so the nonuniformly spaced final sample is handled). No
  // centered estimate exists at the two series ends; those entries replicate
  // their interior neighbour.
  auto centered = [&](std::size_t k) {
    double t0 = res.t[k - 1], t1 = res.t[k], t2 = res.t[k + 1];
    double d0 = (2 * t1 - t1 - t2) / ((t0 - t1) * (t0 - t2));
    double d1 = (2 * t1 - t0 - t2) / ((t1 - t0) * (t1 - t2));
    double d2 = (2 * t1 - t0 - t1) / ((t2 - t0) * (t2 - t1));
    return res.H[k - 1] * d0 + res.H[k] * d1 + res.H[k + 1] * d2;
  };
  double scale = std::abs(res.H.empty() ? 0.0 : res.H[0]);
  double horizon = res.t.empty() ? 1.0 : std::max(res.t.back(), 1e-12);
  double power_scale = scale / horizon;
  for (std::size_t k = 0; k < n; ++k) {
    if (n >= 3 && k > 0 && k < n - 1) {
      res.residual[k] = std::abs(centered(k) - res.flux[k]);
      power_scale = std::max({power_scale, std::abs(centered(k)), std::abs(res.flux[k])});
    } else if (n == 2) {
      res.residual[k] = std::abs((res.H[1] - res.H[0]) / (res.t[1] - res.t[0]) - res.flux[k]);
    }
    res.energy_drift = std::max(res.energy_drift, std::abs(res.H[k] - res.H[0]));
  }
  if (n >= 3) {
    res.residual[0] = res.residual[1];
    res.residual[n - 1] = res.residual[n - 2];
  }
  for (double r : res.residual) res.max_residual = std::max(res.max_residual, r);
  res.energy_drift /= std::max(scale, 1e-300);
  res.max_rel_residual = res.max_residual / std::max(power_scale, 1e-300);
  auto [dt_bound, c] = ode.stability_bound(traj.samples.empty() ? ode.zero_state() : traj.samples[0]);
  res.dt_bound = dt_bound;
  res.dt_bound_c = c;
  return res;
}

inline void write_audit_csv(const AuditResult& res, std::ostream& os) {
  os << "t,H,Phi,residual\n";
  char buf[160];
  for (std::size_t k = 0; k < res.t.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", res.t[k], res.H[k], res.flux[k],
                  res.residual[k]);
    os << buf;
  }
}

struct ConvergenceLevel {
  std::vector<std::size_t> nodes;
  double h_min = 0;
  double dt = 0;
  double max_residual = 0;
};

struct ConvergenceTable {
  std::vector<ConvergenceLevel> levels;
  std::vector<double> ratios;  // level k residual / level k+1 residual
};

/// Runs the audit across grid refinements h -> h/2 with dt scaled by 1/4,
/// returning the residual convergence table.
inline ConvergenceTable audit_convergence(
    const PHSystem& sys, GridSpec base, const std::map<Symbol, double>& params,
    const std::function<void(const SemiDiscretePH&, GridState&)>& init, double dt0, double t_end,
    int levels, std::size_t stride = 4) {
  ConvergenceTable table;
  GridSpec spec = base;
  double dt = dt0;
  for (int level = 0; level < levels; ++level) {
    SemiDiscretePH ode(sys, spec, params);
    GridState s0 = ode.zero_state();
    init(ode, s0);
    Trajectory traj = simulate(ode, s0, dt, t_end, stride);
    AuditResult audit = energy_audit(ode, traj);
    table.levels.push_back({spec.nodes, ode.grid().min_spacing(), dt, audit.max_residual});
    for (auto& nd : spec.nodes) nd *= 2;
    dt /= 4;
  }
  for (std::size_t k = 0; k + 1 < table.levels.size(); ++k)
    table.ratios.push_back(table.levels[k].max_residual /
                           std::max(table.levels[k + 1].max_residual, 1e-300));
  return table;
}

}  // namespace varicart
