#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "fixtures.hpp"
#include "varicart/numverify.hpp"

using namespace varicart;

namespace {

std::map<Symbol, double> beam_params() {
  BundleSpec b = fixtures::beam_ph().bundle;
  return {{b.parameter("E"), 1.0}, {b.parameter("I"), 1.0}};
}

std::map<Symbol, double> plate_params(double nu) {
  BundleSpec b = fixtures::kirchhoff_ph().bundle;
  return {{b.parameter("nu"), nu}};
}

GridSpec clamped_beam_grid(std::size_t n) {
  return {{n}, {1.0}, {{FacePolicy::clamped, FacePolicy::clamped}}};
}

GridSpec periodic_beam_grid(std::size_t n) {
  return {{n}, {1.0}, {{FacePolicy::periodic, FacePolicy::periodic}}};
}

GridSpec strip_grid(std::size_t nx, std::size_t ny) {
  return {{nx, ny},
          {1.0, 1.0},
          {{FacePolicy::periodic, FacePolicy::periodic}, {FacePolicy::clamped, FacePolicy::free}}};
}

}  // namespace

TEST_CASE("interior fourth-derivative stencil is the classical five-point formula") {
  SemiDiscretePH ode(fixtures::beam_ph(), clamped_beam_grid(16), beam_params());
  GridState s = ode.zero_state();
  // dot(p) = -E I w_xxxx: the response of dot(p) to a unit impulse in w is the
  // stencil row (1, -4, 6, -4, 1)/h^4 with the leading minus sign.
  const long center = 8;
  s.fields[0][static_cast<std::size_t>(ode.grid().at(center))] = 1.0;
  GridState rate = ode.zero_state();
  ode.derivative(s, rate);
  double h = ode.grid().spacing(0);
  double h4 = h * h * h * h;
  CHECK(rate.fields[1][static_cast<std::size_t>(ode.grid().at(center))] ==
        doctest::Approx(-6.0 / h4));
  CHECK(rate.fields[1][static_cast<std::size_t>(ode.grid().at(center - 1))] ==
        doctest::Approx(4.0 / h4));
  CHECK(rate.fields[1][static_cast<std::size_t>(ode.grid().at(center + 2))] ==
        doctest::Approx(-1.0 / h4));
}

TEST_CASE("clamped ghosts mirror the interior and the face stays pinned") {
  SemiDiscretePH ode(fixtures::beam_ph(), clamped_beam_grid(12), beam_params());
  GridState s = ode.zero_state();
  ode.set_field(s, 0, [](double x, double) { return x * (1 - x); });
  ode.extend(s);
  const auto& g = ode.grid();
  CHECK(s.fields[0][static_cast<std::size_t>(g.at(0))] == 0.0);
  CHECK(s.fields[0][static_cast<std::size_t>(g.at(-1))] ==
        doctest::Approx(s.fields[0][static_cast<std::size_t>(g.at(1))]));
  CHECK(s.fields[0][static_cast<std::size_t>(g.at(-2))] ==
        doctest::Approx(s.fields[0][static_cast<std::size_t>(g.at(2))]));
}

TEST_CASE("discrete delta H equals the state-space gradient of the discrete Hamiltonian") {
  std::mt19937 rng(2025);
  std::uniform_real_distribution<double> noise(-1.0, 1.0);

  auto check_gradient = [&](SemiDiscretePH& ode) {
    GridState s = ode.zero_state();
    for (auto& f : s.fields)
      for (auto& v : f) v = noise(rng);
    ode.apply_pins(s);

    auto grad = ode.delta_h(s);
    const double eps = 1e-5;
    std::size_t checked = 0;
    ode.grid().for_interior([&](long i, long j) {
      if ((i * 7 + j * 3) % 3 != 0) return;  // deterministic subset
      for (std::size_t a = 0; a < s.fields.size(); ++a) {
        std::size_t idx = static_cast<std::size_t>(ode.grid().at(i, j));
        GridState sp = s, sm = s;
        sp.fields[a][idx] += eps;
        sm.fields[a][idx] -= eps;
        ode.apply_pins(sp);
        ode.apply_pins(sm);
        double fd = (ode.hamiltonian(sp) - ode.hamiltonian(sm)) / (2 * eps);
        double analytic = grad[a][idx] * ode.grid().quad_weight(i, j);
        double scale = std::max({1.0, std::abs(fd), std::abs(analytic)});
        CHECK(std::abs(fd - analytic) / scale < 1e-6);
        ++checked;
      }
    });
    CHECK(checked > 10);
  };

  SemiDiscretePH beam(fixtures::beam_ph(), clamped_beam_grid(16), beam_params());
  check_gradient(beam);

  SemiDiscretePH strip(fixtures::kirchhoff_ph(), strip_grid(8, 12), plate_params(0.3));
  check_gradient(strip);
}

TEST_CASE("zero initial state stays identically zero and audits clean") {
  SemiDiscretePH ode(fixtures::beam_ph(), clamped_beam_grid(16), beam_params());
  Trajectory traj = simulate(ode, ode.zero_state(), 1e-4, 0.01, 10);
  for (const auto& s : traj.samples)
    for (const auto& f : s.fields)
      for (double v : f) CHECK(v == 0.0);
  AuditResult audit = energy_audit(ode, traj);
  for (std::size_t k = 0; k < audit.t.size(); ++k) {
    CHECK(audit.H[k] == 0.0);
    CHECK(audit.flux[k] == 0.0);
    CHECK(audit.residual[k] == 0.0);
  }
}

TEST_CASE("periodic single mode oscillates at the discrete dispersion frequency") {
  const std::size_t n = 32;
  const int k = 2;
  SemiDiscretePH ode(fixtures::beam_ph(), periodic_beam_grid(n), beam_params());
  const double h = ode.grid().spacing(0);
  const double theta = 2 * M_PI * k * h;
  const double omega = (2 - 2 * std::cos(theta)) / (h * h);

  GridState s0 = ode.zero_state();
  ode.set_field(s0, 0, [&](double x, double) { return std::cos(2 * M_PI * k * x); });

  const double period = 2 * M_PI / omega;
  const double dt = 0.05 / omega;
  {
    Trajectory traj10 = simulate(ode, s0, dt, 10 * period, 50);
    AuditResult audit = energy_audit(ode, traj10);
    CHECK(audit.energy_drift < 1e-6);
  }

  // Richardson check at a non-integer number of periods, where the
  // fourth-order phase error of the integrator is visible.
  const double t_end = 10.25 * period;
  Trajectory traj = simulate(ode, s0, dt, t_end, 50);

  auto exact_error = [&](const Trajectory& t) {
    double err = 0;
    double T = t.times.back();
    const GridState& last = t.samples.back();
    ode.grid().for_interior([&](long i, long) {
      double x = ode.grid().coord(0, i);
      double wexact = std::cos(omega * T) * std::cos(2 * M_PI * k * x);
      err = std::max(err,
                     std::abs(last.fields[0][static_cast<std::size_t>(ode.grid().at(i))] - wexact));
    });
    return err;
  };
  double e1 = exact_error(traj);
  CHECK(e1 < 1e-4);

  Trajectory traj2 = simulate(ode, s0, dt / 2, t_end, 100);
  double e2 = exact_error(traj2);
  double ratio = e1 / std::max(e2, 1e-300);
  CHECK(ratio > 11.0);
  CHECK(ratio < 22.0);
}

TEST_CASE("clamped-clamped beam conserves the audited energy") {
  SemiDiscretePH ode(fixtures::beam_ph(), clamped_beam_grid(32), beam_params());
  GridState s0 = ode.zero_state();
  ode.set_field(s0, 0, [](double x, double) {
    double b = x * (1 - x);
    return 16.0 * b * b;
  });
  auto [dt_bound, c] = ode.stability_bound(s0);
  (void)c;
  double dt = 0.05 * dt_bound;  // resolve the fastest mode well; drift is integrator-only
  Trajectory traj = simulate(ode, s0, dt, 0.2, 64);
  AuditResult audit = energy_audit(ode, traj);
  CHECK(audit.H[0] > 0);
  CHECK(audit.energy_drift < 1e-6);
  for (double phi : audit.flux) CHECK(phi == 0.0);  // prescribed slots carry no flow
}

TEST_CASE("audit series are deterministic across runs") {
  auto run = [] {
    SemiDiscretePH ode(fixtures::beam_ph(), clamped_beam_grid(16), beam_params());
    GridState s0 = ode.zero_state();
    ode.set_field(s0, 0, [](double x, double) { return std::sin(M_PI * x) * std::sin(M_PI * x); });
    Trajectory traj = simulate(ode, s0, 5e-5, 0.02, 8);
    return energy_audit(ode, traj);
  };
  AuditResult a = run(), b = run();
  REQUIRE(a.H.size() == b.H.size());
  for (std::size_t k = 0; k < a.H.size(); ++k) {
    CHECK(a.H[k] == b.H[k]);
    CHECK(a.flux[k] == b.flux[k]);
    CHECK(a.residual[k] == b.residual[k]);
  }
}

TEST_CASE("instability is reported with the step bound") {
  SemiDiscretePH ode(fixtures::beam_ph(), clamped_beam_grid(24), beam_params());
  GridState s0 = ode.zero_state();
  ode.set_field(s0, 0, [](double x, double) { return x * (1 - x); });
  auto [dt_bound, c] = ode.stability_bound(s0);
  (void)c;
  try {
    simulate(ode, s0, 10 * dt_bound, 1.0, 1);
    FAIL("expected stability_error");
  } catch (const stability_error& err) {
    CHECK(std::string(err.what()).find("h_min^2") != std::string::npos);
  }
}

TEST_CASE("free-edge strip: boundary conditions are enforced through the ghosts") {
  SemiDiscretePH ode(fixtures::kirchhoff_ph(), strip_grid(12, 12), plate_params(0.3));
  GridState s = ode.zero_state();
  std::mt19937 rng(55);
  std::uniform_real_distribution<double> noise(-1.0, 1.0);
  for (auto& f : s.fields)
    for (auto& v : f) v = noise(rng);
  ode.apply_pins(s);
  ode.extend(s);

  const auto& g = ode.grid();
  const double h = g.spacing(1);
  double nu = 0.3;
  long jmax = static_cast<long>(g.nodes(1)) - 1;
  auto val = [&](long i, long j) { return s.fields[0][static_cast<std::size_t>(g.at(i, j))]; };
  for (long i = 0; i < static_cast<long>(g.nodes(0)); ++i) {
    double wyy = (val(i, jmax - 1) - 2 * val(i, jmax) + val(i, jmax + 1)) / (h * h);
    double wxx = (val(i - 1, jmax) - 2 * val(i, jmax) + val(i + 1, jmax)) /
                 (g.spacing(0) * g.spacing(0));
    double moment = wyy + nu * wxx;
    CHECK(std::abs(moment) < 1e-9);

    double wyyy = (-0.5 * val(i, jmax - 2) + val(i, jmax - 1) - val(i, jmax + 1) +
                   0.5 * val(i, jmax + 2)) /
                  (h * h * h);
    double wxxy = ((val(i - 1, jmax + 1) - 2 * val(i, jmax + 1) + val(i + 1, jmax + 1)) -
                   (val(i - 1, jmax - 1) - 2 * val(i, jmax - 1) + val(i + 1, jmax - 1))) /
                  (g.spacing(0) * g.spacing(0) * 2 * h);
    double shear = wyyy + (2 - nu) * wxxy;
    CHECK(std::abs(shear) < 1e-8);
  }
}

TEST_CASE("strip audit runs and the residual refines") {
  auto init = [](const SemiDiscretePH& ode, GridState& s) {
    const_cast<SemiDiscretePH&>(ode).set_field(s, 0, [](double x, double y) {
      return std::sin(2 * M_PI * x) * y * y * (1.5 - y);
    });
  };
  ConvergenceTable table =
      audit_convergence(fixtures::kirchhoff_ph(), strip_grid(8, 8), plate_params(0.3), init,
                        2e-5, 0.02, 2, 8);
  REQUIRE(table.levels.size() == 2);
  CHECK(table.levels[0].max_residual > 0);
  CHECK(std::isfinite(table.levels[1].max_residual));
  CHECK(table.ratios[0] > 1.5);
}

TEST_CASE("grid validation rejects unsupported configurations") {
  CHECK_THROWS_AS(Grid(GridSpec{{4}, {1.0}, {{FacePolicy::clamped, FacePolicy::clamped}}}),
                  discretize_error);
  CHECK_THROWS_AS(Grid(GridSpec{{16}, {1.0}, {{FacePolicy::periodic, FacePolicy::clamped}}}),
                  discretize_error);
  CHECK_THROWS_AS(Grid(GridSpec{{16, 16},
                                {1.0, 1.0},
                                {{FacePolicy::clamped, FacePolicy::clamped},
                                 {FacePolicy::clamped, FacePolicy::free}}}),
                  discretize_error);
  CHECK_THROWS_AS(Grid(GridSpec{{8, 8, 8},
                                {1.0, 1.0, 1.0},
                                {{FacePolicy::clamped, FacePolicy::clamped},
                                 {FacePolicy::clamped, FacePolicy::clamped},
                                 {FacePolicy::clamped, FacePolicy::clamped}}}),
                  discretize_error);
}
