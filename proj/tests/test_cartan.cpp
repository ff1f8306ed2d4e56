#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fixtures.hpp"
#include "test_util.hpp"

using namespace varicart;

namespace {

ScalarExpr param(const BundleSpec& b, const char* n) { return ScalarExpr(b.parameter(n)); }

}  // namespace

TEST_CASE("Euler-Lagrange: Timoshenko beam equations") {
  Density L = fixtures::timoshenko();
  const auto& b = L.bundle;
  auto delta = euler_lagrange(L);
  REQUIRE(delta.size() == 2);

  ScalarExpr kAG = param(b, "k") * param(b, "A") * param(b, "G");
  ScalarExpr w20(b.jet("w", {2, 0})), w02(b.jet("w", {0, 2}));
  ScalarExpr phi(b.jet("phi", {0, 0})), phi01(b.jet("phi", {0, 1})), phi20(b.jet("phi", {2, 0})),
      phi02(b.jet("phi", {0, 2})), w01(b.jet("w", {0, 1}));

  CHECK(equivalent(delta[0], -param(b, "rho") * w20 + kAG * (w02 - phi01)));
  CHECK(equivalent(delta[1],
                   -param(b, "J") * phi20 + param(b, "E") * param(b, "I") * phi02 + kAG * (w01 - phi)));
}

TEST_CASE("Euler-Lagrange: Euler-Bernoulli beam equation") {
  Density L = fixtures::euler_bernoulli();
  const auto& b = L.bundle;
  auto delta = euler_lagrange(L);
  ScalarExpr expected = -param(b, "rho") * param(b, "A") * ScalarExpr(b.jet("w", {2, 0})) -
                        param(b, "E") * param(b, "I") * ScalarExpr(b.jet("w", {0, 4}));
  CHECK(equivalent(delta[0], expected));
}

TEST_CASE("Euler-Lagrange: Kirchhoff plate equation") {
  Density L = fixtures::kirchhoff();
  const auto& b = L.bundle;
  auto delta = euler_lagrange(L);
  ScalarExpr pde = ScalarExpr(b.jet("w", {2, 0, 0})) + ScalarExpr(b.jet("w", {0, 4, 0})) +
                   ScalarExpr(b.jet("w", {0, 0, 4})) +
                   ScalarExpr(2) * ScalarExpr(b.jet("w", {0, 2, 2}));
  CHECK(equivalent(delta[0], -pde));
  CHECK(canonical_string(normalize_equation_sign(delta[0])) ==
        "w[2,0,0] + w[0,0,4] + 2*w[0,2,2] + w[0,4,0]");
}

TEST_CASE("Euler-Lagrange degenerates to the partial derivative without jets") {
  BundleSpec b = vt::test_bundle(2, 1);
  Density L(b, ScalarExpr(Rational(1, 2)) * pow(ScalarExpr(b.field(0)), 2), 0);
  auto delta = euler_lagrange(L);
  CHECK(canonical_string(delta[0]) == "w");
}

TEST_CASE("Cartan coefficients: Euler-Bernoulli, boundary-adapted at the spatial face") {
  Density L = fixtures::euler_bernoulli();
  const auto& b = L.bundle;
  auto cc = cartan_coefficients(L, 1);
  ScalarExpr EI = param(b, "E") * param(b, "I");
  CHECK(equivalent(cc.rho2[0][1][1], -EI * ScalarExpr(b.jet("w", {0, 2}))));
  CHECK(is_zero(cc.rho2[0][0][1]));
  CHECK(equivalent(cc.rho1[0][1], EI * ScalarExpr(b.jet("w", {0, 3}))));
}

TEST_CASE("Cartan coefficients: Kirchhoff, adapted choice at the Y face") {
  Density L = fixtures::kirchhoff();
  const auto& b = L.bundle;
  auto cc = cartan_coefficients(L, 2);
  ScalarExpr nu = param(b, "nu");

  // Mixed pair resolves entirely onto the tangential current: the face slot
  // rho2[w][Y-tangent][face] vanishes and its partner takes d L / d w_XY.
  CHECK(is_zero(cc.rho2[0][1][2]));
  ScalarExpr dL_dw011 = diff_partial(L.expr, b.jet("w", {0, 1, 1}));
  CHECK(equivalent(cc.rho2[0][2][1], dL_dw011));

  ScalarExpr expected_rho1 = ScalarExpr(b.jet("w", {0, 0, 3})) +
                             (ScalarExpr(2) - nu) * ScalarExpr(b.jet("w", {0, 2, 1}));
  CHECK(equivalent(cc.rho1[0][2], expected_rho1));

  // Normal-derivative slot coefficient: -(w_YY + nu w_XX).
  CHECK(equivalent(cc.rho2[0][2][2],
                   -(ScalarExpr(b.jet("w", {0, 0, 2})) + nu * ScalarExpr(b.jet("w", {0, 2, 0})))));
}

TEST_CASE("Cartan coefficients: first-order density has empty rho2") {
  Density L = fixtures::timoshenko();
  auto cc = cartan_coefficients(L, 1);
  for (std::size_t alpha = 0; alpha < 2; ++alpha)
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t j = 0; j < 2; ++j) CHECK(is_zero(cc.rho2[alpha][k][j]));
  const auto& b = L.bundle;
  for (std::size_t alpha = 0; alpha < 2; ++alpha)
    for (std::size_t i = 0; i < 2; ++i)
      CHECK(equivalent(cc.rho1[alpha][i],
                       diff_partial(L.expr, b.jet(alpha, MultiIndex::unit(2, i)))));
}

TEST_CASE("cartan_coefficients rejects time-flagged faces") {
  Density L = fixtures::euler_bernoulli();
  CHECK_THROWS_AS(cartan_coefficients(L, 0), time_boundary_error);
  try {
    boundary_terms(L, 0);
    FAIL("expected time_boundary_error");
  } catch (const time_boundary_error& err) {
    CHECK(std::string(err.what()).find("no variation on the time boundary") != std::string::npos);
  }
}

TEST_CASE("boundary report: Timoshenko spatial face") {
  Density L = fixtures::timoshenko();
  const auto& b = L.bundle;
  auto report = boundary_terms(L, 1);
  REQUIRE(report.entries.size() == 2);
  CHECK(report.face_volume_sign == -1);  // Omega_d = -dt at the X face

  ScalarExpr kAG = param(b, "k") * param(b, "A") * param(b, "G");
  ScalarExpr shear = kAG * (ScalarExpr(b.jet("w", {0, 1})) - ScalarExpr(b.jet("phi", {0, 0})));
  ScalarExpr moment = param(b, "E") * param(b, "I") * ScalarExpr(b.jet("phi", {0, 1}));

  CHECK(report.entries[0].slot.str() == "eta[w]");
  CHECK(equivalent(report.entries[0].coeff, -shear));
  CHECK(report.entries[1].slot.str() == "eta[phi]");
  CHECK(equivalent(report.entries[1].coeff, -moment));
}

TEST_CASE("boundary report: Kirchhoff Y face has exactly the two admissible slots") {
  Density L = fixtures::kirchhoff();
  const auto& b = L.bundle;
  auto report = boundary_terms(L, 2);
  REQUIRE(report.entries.size() == 2);
  CHECK(report.face_volume_sign == +1);

  ScalarExpr nu = param(b, "nu");
  CHECK(report.entries[0].slot.str() == "eta[w]");
  CHECK(equivalent(report.entries[0].coeff,
                   ScalarExpr(b.jet("w", {0, 0, 3})) + (ScalarExpr(2) - nu) * ScalarExpr(b.jet("w", {0, 2, 1}))));
  CHECK(report.entries[1].slot.str() == "eta[w][0,0,1]");
  CHECK(equivalent(report.entries[1].coeff,
                   -(ScalarExpr(b.jet("w", {0, 0, 2})) + nu * ScalarExpr(b.jet("w", {0, 2, 0})))));
}

TEST_CASE("boundary report: density without jet variables is empty") {
  BundleSpec b = vt::test_bundle(2, 1);
  Density L(b, ScalarExpr(Rational(1, 2)) * pow(ScalarExpr(b.field(0)), 2), 0);
  CHECK(boundary_terms(L, 1).entries.empty());
}

TEST_CASE("naive split: Kirchhoff grows a tangential slot, with the halved mixed partial") {
  Density L = fixtures::kirchhoff();
  const auto& b = L.bundle;
  auto naive = boundary_terms_naive(L, 2, SplitChoice::symmetric());
  REQUIRE(naive.entries.size() == 3);

  bool found_tangential = false;
  ScalarExpr half_mixed = diff_partial(L.expr, b.jet("w", {0, 1, 1})) / Rational(2);
  for (const auto& entry : naive.entries) {
    if (entry.slot.str() == "eta[w][0,1,0]") {
      found_tangential = true;
      CHECK(equivalent(entry.coeff, half_mixed));
    }
  }
  CHECK(found_tangential);

  // The adapted report never contains a tangential-derivative slot.
  for (const auto& entry : boundary_terms(L, 2).entries) {
    const MultiIndex& J = entry.slot.jet_index();
    CHECK((J.is_zero() || J == MultiIndex::unit(3, 2)));
  }
}

TEST_CASE("naive split coincides with the adapted report when no mixed derivatives occur") {
  Density L = fixtures::euler_bernoulli();
  auto adapted = boundary_terms(L, 1);
  auto naive = boundary_terms_naive(L, 1, SplitChoice::symmetric());
  REQUIRE(adapted.entries.size() == naive.entries.size());
  for (std::size_t i = 0; i < adapted.entries.size(); ++i) {
    CHECK(adapted.entries[i].slot == naive.entries[i].slot);
    CHECK(equivalent(adapted.entries[i].coeff, naive.entries[i].coeff));
  }

  Density T = fixtures::timoshenko();
  auto t_adapted = boundary_terms(T, 1);
  auto t_naive = boundary_terms_naive(T, 1, SplitChoice::symmetric());
  CHECK(t_adapted.entries.size() == t_naive.entries.size());
}

TEST_CASE("mixed face-touching derivatives always surface as tangential slots in naive reports") {
  std::mt19937 rng(977);
  for (int trial = 0; trial < 15; ++trial) {
    BundleSpec b = vt::test_bundle(3, 1);
    std::size_t face = 2;
    // Random density plus a guaranteed mixed second derivative touching the face.
    MultiIndex mixed = MultiIndex::unit(3, 1).plus(MultiIndex::unit(3, face));
    ScalarExpr extra = ScalarExpr(vt::random_rational(rng)) * pow(ScalarExpr(b.jet(0, mixed)), 2);
    Density L(b, vt::random_density(rng, b, 2, 4).expr + extra, 2);

    for (const auto& entry : boundary_terms(L, face).entries) {
      const MultiIndex& J = entry.slot.jet_index();
      CHECK((J.is_zero() || J == MultiIndex::unit(3, face)));
    }
    bool tangential = false;
    for (const auto& entry : boundary_terms_naive(L, face, SplitChoice::symmetric()).entries)
      if (!entry.slot.jet_index().is_zero() && entry.slot.jet_index() != MultiIndex::unit(3, face))
        tangential = true;
    CHECK(tangential);
  }
}

TEST_CASE("first-order boundary coefficient equals the first-order partial") {
  std::mt19937 rng(921);
  for (int trial = 0; trial < 20; ++trial) {
    BundleSpec b = vt::test_bundle(2, 2);
    Density L = vt::random_density(rng, b, 1, 5);
    auto report = boundary_terms(L, 1);
    for (const auto& entry : report.entries) {
      REQUIRE(entry.slot.jet_index().is_zero());
      std::size_t alpha = static_cast<std::size_t>(entry.slot.dep_index());
      CHECK(equivalent(entry.coeff, diff_partial(L.expr, b.jet(alpha, MultiIndex::unit(2, 1)))));
    }
  }
}

TEST_CASE("decomposition identity: fixtures under both splits") {
  CHECK(is_zero(verify_decomposition(fixtures::timoshenko(), 1, SplitChoice::adapted())));
  CHECK(is_zero(verify_decomposition(fixtures::timoshenko(), 1, SplitChoice::symmetric())));
  CHECK(is_zero(verify_decomposition(fixtures::euler_bernoulli(), 1, SplitChoice::adapted())));
  CHECK(is_zero(verify_decomposition(fixtures::euler_bernoulli(), 1, SplitChoice::symmetric())));
  CHECK(is_zero(verify_decomposition(fixtures::kirchhoff(), 2, SplitChoice::adapted())));
  CHECK(is_zero(verify_decomposition(fixtures::kirchhoff(), 2, SplitChoice::symmetric())));

  BundleSpec b = vt::test_bundle(2, 1);
  Density constant(b, ScalarExpr(Rational(3, 7)), 0);
  CHECK(is_zero(verify_decomposition(constant, 1)));
}

TEST_CASE("decomposition identity: randomized densities, splits and weights") {
  std::mt19937 rng(933);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int trial = 0; trial < 40; ++trial) {
    std::size_t r = 2 + coin(rng);
    std::size_t m = 1 + coin(rng);
    BundleSpec b = vt::test_bundle(r, m);
    Density L = vt::random_density(rng, b, coin(rng) ? 2 : 1, 6);
    std::uniform_int_distribution<std::size_t> faces(1, r - 1);
    std::size_t face = faces(rng);
    CHECK(is_zero(verify_decomposition(L, face, SplitChoice::adapted())));
    CHECK(is_zero(verify_decomposition(L, face, SplitChoice::symmetric())));
    CHECK(is_zero(verify_decomposition(L, face, SplitChoice::weighted(vt::random_rational(rng)))));
  }
}

TEST_CASE("Euler-Lagrange output is split independent") {
  std::mt19937 rng(947);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int trial = 0; trial < 25; ++trial) {
    std::size_t r = 2 + coin(rng);
    BundleSpec b = vt::test_bundle(r, 1 + coin(rng));
    Density L = vt::random_density(rng, b, 2, 6);
    auto delta = euler_lagrange(L);
    std::uniform_int_distribution<std::size_t> faces(1, r - 1);
    std::size_t face = faces(rng);
    for (const auto& split :
         {SplitChoice::adapted(), SplitChoice::symmetric(), SplitChoice::weighted(Rational(2, 3))}) {
      auto cc = cartan_coefficients(L, face, split);
      for (std::size_t alpha = 0; alpha < b.m(); ++alpha) {
        ScalarExpr recon = diff_partial(L.expr, b.field(alpha));
        for (std::size_t l = 0; l < b.r(); ++l)
          recon = recon - total_derivative(cc.rho1[alpha][l], l);
        CHECK(equivalent(delta[alpha], recon));
      }
    }
  }
}

TEST_CASE("Euler-Lagrange annihilates total divergences") {
  std::mt19937 rng(953);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int trial = 0; trial < 30; ++trial) {
    std::size_t r = 2 + coin(rng);
    BundleSpec b = vt::test_bundle(r, 1 + coin(rng));
    Density F = vt::random_density(rng, b, 1, 5);
    std::uniform_int_distribution<std::size_t> dirs(0, r - 1);
    Density dF(b, total_derivative(F.expr, dirs(rng)), 2);
    for (const auto& component : euler_lagrange(dF)) CHECK(is_zero(component));
  }
}
