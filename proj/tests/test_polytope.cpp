#include "doctest.h"

#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "bellcav/lhv.hpp"
#include "bellcav/polytope.hpp"
#include "bellcav/quantum.hpp"

using namespace bellcav;
using namespace bellcav::polytope;

namespace {

BehaviorTable pr_box() {
  // p(a,b|x,y) = 1/2 iff a xor b = x*y
  BehaviorTable t;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y)
          if ((a ^ b) == (x & y)) t.at(a, b, x, y) = 0.5;
  return t;
}

/// CHSH by direct 16-cell evaluation, no shared code with chsh_value.
double oracle_chsh(const BehaviorTable& t) {
  double s = 0.0;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) {
      double e = 0.0;
      e += t.at(0, 0, x, y) + t.at(1, 1, x, y) - t.at(0, 1, x, y) - t.at(1, 0, x, y);
      s += (x == 1 && y == 1) ? -e : e;
    }
  return s;
}

}  // namespace

TEST_CASE("exactly 16 distinct deterministic vertices") {
  const auto vertices = enumerate_deterministic_vertices();
  REQUIRE(vertices.size() == 16);
  std::set<std::array<double, 16>> distinct;
  for (const auto& v : vertices) distinct.insert(v.p);
  CHECK(distinct.size() == 16);
  for (const auto& v : vertices) {
    CHECK_NOTHROW(v.validate(0.0));
    CHECK(v.signaling() == 0.0);
    for (double p : v.p) CHECK((p == 0.0 || p == 1.0));
  }
}

TEST_CASE("every vertex equals behavior_from_lhv of its generating strategy") {
  const auto vertices = enumerate_deterministic_vertices();
  for (int k = 0; k < 16; ++k) {
    const auto strat = DeterministicStrategy::from_index(k);
    CHECK(strat.index() == k);
    lhv::LhvModel m;
    m.alice_space = {1};
    m.bob_space = {1};
    m.alice_response =
        lhv::ResponseFunction::indicator(1, [&](int x, std::size_t) { return strat.alice_map[x]; });
    m.bob_response =
        lhv::ResponseFunction::indicator(1, [&](int y, std::size_t) { return strat.bob_map[y]; });
    m.joint = lhv::JointDistribution::point_mass(1, 1, 0, 0);
    CHECK(lhv::behavior_from_lhv(m) == vertices[static_cast<std::size_t>(k)]);
  }
}

TEST_CASE("vertex CHSH values are exactly +/-2, eight of each") {
  const auto vertices = enumerate_deterministic_vertices();
  int plus = 0, minus = 0;
  double maximum = -10.0;
  for (const auto& v : vertices) {
    const double s = chsh_value(v);
    CHECK(s == oracle_chsh(v));
    if (s == 2.0) ++plus;
    if (s == -2.0) ++minus;
    maximum = std::max(maximum, s);
  }
  CHECK(plus == 8);
  CHECK(minus == 8);
  CHECK(maximum == 2.0);  // the local bound, exactly
}

TEST_CASE("chsh of the uniform table is zero; PR box reaches 4") {
  CHECK(chsh_value(BehaviorTable::uniform()) == 0.0);
  CHECK(chsh_value(pr_box()) == 4.0);
  CHECK(oracle_chsh(pr_box()) == 4.0);
}

TEST_CASE("chsh rejects invalid tables") {
  BehaviorTable bad = BehaviorTable::uniform();
  bad.p[3] = std::nan("");
  CHECK_THROWS_AS(chsh_value(bad), std::invalid_argument);
  BehaviorTable unnormalized = BehaviorTable::uniform();
  unnormalized.p[0] = 0.5;
  CHECK_THROWS_AS(chsh_value(unnormalized), std::invalid_argument);
}

TEST_CASE("uniform table is local with near-zero distance") {
  const auto cert = local_membership(BehaviorTable::uniform());
  CHECK(cert.verdict == Verdict::local);
  CHECK(cert.distance < 1e-9);
  CHECK(cert.chsh == 0.0);
  REQUIRE(cert.weights.size() == 16);
  double sum = 0.0;
  for (double w : cert.weights) {
    CHECK(w >= 0.0);
    sum += w;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("each vertex is local with a weight-1 certificate") {
  const auto vertices = enumerate_deterministic_vertices();
  for (int k = 0; k < 16; ++k) {
    const auto cert = local_membership(vertices[static_cast<std::size_t>(k)]);
    CHECK(cert.verdict == Verdict::local);
    CHECK(cert.distance < 1e-9);
    CHECK(cert.weights[static_cast<std::size_t>(k)] == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("singlet behavior and PR box are certified nonlocal") {
  const auto singlet = quantum::behavior_from_state(quantum::TwoQubitState::singlet(),
                                                    quantum::MeasurementSettings::canonical_chsh());
  const auto cert = local_membership(singlet);
  CHECK(cert.verdict == Verdict::nonlocal);
  CHECK(cert.distance > 1e-7);
  CHECK(cert.weights.empty());
  CHECK(std::abs(cert.chsh) > 2.0 + 1e-6);  // CHSH cross-check of the LP verdict

  const auto pr = local_membership(pr_box());
  CHECK(pr.verdict == Verdict::nonlocal);
  CHECK(pr.chsh == 4.0);
  CHECK(pr.distance > cert.distance);  // PR box sits farther out than the quantum point
}

TEST_CASE("soundness: every LHV behavior is certified local and reconstructed") {
  RandomStream rng(71);
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const auto model = lhv::random_lhv_model(rng, 1 + rep % 6, 1 + (rep / 6) % 6);
    const auto behavior = lhv::behavior_from_lhv(model);
    const auto cert = local_membership(behavior);
    REQUIRE(cert.verdict == Verdict::local);
    worst = std::max(worst, cert.distance);

    // Certificate reconstruction: the weights rebuild the behavior.
    const auto vertices = enumerate_deterministic_vertices();
    for (std::size_t cell = 0; cell < 16; ++cell) {
      double mix = 0.0;
      for (std::size_t k = 0; k < 16; ++k) mix += cert.weights[k] * vertices[k].p[cell];
      CHECK(std::abs(mix - behavior.p[cell]) <= cert.distance + 1e-15);
    }
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("chsh above 2 implies a nonlocal verdict on noisy PR mixtures") {
  // (1-w) * uniform + w * PR box has S = 4w; crossing w = 1/2 leaves the polytope.
  for (double w : {0.0, 0.25, 0.4995, 0.5005, 0.6, 0.9}) {
    BehaviorTable mix;
    const auto pr = pr_box();
    const auto uni = BehaviorTable::uniform();
    for (std::size_t i = 0; i < 16; ++i) mix.p[i] = (1.0 - w) * uni.p[i] + w * pr.p[i];
    const auto cert = local_membership(mix);
    const double s = chsh_value(mix);
    CHECK(s == doctest::Approx(4.0 * w).epsilon(1e-12));
    if (s > 2.0 + 1e-6) CHECK(cert.verdict == Verdict::nonlocal);
    if (s < 2.0 - 1e-6) CHECK(cert.verdict == Verdict::local);
  }
}

TEST_CASE("membership rejects NaN and unnormalized tables before the LP") {
  BehaviorTable bad = BehaviorTable::uniform();
  bad.p[5] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(local_membership(bad), std::invalid_argument);
}
