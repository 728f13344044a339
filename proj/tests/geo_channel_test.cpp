#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "invariants.hpp"
#include "mecsim/error.hpp"
#include "mecsim/geo_channel.hpp"

using namespace mecsim;
using namespace mecsim::geo;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kIo;
}

// Trapezoid integral of G along the ray, written out independently.
double ground_los_oracle(const Position3D& m, const Position3D& n, double radius,
                         double density, const std::function<double(double)>& g, int panels) {
  const double d = std::sqrt((m.x - n.x) * (m.x - n.x) + (m.y - n.y) * (m.y - n.y) +
                             (m.z - n.z) * (m.z - n.z));
  const double upper = d / (2.0 * radius);
  const double h = upper / panels;
  double sum = 0.0;
  for (int i = 0; i <= panels; ++i) {
    const double x = i * h;
    const double height = n.z + (m.z - n.z) * (x / upper);
    sum += (i == 0 || i == panels ? 0.5 : 1.0) * g(height);
  }
  return std::exp(-2.0 * radius * density * sum * h);
}

}  // namespace

TEST(Distance, Examples) {
  EXPECT_DOUBLE_EQ(distance({0, 0, 0}, {3, 4, 0}), 5.0);
  EXPECT_DOUBLE_EQ(distance({1, 2, 3}, {1, 2, 3}), 0.0);
  EXPECT_DOUBLE_EQ(distance({1, 2, 3}, {4, 6, 3}), 5.0);
}

TEST(AerialLos, FlatSigmoidGivesHalf) {
  ChannelParams p;
  p.alpha = 1.0;
  p.beta = 0.0;
  EXPECT_DOUBLE_EQ(p_los_aerial({0, 0, 100}, {3, 7, 0}, p), 0.5);
  EXPECT_DOUBLE_EQ(p_los_aerial({50, 0, 1}, {0, 0, 1}, p), 0.5);
}

TEST(AerialLos, DirectlyOverhead) {
  ChannelParams p;
  p.alpha = 1.0;
  p.beta = 0.1;
  const double expected = 1.0 / (1.0 + std::exp(-0.1 * (90.0 - 1.0)));
  EXPECT_NEAR(p_los_aerial({5, 5, 100}, {5, 5, 0}, p), expected, 1e-12);
  EXPECT_NEAR(expected, 0.99986, 1e-5);
}

TEST(AerialLos, UrbanConstantsAt45Degrees) {
  ChannelParams p;
  p.alpha = 9.61;
  p.beta = 0.16;
  EXPECT_NEAR(elevation_deg({0, 0, 10}, {10, 0, 0}), 45.0, 1e-12);
  EXPECT_NEAR(p_los_aerial({0, 0, 10}, {10, 0, 0}, p), 0.9676918999472423, 1e-12);
}

TEST(AerialLos, CoincidentPointsRejected) {
  EXPECT_EQ(code_of([] { p_los_aerial({1, 1, 1}, {1, 1, 1}, ChannelParams{}); }),
            ErrorCode::kDegenerateGeometry);
}

TEST(GroundLos, NoObstructions) {
  ObstructionModel o;
  o.density = 0.0;
  EXPECT_EQ(p_los_ground({0, 0, 25}, {100, 0, 1.5}, o), 1.0);
  o.density = 0.1;
  o.radius = 0.0;
  EXPECT_EQ(p_los_ground({0, 0, 25}, {100, 0, 1.5}, o), 1.0);
}

TEST(GroundLos, UnitCcdfMatchesFinePanelOracle) {
  ObstructionModel o;
  o.radius = 1.0;
  o.density = 0.1;
  o.ccdf = [](double) { return 1.0; };
  const Position3D m{10, 0, 0}, n{0, 0, 0};
  const double oracle = ground_los_oracle(m, n, 1.0, 0.1, o.ccdf, 4000);
  EXPECT_NEAR(p_los_ground(m, n, o), oracle, 1e-12);
  EXPECT_NEAR(oracle, std::exp(-1.0), 1e-12);
}

TEST(GroundLos, ExponentialCcdfMatchesFinePanelOracle) {
  ObstructionModel o;
  o.radius = 10.0;
  o.density = 3e-4;
  const Position3D m{400, 300, 25}, n{0, 0, 1.5};
  const auto g = [](double h) { return h <= 0.0 ? 1.0 : std::exp(-h / 15.0); };
  EXPECT_NEAR(p_los_ground(m, n, o), ground_los_oracle(m, n, 10.0, 3e-4, g, 4000), 1e-6);
}

TEST(GroundLos, AlternativeUpperLimit) {
  ObstructionModel o;
  o.radius = 2.0;
  o.density = 0.01;
  o.ccdf = [](double) { return 1.0; };
  o.upper_limit = IntegralUpperLimit::kHalfDistanceTimesRadius;
  // Upper limit (D/2) * r = 10, integral 10, exponent 2 * 2 * 0.01 * 10.
  EXPECT_NEAR(p_los_ground({10, 0, 0}, {0, 0, 0}, o), std::exp(-0.4), 1e-12);
}

TEST(ExcessLoss, Examples) {
  ChannelParams p;
  p.eta_los_db = 1.0;
  p.eta_nlos_db = 21.0;
  EXPECT_DOUBLE_EQ(mean_excess_loss(1.0, p), 1.0);
  EXPECT_DOUBLE_EQ(mean_excess_loss(0.0, p), 21.0);
  EXPECT_DOUBLE_EQ(mean_excess_loss(0.25, p), 16.0);
}

TEST(PathLoss, Examples) {
  ChannelParams p;
  p.light_speed = 3e8;
  p.carrier_hz = p.light_speed / (4.0 * std::numbers::pi);
  EXPECT_NEAR(path_loss_db(1.0, p, 0.0), 0.0, 1e-12);
  EXPECT_NEAR(path_loss_db(10.0, p, 0.0), 20.0, 1e-12);
  p.carrier_hz = 2e9;
  EXPECT_NEAR(path_loss_db(100.0, p, 1.0), 79.46, 5e-3);
  EXPECT_NEAR(path_loss_db({0, 0, 0}, {60, 80, 0}, p, 1.0), 79.46, 5e-3);
}

TEST(PathLoss, ZeroDistanceRejected) {
  EXPECT_EQ(code_of([] { path_loss_db(0.0, ChannelParams{}, 1.0); }),
            ErrorCode::kDegenerateGeometry);
}

TEST(ChannelGain, Examples) {
  EXPECT_DOUBLE_EQ(channel_gain(1.0, 1.0, {1.0, 1.0}), 1.0);
  EXPECT_DOUBLE_EQ(channel_gain(2.0, 2.0, {4.0, 1.0}), 1.0);
  EXPECT_DOUBLE_EQ(channel_gain(3.0, 7.0, {0.0, 1.0}), 0.0);
}

TEST(ChannelGain, NonPositiveDenominatorRejected) {
  EXPECT_EQ(code_of([] { channel_gain(0.0, 1.0, {1.0, 1.0}); }), ErrorCode::kDegenerateChannel);
  EXPECT_EQ(code_of([] { channel_gain(1.0, -2.0, {1.0, 1.0}); }), ErrorCode::kDegenerateChannel);
}

TEST(DataRate, Examples) {
  EXPECT_EQ(data_rate(1.0, 0.0, 1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(data_rate(1.0, 1.0, 1.0, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(data_rate(1.0, 3.0, 1.0, 1.0), 2.0);
  EXPECT_GT(data_rate(0.5, 0.2, 1e-3, 10.0), data_rate(0.5, 0.1, 1e-3, 10.0));
  EXPECT_GT(data_rate(0.6, 0.1, 1e-3, 10.0), data_rate(0.5, 0.1, 1e-3, 10.0));
}

TEST(Associate, Examples) {
  EXPECT_EQ(associate(std::vector<double>{0.1, 0.9, 0.3}), 1u);
  EXPECT_EQ(associate(std::vector<double>{0.5, 0.5}), 0u);
  EXPECT_EQ(associate(std::vector<double>{0.2}), 0u);
  EXPECT_EQ(code_of([] { associate(std::vector<double>{}); }), ErrorCode::kNoAssociation);
}

TEST(Fading, NonNegativeAndSeeded) {
  Rng a(11), b(11);
  for (int i = 0; i < 1000; ++i) {
    const auto fa = sample_fading(a, 3.0);
    const auto fb = sample_fading(b, 3.0);
    EXPECT_GE(fa.g, 0.0);
    EXPECT_GE(fa.rd, 0.0);
    EXPECT_EQ(fa.g, fb.g);
    EXPECT_EQ(fa.rd, fb.rd);
  }
}

TEST(Fading, RicianAmplitudeHasUnitPower) {
  Rng rng(5);
  double power = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double rd = sample_fading(rng, 3.0).rd;
    power += rd * rd;
  }
  EXPECT_NEAR(power / n, 1.0, 0.01);
}

TEST(Mobility, StaysInsideArena) {
  Rng rng(3);
  const Arena arena{100.0, 50.0};
  std::vector<double> speeds(20, 30.0);
  auto model = MobilityModel::random(arena, speeds, rng);
  std::vector<Position3D> pos(20);
  for (auto& p : pos) p = {uniform(rng, 0, 100), uniform(rng, 0, 50), 1.5};
  for (int t = 0; t < 1000; ++t) {
    model.step(pos);
    for (const auto& p : pos) {
      ASSERT_GE(p.x, 0.0);
      ASSERT_LE(p.x, 100.0);
      ASSERT_GE(p.y, 0.0);
      ASSERT_LE(p.y, 50.0);
      ASSERT_EQ(p.z, 1.5);
    }
  }
  std::vector<Position3D> wrong(3);
  EXPECT_EQ(code_of([&] { model.step(wrong); }), ErrorCode::kShape);
}

TEST(ChannelParams, InvariantsValidated) {
  ChannelParams p;
  EXPECT_NO_THROW(p.validate());
  p.eta_los_db = 30.0;
  EXPECT_EQ(code_of([&] { p.validate(); }), ErrorCode::kConfig);
  p = {};
  p.carrier_hz = 0.0;
  EXPECT_EQ(code_of([&] { p.validate(); }), ErrorCode::kConfig);
}

TEST(GeoInvariants, HoldOnRandomCases) {
  for (const auto& r : mecsim::testing::geo_channel_properties(1000, 101)) {
    EXPECT_TRUE(r.ok()) << r.name << ": " << r.failures << "/" << r.cases << " failed; "
                        << r.counterexample;
  }
}
