#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "mpgdrive/dynamics.hpp"
#include "mpgdrive/errors.hpp"

using namespace mpgdrive;

namespace {

VehicleGeometry wheelbase_3m() {
  VehicleGeometry g;
  g.l_f = 1.5;
  g.l_r = 1.5;
  return g;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

// Independent scan: a grid action is feasible when, after one step with the
// neighbours coasting, both bumper-gap TTCs are at least tau.
bool scan_feasible(double u, const VehicleState& ego, const std::optional<VehicleState>& leader,
                   const std::optional<VehicleState>& follower, double dt, double tau, const VehicleGeometry& g) {
  const VehicleState e = step_vehicle(ego, {u, 0.0}, dt, g).state;
  if (leader) {
    const VehicleState l = step_vehicle(*leader, {0.0, 0.0}, dt, g).state;
    const double gap = std::max(0.0, l.x - e.x - g.body_length);
    if (time_to_collision(gap, e.v * std::cos(e.phi) - l.v * std::cos(l.phi)) < tau) return false;
  }
  if (follower) {
    const VehicleState f = step_vehicle(*follower, {0.0, 0.0}, dt, g).state;
    const double gap = std::max(0.0, e.x - f.x - g.body_length);
    if (time_to_collision(gap, f.v * std::cos(f.phi) - e.v * std::cos(e.phi)) < tau) return false;
  }
  return true;
}

}  // namespace

TEST(SlipAngle, Golden) {
  EXPECT_EQ(slip_angle(0.0, wheelbase_3m()), 0.0);
  EXPECT_NEAR(slip_angle(0.1, wheelbase_3m()), 0.0501253131, 1e-9);
  EXPECT_NEAR(slip_angle(0.1, wheelbase_3m()), 0.050126, 1e-6);
}

TEST(SlipAngle, OddSymmetry) {
  for (double d : {0.01, 0.2, 0.7, 1.3}) EXPECT_EQ(slip_angle(-d, {}), -slip_angle(d, {}));
}

TEST(SlipAngle, RejectsNonFinite) {
  EXPECT_THROW(slip_angle(std::nan(""), {}), DomainError);
  EXPECT_THROW(slip_angle(kInf, {}), DomainError);
}

TEST(StepVehicle, StandstillIsFixedPoint) {
  const VehicleState s{12.0, -3.0, 0.0, 0.2};
  const StepResult r = step_vehicle(s, {0.0, 0.0}, 0.1, {});
  EXPECT_EQ(r.state, s);
  EXPECT_FALSE(r.speed_clamped);
}

TEST(StepVehicle, StraightAcceleration) {
  const StepResult r = step_vehicle({0.0, 0.0, 10.0, 0.0}, {2.0, 0.0}, 0.1, {});
  EXPECT_NEAR(r.state.x, 1.0, 1e-6);
  EXPECT_NEAR(r.state.y, 0.0, 1e-6);
  EXPECT_NEAR(r.state.v, 10.2, 1e-6);
  EXPECT_NEAR(r.state.phi, 0.0, 1e-6);
}

TEST(StepVehicle, SteeredStep) {
  const StepResult r = step_vehicle({0.0, 0.0, 10.0, 0.0}, {0.0, 0.1}, 0.1, wheelbase_3m());
  EXPECT_NEAR(r.state.x, 0.9987439895, 1e-6);
  EXPECT_NEAR(r.state.y, 0.0501043253, 1e-6);
  EXPECT_NEAR(r.state.v, 10.0, 1e-6);
  EXPECT_NEAR(r.state.phi, 0.0334028836, 1e-6);
}

TEST(StepVehicle, SpeedClampFlags) {
  const StepResult up = step_vehicle({0, 0, 29.5, 0}, {9.0, 0.0}, 0.1, {});
  EXPECT_EQ(up.state.v, kMaxSpeed);
  EXPECT_TRUE(up.speed_clamped);
  const StepResult down = step_vehicle({0, 0, 0.3, 0}, {-9.0, 0.0}, 0.1, {});
  EXPECT_EQ(down.state.v, 0.0);
  EXPECT_TRUE(down.speed_clamped);
}

TEST(StepVehicle, CoastingPreservesSpeedAndHeading) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> pos(-500, 500), vel(0, 30), head(-3, 3), dt(0.01, 0.5);
  for (int k = 0; k < 1000; ++k) {
    const VehicleState s{pos(rng), pos(rng), vel(rng), head(rng)};
    const double h = dt(rng);
    const VehicleState n = step_vehicle(s, {0.0, 0.0}, h, {}).state;
    EXPECT_EQ(n.v, s.v);
    EXPECT_EQ(n.phi, s.phi);
    EXPECT_NEAR(std::hypot(n.x - s.x, n.y - s.y), s.v * h, 1e-12);
  }
}

TEST(StepVehicle, JacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> vel(1, 29), head(-0.5, 0.5), acc(-3, 3), steer(-0.3, 0.3);
  const VehicleGeometry g;
  for (int k = 0; k < 20; ++k) {
    VehicleState s{10.0, 1.0, vel(rng), head(rng)};
    VehicleAction a{acc(rng), steer(rng)};
    const StepJacobian jac = step_vehicle_jacobian(s, a, 0.1, g);
    auto as_vec = [](const VehicleState& v) { return Eigen::Vector4d(v.x, v.y, v.v, v.phi); };
    const double h = 1e-6;
    for (int c = 0; c < 4; ++c) {
      VehicleState p = s, m = s;
      double* pp[] = {&p.x, &p.y, &p.v, &p.phi};
      double* mm[] = {&m.x, &m.y, &m.v, &m.phi};
      *pp[c] += h;
      *mm[c] -= h;
      const Eigen::Vector4d fd = (as_vec(step_vehicle(p, a, 0.1, g).state) - as_vec(step_vehicle(m, a, 0.1, g).state)) / (2 * h);
      EXPECT_LT((fd - jac.wrt_state.col(c)).norm(), 1e-7);
    }
    for (int c = 0; c < 2; ++c) {
      VehicleAction p = a, m = a;
      (c == 0 ? p.u : p.delta_f) += h;
      (c == 0 ? m.u : m.delta_f) -= h;
      const Eigen::Vector4d fd = (as_vec(step_vehicle(s, p, 0.1, g).state) - as_vec(step_vehicle(s, m, 0.1, g).state)) / (2 * h);
      EXPECT_LT((fd - jac.wrt_action.col(c)).norm(), 1e-7);
    }
  }
}

// The successor of a vehicle is a function of its own state and action only.
TEST(StepVehicle, IndependentOfOtherVehicles) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> pos(-300, 300), vel(0, 30), head(-1, 1), acc(-kGravity, kGravity),
      steer(-1.4, 1.4);
  std::vector<VehicleState> world(6);
  std::vector<VehicleAction> actions(6);
  auto draw = [&](int k) {
    world[k] = {pos(rng), pos(rng), vel(rng), head(rng)};
    actions[k] = {acc(rng), steer(rng)};
  };
  for (int k = 0; k < 6; ++k) draw(k);
  const VehicleState reference = step_vehicle(world[0], actions[0], 0.1, {}).state;
  for (int trial = 0; trial < 10000; ++trial) {
    draw(1 + trial % 5);
    std::vector<VehicleState> next;
    for (int k = 0; k < 6; ++k) next.push_back(step_vehicle(world[k], actions[k], 0.1, {}).state);
    ASSERT_EQ(next[0], reference);
  }
}

TEST(TimeToCollision, Golden) {
  EXPECT_EQ(time_to_collision(30.0, 10.0), 3.0);
  EXPECT_EQ(time_to_collision(30.0, -2.0), kInf);
  EXPECT_EQ(time_to_collision(0.0, 5.0), 0.0);
  EXPECT_EQ(time_to_collision(10.0, 0.0), kInf);
  EXPECT_THROW(time_to_collision(-1.0, 5.0), DomainError);
}

TEST(TimeToCollision, DecreasingInClosingSpeed) {
  double last = kInf;
  for (double dv = 0.05; dv < 40.0; dv += 0.05) {
    const double t = time_to_collision(25.0, dv);
    EXPECT_LT(t, last);
    last = t;
  }
}

TEST(FeasibleInterval, NoNeighboursIsFullRange) {
  const AccelInterval iv = feasible_action_interval({0, 0, 15, 0}, std::nullopt, std::nullopt, 0.1, 3.0, {});
  EXPECT_EQ(iv.lo, -kGravity);
  EXPECT_EQ(iv.hi, kGravity);
  EXPECT_FALSE(iv.fallback);
}

TEST(FeasibleInterval, DistantLeaderAtEqualSpeed) {
  const VehicleGeometry g;
  const VehicleState ego{0, 0, 15, 0};
  const VehicleState leader{100.0 + g.body_length, 0, 15, 0};
  const AccelInterval iv = feasible_action_interval(ego, leader, std::nullopt, 0.1, 3.0, g);
  EXPECT_EQ(iv.lo, -kGravity);
  EXPECT_EQ(iv.hi, kGravity);
  for (int k = 0; k <= 10000; ++k) {
    const double u = -kGravity + 2 * kGravity * k / 10000.0;
    EXPECT_TRUE(scan_feasible(u, ego, leader, std::nullopt, 0.1, 3.0, g));
  }
}

TEST(FeasibleInterval, CloseFasterEgoMustBrake) {
  const VehicleGeometry g;
  const VehicleState ego{0, 0, 20, 0};
  const VehicleState leader{3.0 + g.body_length, 0, 10, 0};
  const AccelInterval iv = feasible_action_interval(ego, leader, std::nullopt, 0.1, 3.0, g);
  EXPECT_LT(iv.hi, 0.0);
}

TEST(FeasibleInterval, MatchesGridScan) {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> gap(0.5, 60), vel(0, 30);
  std::bernoulli_distribution coin(0.5);
  const VehicleGeometry g;
  const double dt = 0.1, tau = 3.0;
  constexpr int kGrid = 10000;
  const double step = 2 * kGravity / kGrid;
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const VehicleState ego{100, 0, vel(rng), 0};
    std::optional<VehicleState> leader, follower;
    if (coin(rng)) leader = VehicleState{ego.x + g.body_length + gap(rng), 0, vel(rng), 0};
    if (coin(rng)) follower = VehicleState{ego.x - g.body_length - gap(rng), 0, vel(rng), 0};
    const AccelInterval iv = feasible_action_interval(ego, leader, follower, dt, tau, g);
    double lo = kInf, hi = -kInf;
    for (int k = 0; k <= kGrid; ++k) {
      const double u = -kGravity + step * k;
      if (scan_feasible(u, ego, leader, follower, dt, tau, g)) {
        lo = std::min(lo, u);
        hi = std::max(hi, u);
      }
    }
    if (lo > hi) {
      EXPECT_TRUE(iv.fallback);
      EXPECT_EQ(iv.lo, iv.hi);
      continue;
    }
    ++checked;
    EXPECT_FALSE(iv.fallback);
    EXPECT_NEAR(iv.lo, lo, step);
    EXPECT_NEAR(iv.hi, hi, step);
  }
  EXPECT_GT(checked, 100);
}

TEST(FeasibleInterval, ConflictingBoundsSplitTheViolation) {
  const VehicleGeometry g;
  // Leader slower and close, follower faster and close: no action keeps both TTCs.
  const VehicleState ego{100, 0, 15, 0};
  const VehicleState leader{100 + g.body_length + 2.0, 0, 12, 0};
  const VehicleState follower{100 - g.body_length - 2.0, 0, 18, 0};
  const FeasibleBounds b = feasible_action_bounds(ego, leader, follower, 0.1, 3.0, g);
  EXPECT_TRUE(b.interval.fallback);
  EXPECT_EQ(b.interval.lo, b.interval.hi);
  const AccelInterval lead_only = feasible_action_interval(ego, leader, std::nullopt, 0.1, 3.0, g);
  const AccelInterval follow_only = feasible_action_interval(ego, std::nullopt, follower, 0.1, 3.0, g);
  EXPECT_NEAR(b.interval.lo, std::clamp(0.5 * (lead_only.hi + follow_only.lo), -kGravity, kGravity), 1e-12);
}

TEST(FeasibleInterval, UnreachableLeaderBoundFallsBackToFullBraking) {
  const VehicleGeometry g;
  const VehicleState ego{0, 0, 28, 0};
  const VehicleState leader{g.body_length + 0.5, 0, 0, 0};
  const AccelInterval iv = feasible_action_interval(ego, leader, std::nullopt, 0.1, 3.0, g);
  EXPECT_TRUE(iv.fallback);
  EXPECT_EQ(iv.lo, -kGravity);
  EXPECT_EQ(iv.hi, -kGravity);
}

TEST(FeasibleInterval, SensitivitiesMatchFiniteDifferences) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> gap(1, 40), vel(2, 28);
  const VehicleGeometry g;
  const double h = 1e-6;
  int checked = 0;
  for (int trial = 0; trial < 200 && checked < 40; ++trial) {
    VehicleState ego{100, 0, vel(rng), 0};
    VehicleState leader{ego.x + g.body_length + gap(rng), 0, vel(rng), 0};
    VehicleState follower{ego.x - g.body_length - gap(rng), 0, vel(rng), 0};
    const FeasibleBounds b = feasible_action_bounds(ego, leader, follower, 0.1, 3.0, g);
    if (b.interval.fallback) continue;
    const bool lo_open = b.interval.lo > -kGravity, hi_open = b.interval.hi < kGravity;
    if (!lo_open && !hi_open) continue;
    ++checked;
    double* fields[] = {&ego.x, &ego.v, &leader.x, &leader.v, &follower.x, &follower.v};
    const double lo_s[] = {b.lo.ego_x, b.lo.ego_v, b.lo.leader_x, b.lo.leader_v, b.lo.follower_x, b.lo.follower_v};
    const double hi_s[] = {b.hi.ego_x, b.hi.ego_v, b.hi.leader_x, b.hi.leader_v, b.hi.follower_x, b.hi.follower_v};
    for (int c = 0; c < 6; ++c) {
      const double saved = *fields[c];
      *fields[c] = saved + h;
      const AccelInterval p = feasible_action_interval(ego, leader, follower, 0.1, 3.0, g);
      *fields[c] = saved - h;
      const AccelInterval m = feasible_action_interval(ego, leader, follower, 0.1, 3.0, g);
      *fields[c] = saved;
      if (lo_open) EXPECT_NEAR((p.lo - m.lo) / (2 * h), lo_s[c], 1e-4);
      if (hi_open) EXPECT_NEAR((p.hi - m.hi) / (2 * h), hi_s[c], 1e-4);
    }
  }
  EXPECT_GE(checked, 10);
}

TEST(Collision, Golden) {
  const VehicleGeometry g;
  const std::vector<VehicleGeometry> geoms(2, g);
  std::vector<VehicleState> far{{0, 0, 10, 0}, {100, 0, 10, 0}};
  EXPECT_FALSE(detect_collision(far, geoms));
  std::vector<VehicleState> same{{5, 1, 10, 0}, {5, 1, 10, 0}};
  EXPECT_EQ(detect_collision(same, geoms), std::make_pair(0, 1));
  std::vector<VehicleState> touching{{0, 0, 10, 0}, {g.body_length, 0, 10, 0}};
  EXPECT_FALSE(detect_collision(touching, geoms));
  std::vector<VehicleState> overlapping{{0, 0, 10, 0}, {g.body_length - 1e-9, 0, 10, 0}};
  EXPECT_TRUE(detect_collision(overlapping, geoms));
}

TEST(Collision, FirstPairInIndexOrder) {
  const std::vector<VehicleGeometry> geoms(4);
  std::vector<VehicleState> s{{0, 0, 0, 0}, {50, 0, 0, 0}, {51, 0, 0, 0}, {0.5, 0, 0, 0}};
  EXPECT_EQ(detect_collision(s, geoms), std::make_pair(0, 3));
}

TEST(Collision, PermutationSymmetric) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pos(0, 20), lat(-4, 4), head(-0.3, 0.3);
  const std::vector<VehicleGeometry> geoms(5);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<VehicleState> s(5);
    for (auto& v : s) v = {pos(rng), lat(rng), 10, head(rng)};
    const bool hit = detect_collision(s, geoms).has_value();
    std::shuffle(s.begin(), s.end(), rng);
    EXPECT_EQ(detect_collision(s, geoms).has_value(), hit);
  }
}

TEST(Collision, BoxDistance) {
  const VehicleGeometry g;
  EXPECT_DOUBLE_EQ(box_distance({0, 0, 0, 0}, g, {10, 0, 0, 0}, g), 10 - g.body_length);
  EXPECT_DOUBLE_EQ(box_distance({0, 0, 0, 0}, g, {1, 0.5, 0, 0}, g), 0.0);
  EXPECT_DOUBLE_EQ(box_distance({0, 0, 0, 0}, g, {g.body_length + 3, g.body_width + 4, 0, 0}, g), 5.0);
}

TEST(Geometry, Validation) {
  VehicleGeometry g;
  EXPECT_NO_THROW(g.validate());
  g.l_f = 4.0;
  EXPECT_THROW(g.validate(), DomainError);
  g = {};
  g.body_width = 0.0;
  EXPECT_THROW(g.validate(), DomainError);
}
