#include <cavg/common/error.hpp>
#include <cavg/sim/idm.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace cavg;

namespace {

sim::IdmParams defaults() { return {}; }

} // namespace

// Hand computation with v0 = 30 km/h, T = 1, a = 1, b = 1.5, delta = 4, s0 = 2:
// v = 5, leader at the same speed, gap 20 ->
// 1 - (5 / 8.333..)^4 - ((2 + 5) / 20)^2 = 1 - 0.1296 - 0.1225 = 0.7479.
TEST(Idm, AccelerationMatchesHandComputation) {
	EXPECT_NEAR(sim::idm_accel(5.0, 20.0, 5.0, defaults()), 0.7479, 1e-12);
}

TEST(Idm, ApproachTermUsesSpeedDifference) {
	// dv = 5 - 3 = 2: s* = 2 + 5 + 5 * 2 / (2 sqrt(1.5)) = 7 + 10 / 2.449489...
	const double s_star = 7.0 + 10.0 / (2.0 * std::sqrt(1.5));
	const double expected = 1.0 - 0.1296 - (s_star / 20.0) * (s_star / 20.0);
	EXPECT_NEAR(sim::idm_accel(5.0, 20.0, 3.0, defaults()), expected, 1e-12);
	EXPECT_NEAR(sim::idm_desired_gap(5.0, 3.0, defaults()), s_star, 1e-12);
}

TEST(Idm, FreeRoadAcceleration) {
	EXPECT_DOUBLE_EQ(sim::idm_free_accel(0.0, defaults()), 1.0);
	EXPECT_NEAR(sim::idm_free_accel(30.0 / 3.6, defaults()), 0.0, 1e-12);
}

TEST(Idm, NonPositiveGapIsRejected) {
	try {
		sim::idm_accel(5.0, 0.0, 5.0, defaults());
		FAIL() << "expected DegenerateGap";
	} catch (const Error& e) {
		EXPECT_EQ(e.code(), ErrorCode::DegenerateGap);
	}
	EXPECT_THROW(sim::idm_accel(5.0, -1.0, 5.0, defaults()), Error);
}

TEST(Idm, EquilibriumSpeedZeroesAcceleration) {
	for (double gap : {3.0, 5.45, 10.0, 25.0, 80.0}) {
		const double v = sim::idm_equilibrium_speed(gap, defaults());
		EXPECT_GT(v, 0.0);
		EXPECT_LT(v, 30.0 / 3.6);
		EXPECT_NEAR(sim::idm_accel(v, gap, v, defaults()), 0.0, 1e-10) << "gap " << gap;
	}
	EXPECT_EQ(sim::idm_equilibrium_speed(2.0, defaults()), 0.0);
}

TEST(Idm, AccelerationDecreasesWithSpeedAtFixedGap) {
	double prev = sim::idm_accel(0.0, 15.0, 0.0, defaults());
	for (double v = 0.5; v < 8.0; v += 0.5) {
		const double a = sim::idm_accel(v, 15.0, v, defaults());
		EXPECT_LT(a, prev);
		prev = a;
	}
}
