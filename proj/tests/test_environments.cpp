#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "teleop/environments.hpp"

using namespace teleop;

TEST(Environments, FreeSpaceIsZero) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-100.0, 100.0);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(environment_torque({u(rng), u(rng)}, FreeSpace{}), 0.0);
}

TEST(Environments, UnitConversion) {
    // 4 mN·m per degree, by hand: 0.004 N·m per (π/180 rad).
    const double by_hand = 0.004 / (3.14159265358979323846 / 180.0);
    EXPECT_NEAR(mnm_per_deg_to_nm_per_rad(4.0), by_hand, 1e-15);
    EXPECT_NEAR(mnm_per_deg_to_nm_per_rad(4.0), 0.229183, 1e-6);
    EXPECT_EQ(mnm_per_deg_to_nm_per_rad(0.0), 0.0);
    EXPECT_NEAR(mnm_per_deg_to_nm_per_rad(std::numbers::pi / 180.0 * 1000.0), 1.0, 1e-15);
    static_assert(mnm_per_deg_to_nm_per_rad(0.0) == 0.0);
}

TEST(Environments, TorsionSpringAtOneRadian) {
    EXPECT_NEAR(environment_torque({1.0, 0.0}, TorsionSpring{0.22918, 0.0}), -0.22918, 1e-15);
    const double k = mnm_per_deg_to_nm_per_rad(4.0);
    EXPECT_NEAR(environment_torque({1.0, 5.0}, TorsionSpring{k, 0.0}), -0.229183, 1e-6);
}

TEST(Environments, TorsionSpringAtRest) {
    EXPECT_EQ(environment_torque({0.7, 3.0}, TorsionSpring{12.0, 0.7}), 0.0);
}

TEST(Environments, TorsionSpringIsOddAboutRest) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 200; ++i) {
        const double rest = u(rng), x = u(rng);
        const TorsionSpring spring{std::abs(u(rng)) * 3.0, rest};
        EXPECT_NEAR(environment_torque({rest + x, 0.0}, spring), -environment_torque({rest - x, 0.0}, spring),
                    1e-12);
    }
}

TEST(Environments, SpringDamperAddsViscousTerm) {
    const SpringDamperEnv env{2.0, 0.5, 0.1};
    EXPECT_DOUBLE_EQ(environment_torque({0.6, 2.0}, env), -2.0 * 0.5 - 0.5 * 2.0);
}

TEST(Environments, SpringWorkAroundClosedLoopVanishes) {
    // Trapezoidal work integral of the spring torque around a closed angle loop.
    const TorsionSpring spring{mnm_per_deg_to_nm_per_rad(4.0), 0.2};
    const int n = 20000;
    double work = 0.0;
    double prev_angle = 0.2 + 0.5 * std::sin(0.0);
    double prev_torque = environment_torque({prev_angle, 0.0}, spring);
    for (int i = 1; i <= n; ++i) {
        const double phase = 2.0 * std::numbers::pi * i / n;
        const double angle = 0.2 + 0.5 * std::sin(phase) + 0.3 * std::sin(3.0 * phase);
        const double torque = environment_torque({angle, 0.0}, spring);
        work += 0.5 * (torque + prev_torque) * (angle - prev_angle);
        prev_angle = angle;
        prev_torque = torque;
    }
    EXPECT_NEAR(work, 0.0, 1e-12);
}

TEST(Environments, CustomCallback) {
    const CustomEnvironment env{[](ShaftState s) { return -3.0 * s.angle * s.angle * s.angle; }, "cubic"};
    EXPECT_DOUBLE_EQ(environment_torque({2.0, 0.0}, env), -24.0);
}

TEST(Environments, Validation) {
    EXPECT_NO_THROW(validate(EnvironmentSpec{FreeSpace{}}));
    EXPECT_THROW(validate(EnvironmentSpec{TorsionSpring{-1.0, 0.0}}), InvalidSpec);
    EXPECT_THROW(validate(EnvironmentSpec{TorsionSpring{1.0, INFINITY}}), InvalidSpec);
    EXPECT_THROW(validate(EnvironmentSpec{SpringDamperEnv{1.0, -0.5, 0.0}}), InvalidSpec);
    EXPECT_THROW(validate(EnvironmentSpec{CustomEnvironment{}}), InvalidSpec);
}
