#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include <dstab/plant.hpp>

using namespace dstab;

namespace {
Vec v2(double a, double b) {
    Vec x(2);
    x << a, b;
    return x;
}
Vec v1(double a) { return Vec::Constant(1, a); }
} // namespace

TEST(Systems, PendulumStep) {
    const auto p = systems::pendulum();
    const Vec xp = p.step(v2(0.2, -0.1), v1(0.5));
    EXPECT_DOUBLE_EQ(xp(0), 0.2 + 0.1 * -0.1);
    EXPECT_DOUBLE_EQ(xp(1), (1.0 - 0.1 * 0.01) * -0.1 + 0.1 * 9.81 * std::sin(0.2) + 0.1 * 0.5);
}

TEST(Systems, PendulumParametersAndValidation) {
    const auto p = systems::pendulum({{"Ts", 0.05}, {"l", 2.0}});
    EXPECT_DOUBLE_EQ(p.params.at("Ts"), 0.05);
    EXPECT_THROW(systems::pendulum({{"Ts", -1.0}}), std::invalid_argument);
    EXPECT_THROW(systems::pendulum({{"bogus", 1.0}}), std::invalid_argument);
}

TEST(Systems, Poly2AndAffine2) {
    const Vec x = v2(0.5, -0.4);
    const Vec a = systems::poly2().step(x, v1(0.3));
    EXPECT_DOUBLE_EQ(a(0), 0.8 * -0.4 + 0.2 * 0.125);
    EXPECT_DOUBLE_EQ(a(1), -0.6 * 0.5 + 0.16 - 0.3);
    const Vec b = systems::affine2().step(x, v1(0.3));
    EXPECT_DOUBLE_EQ(b(0), 0.5 * -0.4);
    EXPECT_DOUBLE_EQ(b(1), 0.5 + std::pow(-0.4, 3) + (1 - 0.4) * 0.3);
}

TEST(Systems, OriginIsAnEquilibrium) {
    for (const char* id : {"pendulum", "poly2", "affine2"}) {
        const auto p = systems::builtin(id);
        EXPECT_EQ(p.step(Vec::Zero(p.n), Vec::Zero(p.m)).cwiseAbs().maxCoeff(), 0.0) << id;
    }
}

TEST(Systems, ExpressionPlantMatchesBuiltin) {
    const auto e = systems::from_expressions({"0.8*x2 + 0.2*x1^3", "-0.6*x1 + x2^2 - u1"});
    const auto b = systems::poly2();
    const Vec x = v2(-0.7, 0.9), u = v1(0.25);
    EXPECT_NEAR((e.step(x, u) - b.step(x, u)).norm(), 0.0, 1e-15);
    EXPECT_TRUE(e.warnings.empty());
}

TEST(Systems, ExpressionPlantWarnsOffEquilibrium) {
    const auto e = systems::from_expressions({"x1 + 1", "x2"});
    EXPECT_FALSE(e.warnings.empty());
}

TEST(Systems, ExpressionDimensionChecks) {
    EXPECT_THROW(systems::from_expressions({"x3", "x1"}), DimensionError);
    EXPECT_THROW(systems::from_expressions({"x1 + u2", "x2"}, 1), DimensionError);
    EXPECT_THROW(systems::builtin("nope"), std::invalid_argument);
}

TEST(Systems, StepChecksShapes) {
    EXPECT_THROW(systems::poly2().step(Vec::Zero(3), v1(0)), DimensionError);
}

TEST(Systems, LinearPlant) {
    Mat A(2, 2), B(2, 1);
    A << 1, 0.1, 0, 1;
    B << 0, 0.1;
    const auto p = systems::linear(A, B);
    EXPECT_NEAR((p.step(v2(1, 2), v1(3)) - (A * v2(1, 2) + B * v1(3))).norm(), 0.0, 1e-15);
}
