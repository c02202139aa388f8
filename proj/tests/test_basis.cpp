#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <dstab/basis.hpp>

using namespace dstab;

TEST(Basis, GradedLexOrderDegreeThree) {
    const auto b = basis::monomials_up_to_degree(2, 3);
    const std::vector<std::string> want{"x1", "x2", "x1^2", "x1*x2", "x2^2", "x1^3", "x1^2*x2", "x1*x2^2", "x2^3"};
    EXPECT_EQ(b.names(), want);
    EXPECT_TRUE(b.factor_closed());
}

TEST(Basis, SizeIsBinomial) {
    for (int n = 1; n <= 3; ++n)
        for (int d = 1; d <= 4; ++d) {
            // S = C(n+d, d) - 1
            double c = 1.0;
            for (int k = 1; k <= d; ++k) c = c * (n + k) / k;
            EXPECT_EQ(basis::monomials_up_to_degree(n, d).S(), static_cast<int>(std::lround(c)) - 1);
        }
}

TEST(Basis, EvaluationMatchesPowers) {
    const auto b = basis::monomials_up_to_degree(3, 3);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int s = 0; s < 50; ++s) {
        Vec x(3);
        for (int j = 0; j < 3; ++j) x(j) = u(rng);
        const Vec z = eval_basis(b, x);
        for (int k = 0; k < b.S(); ++k) {
            const auto e = *b.exponents(k);
            double want = 1.0;
            for (int j = 0; j < 3; ++j) want *= std::pow(x(j), e[static_cast<std::size_t>(j)]);
            EXPECT_NEAR(z(k), want, 1e-14 * (1.0 + std::abs(want)));
        }
    }
}

TEST(Basis, ScalarTermsEvaluate) {
    const auto b = basis::from_terms(2, {"x1", "x2", "sin(x1)"});
    EXPECT_FALSE(b.all_monomial());
    Vec x(2);
    x << 0.3, -1.0;
    EXPECT_DOUBLE_EQ(eval_basis(b, x)(2), std::sin(0.3));
}

TEST(Basis, RejectsBadDictionaries) {
    EXPECT_THROW(basis::from_terms(2, {"x1"}), std::invalid_argument);            // S < n
    EXPECT_THROW(basis::from_terms(2, {"x2", "x1"}), std::invalid_argument);      // coordinates out of place
    EXPECT_THROW(basis::from_terms(2, {"x1", "x2", "x1^2", "x1^2"}), std::invalid_argument);
}

TEST(Basis, NonzeroAtOriginIsShifted) {
    const auto b = basis::from_terms(2, {"x1", "x2", "cos(x1)"});
    EXPECT_EQ(eval_basis(b, Vec::Zero(2))(2), 0.0);
    Vec x(2);
    x << 0.7, 0.1;
    EXPECT_NEAR(eval_basis(b, x)(2), std::cos(0.7) - 1.0, 1e-15);
}

TEST(Basis, FactorClosedness) {
    EXPECT_TRUE(basis::from_terms(2, {"x1", "x2", "x1^2", "x1^3"}).factor_closed());
    EXPECT_FALSE(basis::from_terms(2, {"x1", "x2", "x1^3"}).factor_closed());
}

TEST(Basis, InputBasisAffineEntries) {
    const auto w = InputBasisSpec::from_expressions(2, {{"1"}, {"x2"}});
    EXPECT_EQ(w.q(), 2);
    EXPECT_EQ(w.m(), 1);
    Vec x(2);
    x << 0.4, -0.7;
    const Mat W = eval_input_basis(w, x);
    EXPECT_DOUBLE_EQ(W(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(W(1, 0), -0.7);
}
