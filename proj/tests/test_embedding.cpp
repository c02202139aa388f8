#include <gtest/gtest.h>

#include <dstab/embedding.hpp>

using namespace dstab;

namespace {

BasisSpec golden_terms() {
    return basis::from_terms(2, {"x1", "x2", "x1^2", "x2^2", "x1*x2", "x1^3", "x2^3", "x1^2*x2", "x1*x2^2"});
}

} // namespace

TEST(Embedding, GoldenMatrix) {
    const auto L = embedding::build_monomial_annihilator(golden_terms());
    ASSERT_EQ(L.rows(), 7);
    ASSERT_EQ(L.cols(), 9);
    Mat c = Mat::Zero(7, 9);
    c.rightCols(7) = -Mat::Identity(7, 7);
    Mat l1 = Mat::Zero(7, 9), l2 = Mat::Zero(7, 9);
    l1(0, 0) = l1(3, 2) = l1(5, 4) = 1.0;
    l2(1, 1) = l2(2, 0) = l2(4, 3) = l2(6, 4) = 1.0;
    EXPECT_EQ(L.constant, c);
    EXPECT_EQ(L.linear[0], l1);
    EXPECT_EQ(L.linear[1], l2);
}

TEST(Embedding, BoxVerticesFollowBitOrder) {
    const auto L = embedding::build_monomial_annihilator(golden_terms());
    Vec g(2);
    g << 3.0, 4.0;
    const auto ann = embedding::box_vertex_decomposition(L, BoxDomain::symmetric(g));
    ASSERT_EQ(ann.N(), 4);
    const std::vector<std::pair<double, double>> pts{{3, 4}, {-3, 4}, {3, -4}, {-3, -4}};
    for (int i = 0; i < 4; ++i) {
        EXPECT_DOUBLE_EQ(ann.vertex_points[static_cast<std::size_t>(i)](0), pts[static_cast<std::size_t>(i)].first);
        EXPECT_DOUBLE_EQ(ann.vertex_points[static_cast<std::size_t>(i)](1), pts[static_cast<std::size_t>(i)].second);
    }
    // bilinear weights (g1 +- x1)(g2 +- x2) / (4 g1 g2)
    Vec x(2);
    x << 1.0, -2.0;
    const Vec a = ann.alpha(x);
    EXPECT_NEAR(a(0), (3 + 1.0) * (4 - 2.0) / 48.0, 1e-15);
    EXPECT_NEAR(a(1), (3 - 1.0) * (4 - 2.0) / 48.0, 1e-15);
    EXPECT_NEAR(a(2), (3 + 1.0) * (4 + 2.0) / 48.0, 1e-15);
    EXPECT_NEAR(a(3), (3 - 1.0) * (4 + 2.0) / 48.0, 1e-15);
}

TEST(Embedding, AnnihilationOnTheBox) {
    const auto spec = golden_terms();
    Vec g(2);
    g << 3.0, 4.0;
    const auto ann = embedding::box_vertex_decomposition(embedding::build_monomial_annihilator(spec), BoxDomain::symmetric(g));
    const auto r = embedding::verify_annihilator(ann, spec, 1000, 3);
    EXPECT_LE(r.max_LZ, 1e-12);
    EXPECT_LE(r.max_sum_dev, 1e-12);
    EXPECT_LE(r.max_affine_dev, 1e-10);
    EXPECT_GE(r.min_alpha, 0.0);
    EXPECT_TRUE(r.ok());
}

TEST(Embedding, InactiveCoordinatesNeedNoBound) {
    // L depends only on x1 for {x1, x2, x1^2, x1^3}
    const auto spec = basis::from_terms(2, {"x1", "x2", "x1^2", "x1^3"});
    const auto L = embedding::build_monomial_annihilator(spec);
    const double inf = std::numeric_limits<double>::infinity();
    Vec lo(2), hi(2);
    lo << -0.5, -inf;
    hi << 0.5, inf;
    const auto ann = embedding::box_vertex_decomposition(L, BoxDomain(lo, hi));
    EXPECT_EQ(ann.N(), 2);
    Vec sl(2), sh(2);
    sl << -1, -2;
    sh << 1, 2;
    BoxDomain sb(sl, sh);
    EXPECT_TRUE(embedding::verify_annihilator(ann, spec, 500, 1, &sb).ok());
}

TEST(Embedding, UnboundedActiveCoordinateThrows) {
    const auto spec = basis::from_terms(2, {"x1", "x2", "x1^2"});
    EXPECT_THROW(embedding::box_vertex_decomposition(embedding::build_monomial_annihilator(spec), BoxDomain::global(2)),
                 std::invalid_argument);
}

TEST(Embedding, NonMonomialOrNotClosedRejected) {
    EXPECT_THROW(embedding::build_monomial_annihilator(basis::from_terms(2, {"x1", "x2", "sin(x1)"})), std::invalid_argument);
    EXPECT_THROW(embedding::build_monomial_annihilator(basis::from_terms(2, {"x1", "x2", "x1^3"})), std::invalid_argument);
}

TEST(Embedding, ScalarEnvelopeWeights) {
    // L(x) = [s(x), 0, -1] with s = sinc-like bounded function
    Mat L0(1, 3), L1(1, 3);
    L0 << 0, 0, -1;
    L1 << 1, 0, 0;
    auto s = [](const Vec& x) { return x(0) == 0.0 ? 1.0 : std::sin(x(0)) / x(0); };
    Vec vmax = Vec::Zero(2), vmin(2);
    vmin << 4.4934, 0.0;
    const auto ann = embedding::scalar_envelope_decomposition(L0, L1, s, s(vmin), 1.0, vmax, vmin, BoxDomain::global(2));
    Vec x(2);
    x << 1.2, 0.3;
    const Vec a = ann.alpha(x);
    EXPECT_NEAR(a.sum(), 1.0, 1e-15);
    EXPECT_NEAR((ann.L(x) - ann.exact(x)).cwiseAbs().maxCoeff(), 0.0, 1e-14);
}

TEST(Embedding, ConstantDecompositionHandlesSEqualsN) {
    const auto ann = embedding::constant_decomposition(2, Mat(0, 2), BoxDomain::global(2));
    EXPECT_EQ(ann.N(), 1);
    EXPECT_EQ(ann.L(Vec::Ones(2)).rows(), 0);
}

TEST(Embedding, BoxRequiresOriginInside) {
    Vec lo(1), hi(1);
    lo << 0.1;
    hi << 1.0;
    EXPECT_THROW(BoxDomain(lo, hi), std::invalid_argument);
}
