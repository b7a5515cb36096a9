#include <gtest/gtest.h>

#include "backvis/patch_plan.hpp"
#include "backvis/rng.hpp"
#include "backvis/tensor.hpp"

using namespace backvis;

TEST(Tensor, ShapeInvariants) {
    Tensor t({2, 3}, 1.5);
    EXPECT_EQ(t.numel(), 6u);
    EXPECT_THROW(Tensor({2, 0}), std::invalid_argument);
    EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1.0}), std::invalid_argument);
}

TEST(Tensor, MatmulAgainstHand) {
    Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b({3, 2}, {7, 8, 9, 10, 11, 12});
    Tensor c = matmul(a, b);
    EXPECT_EQ(c.shape, (Shape{2, 2}));
    EXPECT_DOUBLE_EQ(c.data[0], 58);
    EXPECT_DOUBLE_EQ(c.data[1], 64);
    EXPECT_DOUBLE_EQ(c.data[2], 139);
    EXPECT_DOUBLE_EQ(c.data[3], 154);
    EXPECT_THROW(matmul(a, a), std::invalid_argument);
}

TEST(Tensor, TransposedMatmulsAgree) {
    NormalStream s(RngSpec::gaussian(3, 0.0, 1.0));
    Tensor a({4, 5});
    Tensor b({5, 3});
    s.fill(a);
    s.fill(b);
    Tensor c = matmul(a, b);
    // matmul_nt(a, b^T stored as [3,5])
    Tensor bt({3, 5});
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 3; ++j) bt.at2(j, i) = b.at2(i, j);
    Tensor c2 = matmul_nt(a, bt);
    for (std::size_t i = 0; i < c.numel(); ++i) EXPECT_NEAR(c.data[i], c2.data[i], 1e-12);
    // matmul_tn(a^T stored as [5,4], b)
    Tensor at({5, 4});
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 5; ++j) at.at2(j, i) = a.at2(i, j);
    Tensor c3 = matmul_tn(at, b);
    for (std::size_t i = 0; i < c.numel(); ++i) EXPECT_NEAR(c.data[i], c3.data[i], 1e-12);
}

TEST(Tensor, CosineProperties) {
    Tensor a({3}, {1, -2, 0.5});
    EXPECT_DOUBLE_EQ(cosine_similarity(a, a), 1.0);
    EXPECT_DOUBLE_EQ(cosine_similarity(a, scale(a, -1.0)), -1.0);
    Tensor z({3});
    EXPECT_DOUBLE_EQ(cosine_similarity(a, z), 0.0);
}

TEST(Tensor, RescaleUnit) {
    Tensor a({3}, {-1, 0, 1});
    Tensor r = rescale_unit(a);
    EXPECT_DOUBLE_EQ(r.data[0], 0.0);
    EXPECT_DOUBLE_EQ(r.data[1], 0.5);
    EXPECT_DOUBLE_EQ(r.data[2], 1.0);
    Tensor c({4}, 3.0);
    Tensor rc = rescale_unit(c);
    for (auto v : rc.data) EXPECT_DOUBLE_EQ(v, 0.5);
    Tensor id({2}, {0.0, 1.0});
    Tensor rid = rescale_unit(id);
    EXPECT_DOUBLE_EQ(rid.data[0], 0.0);
    EXPECT_DOUBLE_EQ(rid.data[1], 1.0);
}

TEST(Tensor, ArgmaxLowestIndexWins) {
    Tensor a({4}, {1.0, 3.0, 3.0, 2.0});
    EXPECT_EQ(argmax(a), 1u);
}

TEST(PatchPlan, GatherExamples) {
    Tensor x({4}, {1, 2, 3, 4});
    // non-overlapping tiling
    PatchPlan p22 = make_patch_plan_1d(4, 2, 2);
    Tensor g = gather_patches(x, p22);
    EXPECT_EQ(g.shape, (Shape{2, 2}));
    EXPECT_EQ(g.data, (std::vector<double>{1, 2, 3, 4}));
    // overlapping stride-1 patches: j-th to (j+2)-th consecutive pixels
    PatchPlan p31 = make_patch_plan_1d(4, 3, 1);
    Tensor g2 = gather_patches(x, p31);
    EXPECT_EQ(g2.shape, (Shape{2, 3}));
    EXPECT_EQ(g2.data, (std::vector<double>{1, 2, 3, 2, 3, 4}));
    // zeros propagate
    Tensor z({4});
    Tensor gz = gather_patches(z, p31);
    for (auto v : gz.data) EXPECT_DOUBLE_EQ(v, 0.0);
    // shape mismatch is a structured error
    EXPECT_THROW(gather_patches(Tensor({5}), p22), std::invalid_argument);
}

TEST(PatchPlan, ScatterExamples) {
    PatchPlan p22 = make_patch_plan_1d(4, 2, 2);
    Tensor rows({2, 2}, {1, 2, 3, 4});
    Tensor img = scatter_patches(rows, p22);
    EXPECT_EQ(img.data, (std::vector<double>{1, 2, 3, 4}));

    PatchPlan p31 = make_patch_plan_1d(4, 3, 1);
    Tensor ones({4}, 1.0);
    Tensor acc = scatter_patches(gather_patches(ones, p31), p31);
    EXPECT_EQ(acc.data, (std::vector<double>{1, 2, 2, 1}));

    Tensor zr({2, 3});
    Tensor zimg = scatter_patches(zr, p31);
    for (auto v : zimg.data) EXPECT_DOUBLE_EQ(v, 0.0);
    EXPECT_THROW(scatter_patches(Tensor({3, 3}), p31), std::invalid_argument);
}

TEST(PatchPlan, GatherScatterAdjoint) {
    // dot(gather(x), r) == dot(x, scatter(r)): D_j and D_j^T are transposes
    NormalStream s(RngSpec::gaussian(11, 0.0, 1.0));
    for (const auto& plan : {make_patch_plan(5, 7, 3, 2, 3, 2), make_patch_plan(6, 6, 1, 3, 3, 1, Padding::Same),
                             make_patch_plan_1d(16, 3, 2)}) {
        Tensor x({plan.in_h, plan.in_w, plan.in_c});
        Tensor r({plan.patch_count(), plan.patch_size()});
        s.fill(x);
        s.fill(r);
        const double lhs = dot(gather_patches(x, plan), r);
        Tensor sc = scatter_patches(r, plan);
        const double rhs = dot(Tensor({sc.numel()}, sc.data), Tensor({x.numel()}, x.data));
        EXPECT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, std::abs(lhs)));
    }
}

TEST(PatchPlan, ScatterOfGatherEqualsCoverageScaling) {
    NormalStream s(RngSpec::gaussian(5, 0.0, 1.0));
    PatchPlan plan = make_patch_plan(6, 8, 2, 3, 3, 1);
    Tensor x({6, 8, 2});
    s.fill(x);
    Tensor got = scatter_patches(gather_patches(x, plan), plan);
    Tensor cover = patch_coverage(plan);
    for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(got.data[i], x.data[i] * cover.data[i], 1e-12);
}

TEST(PatchPlan, SamePaddingSentinels) {
    PatchPlan plan = make_patch_plan(1, 4, 1, 1, 3, 1, Padding::Same);
    EXPECT_EQ(plan.out_w, 4u);
    Tensor x({4}, {1, 2, 3, 4});
    Tensor g = gather_patches(x, plan);
    // first patch sees [pad, 1, 2]
    EXPECT_DOUBLE_EQ(g.at2(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(g.at2(0, 1), 1.0);
    EXPECT_DOUBLE_EQ(g.at2(0, 2), 2.0);
}

TEST(Rng, DeterminismAndTruncation) {
    RngSpec spec = RngSpec::truncated(42, 0.0, 0.1);
    Tensor a = sample(spec, {1000});
    Tensor b = sample(spec, {1000});
    EXPECT_EQ(a.data, b.data);
    for (auto v : a.data) EXPECT_LE(std::abs(v), 0.2);
    EXPECT_THROW(sample(RngSpec::gaussian(0, 0.0, 0.0), {3}), std::invalid_argument);
}

TEST(Rng, GaussianMoments) {
    const std::size_t n = 1000000;
    const double c = 0.1;
    Tensor a = sample(RngSpec::gaussian(7, 0.0, c), {n});
    double mean = 0.0;
    for (auto v : a.data) mean += v;
    mean /= n;
    EXPECT_LE(std::abs(mean), 4.0 * c / std::sqrt(static_cast<double>(n)));
    double var = 0.0;
    for (auto v : a.data) var += (v - mean) * (v - mean);
    var /= n;
    EXPECT_LE(std::abs(var - c * c), 0.01 * c * c);
}
