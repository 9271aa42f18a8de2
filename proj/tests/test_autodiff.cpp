#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dygenc/autodiff.hpp"
#include "dygenc/errors.hpp"
#include "support.hpp"

using namespace dygenc;

using oracle::probe;
using oracle::random_tensor;

namespace {

constexpr double kTol = 1e-6;

} // namespace

TEST(Tensor, ShapesAndScalar) {
    Tensor m = Tensor::matrix(2, 3, 1.5);
    EXPECT_EQ(m.rows(), 2u);
    EXPECT_EQ(m.cols(), 3u);
    EXPECT_EQ(m.size(), 6u);
    Tensor s = Tensor::scalar(4);
    EXPECT_EQ(s.ndim(), 0u);
    EXPECT_EQ(s.item(), 4);
    Tensor v({5});
    EXPECT_EQ(v.rows(), 1u);
    EXPECT_EQ(v.cols(), 5u);
}

TEST(Autodiff, ScalarRootBackward) {
    ad::Var x = ad::parameter(Tensor::scalar(3));
    ad::Var y = ad::mul(x, x);
    ad::backward(y);
    EXPECT_DOUBLE_EQ(x.grad().item(), 6.0);
}

TEST(Autodiff, EmptyParentIsRejected) {
    ad::Var a = ad::parameter(Tensor::matrix(2, 2, 1));
    EXPECT_THROW(ad::add(a, ad::Var{}), ShapeError);
}

TEST(Autodiff, ShapeMismatchThrows) {
    ad::Var a = ad::constant(Tensor::matrix(2, 3));
    ad::Var b = ad::constant(Tensor::matrix(2, 3));
    EXPECT_THROW(ad::matmul(a, b), ShapeError);
    EXPECT_THROW(ad::sub(a, ad::constant(Tensor::matrix(3, 2))), ShapeError);
}

TEST(Autodiff, GradientsAccumulateOverReuse) {
    ad::Var x = ad::parameter(Tensor({2}, std::vector<real>{1, 2}));
    ad::Var y = ad::sum(ad::add(ad::mul(x, x), x));  // Σ x² + x
    ad::backward(y);
    EXPECT_DOUBLE_EQ(x.grad()[0], 3.0);
    EXPECT_DOUBLE_EQ(x.grad()[1], 5.0);
}

TEST(Autodiff, NoGradGuardRecordsNothing) {
    ad::Var x = ad::parameter(Tensor::matrix(2, 2, 1));
    ad::NoGradGuard g;
    ad::Var y = ad::mul(x, x);
    EXPECT_FALSE(y.requires_grad());
}

TEST(AutodiffGrad, Elementwise) {
    ad::Var a = ad::parameter(random_tensor({3, 4}, 1));
    ad::Var b = ad::parameter(random_tensor({3, 4}, 2));
    ad::Var row = ad::parameter(random_tensor({4}, 3));
    auto f = [&] { return probe(ad::add(ad::sub(ad::mul(a, b), ad::scale(a, 0.3)), row), 9); };
    EXPECT_LT(oracle::grad_check(f, {a, b, row}).max_rel, kTol);
}

TEST(AutodiffGrad, Matmul) {
    ad::Var a = ad::parameter(random_tensor({3, 5}, 4));
    ad::Var b = ad::parameter(random_tensor({5, 2}, 5));
    ad::Var c = ad::parameter(random_tensor({4, 5}, 6));
    auto f = [&] { return ad::add(probe(ad::matmul(a, b), 1), probe(ad::matmul_nt(a, c), 2)); };
    EXPECT_LT(oracle::grad_check(f, {a, b, c}).max_rel, kTol);
}

TEST(AutodiffGrad, SoftmaxLayerNormGelu) {
    ad::Var x = ad::parameter(random_tensor({4, 6}, 7));
    ad::Var g = ad::parameter(random_tensor({6}, 8, 0.5));
    ad::Var b = ad::parameter(random_tensor({6}, 9, 0.5));
    auto f = [&] { return probe(ad::gelu(ad::layer_norm(ad::softmax(x), g, b)), 3); };
    EXPECT_LT(oracle::grad_check(f, {x, g, b}).max_rel, 1e-5);
}

TEST(AutodiffGrad, MeanAndSlices) {
    ad::Var x = ad::parameter(random_tensor({5, 4}, 10));
    auto f = [&] {
        ad::Var top = ad::slice_rows(x, 1, 3);
        ad::Var left = ad::slice_cols(x, 0, 2);
        std::vector<ad::Var> parts{ad::mean(top, 0), ad::mean(top, 1)};
        std::vector<ad::Var> cols{left, ad::slice_cols(x, 2, 2)};
        return ad::add(probe(ad::concat_cols(parts), 4),
                       probe(ad::concat_rows(std::vector<ad::Var>{ad::concat_cols(cols), x}), 5));
    };
    EXPECT_LT(oracle::grad_check(f, {x}).max_rel, kTol);
}

TEST(AutodiffGrad, GatherAndSegmentMean) {
    ad::Var table = ad::parameter(random_tensor({6, 3}, 11));
    const std::vector<std::size_t> ids{0, 4, 4, 2, 5};
    const std::vector<std::size_t> offsets{0, 2, 5};
    auto f = [&] { return probe(ad::segment_mean(ad::embedding_lookup(table, ids), offsets), 6); };
    EXPECT_LT(oracle::grad_check(f, {table}).max_rel, kTol);
}

TEST(AutodiffGrad, CrossEntropyWeighted) {
    ad::Var logits = ad::parameter(random_tensor({4, 7}, 12));
    const std::vector<std::size_t> targets{1, 6, 0, 3};
    const std::vector<real> weights{0.1, 0.4, 0.2, 0.3};
    auto f = [&] { return ad::cross_entropy(logits, targets, weights); };
    EXPECT_LT(oracle::grad_check(f, {logits}).max_rel, kTol);
}

TEST(Autodiff, CrossEntropyValue) {
    // logits [0, log 3] with target 1: −log(3/4).
    ad::Var l = ad::constant(Tensor({1, 2}, std::vector<real>{0, std::log(3.0)}));
    const std::vector<std::size_t> t{1};
    EXPECT_NEAR(ad::cross_entropy(l, t).value().item(), -std::log(0.75), 1e-14);
}

TEST(AutodiffGrad, SparseAttention) {
    ad::Var q = ad::parameter(random_tensor({5, 8}, 13));
    ad::Var k = ad::parameter(random_tensor({5, 8}, 14));
    ad::Var v = ad::parameter(random_tensor({5, 8}, 15));
    const std::vector<std::size_t> lengths{2, 3};
    const auto pattern = ad::AttentionPattern::causal(lengths);
    auto f = [&] { return probe(ad::attention(q, k, v, pattern, 2), 7); };
    EXPECT_LT(oracle::grad_check(f, {q, k, v}).max_rel, kTol);
}

TEST(Autodiff, AttentionPatternLayouts) {
    const std::vector<std::size_t> lengths{2, 1};
    const auto c = ad::AttentionPattern::causal(lengths);
    EXPECT_EQ(c.offsets, (std::vector<std::size_t>{0, 1, 3, 4}));
    EXPECT_EQ(c.keys, (std::vector<std::size_t>{0, 0, 1, 2}));
    const std::vector<std::size_t> qo{0, 1, 2}, ko{0, 3, 5};
    const auto b = ad::AttentionPattern::blocks(qo, ko);
    EXPECT_EQ(b.keys, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
}

TEST(Autodiff, SoftmaxRowsSumToOne) {
    ad::Var x = ad::constant(random_tensor({6, 9}, 16, 5.0));
    const Tensor s = ad::softmax(x).value();
    for (std::size_t i = 0; i < s.rows(); ++i) {
        double sum = 0;
        for (std::size_t j = 0; j < s.cols(); ++j) sum += s.at(i, j);
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(Autodiff, DropoutIsSeededAndScaled) {
    ad::Var x = ad::constant(Tensor::matrix(20, 20, 1));
    const Tensor a = ad::dropout(x, 0.5, 7).value();
    const Tensor b = ad::dropout(x, 0.5, 7).value();
    EXPECT_EQ(a, b);
    for (real v : a.values()) EXPECT_TRUE(v == 0 || std::abs(v - 2.0) < 1e-15);
    EXPECT_EQ(ad::dropout(x, 0.0, 7).value(), x.value());
}
