/******************************************************************************
 * Copyright 2026 The CanICA Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *****************************************************************************/

#include <gtest/gtest.h>

#include <cmath>

#include "canica/simulate.hpp"
#include "canica/subject_level.hpp"
#include "test_util.hpp"

using namespace canica;

namespace {

void expect_reduction_invariants(const SubjectSeries& y, const SubjectReduction& r)
{
	const Matrix& p = r.whitened_patterns.values();
	const Matrix& e = r.noise_residual.values();
	EXPECT_LT(orthonormality_error(p), 1e-8);
	if (p.rows() > 0) {
		EXPECT_LT((e * p.transpose()).cwiseAbs().maxCoeff(), 1e-8);
	}
	const auto n = Eigen::Index(r.selected_order);
	const double kept = r.singular_values.head(n).squaredNorm();
	EXPECT_NEAR(kept + e.squaredNorm(), y.values().squaredNorm(), 1e-6 * y.values().squaredNorm());
}

/// Rank-k noiseless subject: k Gaussian time courses times k orthonormal maps.
SubjectSeries low_rank(Eigen::Index frames, Eigen::Index voxels, Eigen::Index k, std::uint64_t seed)
{
	return SubjectSeries("s", fixtures::gaussian(frames, k, seed) * fixtures::orthonormal_rows(k, voxels, seed + 1));
}

/// Direct evaluation of the marginal statistic by resampling frames and
/// recomputing the SVD.
double direct_marginal(const Matrix& y, const std::vector<Eigen::Index>& idx, Eigen::Index m)
{
	const ThinSvd ref = thin_svd(y);
	Matrix yb(Eigen::Index(idx.size()), y.cols());
	for (std::size_t i = 0; i < idx.size(); ++i)
		yb.row(Eigen::Index(i)) = y.row(idx[i]);
	const ThinSvd boot = thin_svd(yb);
	return (boot.V.leftCols(m).transpose() * ref.V.col(m - 1)).squaredNorm();
}

} // namespace

TEST(SvdReduce, RankOneExact)
{
	Vector u = fixtures::gaussian(8, 1, 1).col(0), v = fixtures::gaussian(30, 1, 2).col(0);
	const SubjectSeries y("s", u * v.transpose());
	const auto r = svd_reduce(y, 1);
	EXPECT_LT(r.noise_residual.values().norm(), 1e-10 * y.values().norm());
	EXPECT_NEAR(r.singular_values(0), u.norm() * v.norm(), 1e-12 * u.norm() * v.norm());
	expect_reduction_invariants(y, r);
}

TEST(SvdReduce, DiagonalCase)
{
	Matrix d = Matrix::Zero(5, 5);
	d.diagonal() << 5, 4, 3, 2, 1;
	const SubjectSeries y("s", d);
	const auto r = svd_reduce(y, 2);
	EXPECT_NEAR(r.singular_values(0), 5.0, 1e-14);
	EXPECT_NEAR(r.singular_values(1), 4.0, 1e-14);
	EXPECT_NEAR(r.noise_residual.values().norm(), std::sqrt(9.0 + 4.0 + 1.0), 1e-13);
	EXPECT_EQ(r.singular_values.size(), 5);
}

TEST(SvdReduce, LargeGaussianAgainstOracle)
{
	const SubjectSeries y("s", fixtures::gaussian(200, 5000, 17));
	const auto r = svd_reduce(y, 50);
	expect_reduction_invariants(y, r);
	// independent oracle: eigenvalues of the small Gram matrix Y Y^T
	const Matrix gram = y.values() * y.values().transpose();
	Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(gram).eigenvalues().reverse();
	const Vector ref = ev.cwiseSqrt();
	EXPECT_LT(((r.singular_values - ref).array() / ref.array()).abs().maxCoeff(), 1e-8);
}

TEST(SvdReduce, NestedOrdersAgreeUpToSign)
{
	const SubjectSeries y("s", fixtures::gaussian(40, 300, 5));
	const auto big = svd_reduce(y, 10), small = svd_reduce(y, 4);
	for (Eigen::Index i = 0; i < 4; ++i) {
		const double dot = big.whitened_patterns.values().row(i).dot(small.whitened_patterns.values().row(i));
		EXPECT_NEAR(std::abs(dot), 1.0, 1e-10);
	}
}

TEST(SvdReduce, OrderBounds)
{
	const SubjectSeries y("s", fixtures::gaussian(6, 20, 5));
	EXPECT_THROW(svd_reduce(y, 0), Error);
	EXPECT_THROW(svd_reduce(y, 7), Error);
	EXPECT_NO_THROW(svd_reduce(y, 6));
}

TEST(EmptyReduction, DegenerateHasZeroResidual)
{
	const SubjectSeries y("s", Matrix::Constant(4, 6, 2.0));
	const auto r = empty_reduction(y, true);
	EXPECT_EQ(r.selected_order, 0u);
	EXPECT_EQ(r.whitened_patterns.rows(), 0);
	EXPECT_EQ(r.noise_residual.values().norm(), 0.0);
	const auto keep = empty_reduction(SubjectSeries("t", fixtures::gaussian(4, 6, 1)), false);
	EXPECT_GT(keep.noise_residual.values().norm(), 0.0);
}

TEST(MarginalStability, FastPathMatchesDirectResampling)
{
	const Matrix y = fixtures::gaussian(30, 3, 1) * fixtures::orthonormal_rows(3, 80, 2) * 4.0 +
	                 fixtures::gaussian(30, 80, 3, 0.3);
	const ThinSvd svd = thin_svd(y);
	const Eigen::Index rank = numeric_rank(svd.s, y.rows(), y.cols());
	const Matrix fast = detail::marginal_stability(svd, rank, 6, 5, 123, stream_tag::order_bootstrap);
	for (std::size_t b = 0; b < 5; ++b) {
		RandomStream rng(123, derive_stream(stream_tag::order_bootstrap, {b}));
		const auto idx = bootstrap_indices(y.rows(), rng);
		for (Eigen::Index m = 1; m <= 6; ++m)
			EXPECT_NEAR(fast(Eigen::Index(b), m - 1), direct_marginal(y, idx, m), 1e-8) << "b=" << b << " m=" << m;
	}
}

TEST(SelectOrder, NoiselessRankFiveIsExact)
{
	for (std::uint64_t seed = 0; seed < 3; ++seed)
		EXPECT_EQ(select_order(low_rank(120, 600, 5, seed), 30, 50, 0.95, seed), 5u) << seed;
}

TEST(SelectOrder, PureNoiseSelectsZero)
{
	int zeros = 0;
	for (std::uint64_t seed = 0; seed < 5; ++seed)
		zeros += select_order(SubjectSeries("s", fixtures::gaussian(200, 1000, 500 + seed)), 50, 50, 0.95, seed) == 0;
	EXPECT_GE(zeros, 4);
}

TEST(SelectOrder, StrongSignalRecoveredWithinOne)
{
	// signal singular values ~ sqrt(n_frames) = 20, twice the noise bulk edge
	const double sigma = 10.0 / (std::sqrt(400.0) + std::sqrt(2000.0));
	int hits = 0;
	for (std::uint64_t seed = 0; seed < 5; ++seed) {
		const Matrix y = fixtures::gaussian(400, 10, seed) * fixtures::orthonormal_rows(10, 2000, seed + 50) +
		                 fixtures::gaussian(400, 2000, seed + 100, sigma);
		const auto n = select_order(SubjectSeries("s", y), 50, 50, 0.95, seed);
		hits += n >= 9 && n <= 11;
	}
	EXPECT_GE(hits, 4);
}

TEST(SelectOrder, CurveMatchesStrictStoppingRule)
{
	const auto sel = select_order_detailed(low_rank(60, 200, 4, 9), 20, 30, 0.95, 1);
	ASSERT_FALSE(sel.curve.empty());
	std::size_t expected = 0;
	while (expected < sel.curve.size() && sel.curve[expected].data_stability > sel.curve[expected].null_quantile)
		++expected;
	EXPECT_EQ(sel.order, expected);
	EXPECT_EQ(sel.numeric_rank, 4u);
	EXPECT_LE(sel.curve.size(), 4u);
	EXPECT_EQ(sel.curve.front().order, 1u);
}

TEST(SelectOrder, DeterministicForSeed)
{
	const SubjectSeries y("s", fixtures::gaussian(50, 10, 1) * fixtures::gaussian(10, 200, 2) +
	                               fixtures::gaussian(50, 200, 3, 2.0));
	const auto a = select_order_detailed(y, 20, 40, 0.95, 5);
	const auto b = select_order_detailed(y, 20, 40, 0.95, 5);
	ASSERT_EQ(a.curve.size(), b.curve.size());
	for (std::size_t i = 0; i < a.curve.size(); ++i) {
		EXPECT_EQ(a.curve[i].data_stability, b.curve[i].data_stability);
		EXPECT_EQ(a.curve[i].null_quantile, b.curve[i].null_quantile);
	}
}

TEST(SelectOrder, Preconditions)
{
	const SubjectSeries y("s", fixtures::gaussian(20, 40, 1));
	EXPECT_THROW(select_order(y, 11, 50, 0.95, 0), Error);
	EXPECT_THROW(select_order(y, 0, 50, 0.95, 0), Error);
	EXPECT_THROW(select_order(y, 5, 19, 0.95, 0), Error);
	EXPECT_THROW(select_order(y, 5, 50, 1.0, 0), Error);
	try {
		select_order(SubjectSeries("c", Matrix::Constant(20, 40, 3.0)), 5, 50, 0.95, 0);
		FAIL();
	} catch (const Error& e) {
		EXPECT_EQ(e.code(), ErrorCode::DegenerateInput);
	}
}
