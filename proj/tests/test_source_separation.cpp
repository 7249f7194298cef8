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
#include "canica/source_separation.hpp"
#include "test_util.hpp"

using namespace canica;

namespace {

/// Sparse sources mixed by a random orthogonal matrix and re-whitened.
/// Returns the whitened patterns and the matrix that maps the sources onto
/// them.
std::pair<Matrix, Matrix> mixture(Eigen::Index k, Eigen::Index voxels, std::uint64_t seed, Matrix* sources = nullptr)
{
	const Matrix s = make_group_patterns(std::size_t(k), std::size_t(voxels), 0.05, seed);
	RandomStream rng(seed, 4242);
	const Matrix r = random_orthogonal(k, rng);
	const Matrix x = r * s;
	Eigen::SelfAdjointEigenSolver<Matrix> e(x * x.transpose());
	const Matrix w = e.eigenvectors() * e.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
	                 e.eigenvectors().transpose();
	if (sources)
		*sources = s;
	return {w * x, w * r};
}

double abs_corr(const Vector& a, const Vector& b)
{
	const Vector ca = a.array() - a.mean(), cb = b.array() - b.mean();
	return std::abs(ca.dot(cb)) / (ca.norm() * cb.norm());
}

} // namespace

TEST(Amari, ZeroForIdentityAndScaledPermutation)
{
	const Matrix m = fixtures::gaussian(4, 4, 1);
	EXPECT_NEAR(amari_index(m, m), 0.0, 1e-12);
	Matrix pd = Matrix::Zero(4, 4);
	pd(0, 2) = -2.0;
	pd(1, 0) = 0.5;
	pd(2, 3) = 3.0;
	pd(3, 1) = -1.0;
	EXPECT_NEAR(amari_index(m * pd, m), 0.0, 1e-12);
}

TEST(Amari, AllOnesByHand)
{
	// rows: 2 * (2/1 - 1) = 2, columns likewise; 4 / (2 * 2 * 1) = 1
	EXPECT_DOUBLE_EQ(amari_of_product(Matrix::Ones(2, 2)), 1.0);
	Matrix p(2, 2);
	p << 1, 0.5, 0, 1;
	// rows: 0.5 + 0, columns: 0 + 0.5 -> 1 / 4
	EXPECT_DOUBLE_EQ(amari_of_product(p), 0.25);
}

TEST(Amari, Errors)
{
	EXPECT_THROW(amari_index(Matrix::Identity(2, 2), Matrix::Identity(3, 3)), Error);
	try {
		amari_index(Matrix::Identity(2, 2), Matrix::Ones(2, 2));
		FAIL();
	} catch (const Error& e) {
		EXPECT_EQ(e.code(), ErrorCode::SingularMatrix);
	}
	EXPECT_EQ(amari_index(Matrix::Constant(1, 1, 3.0), Matrix::Constant(1, 1, -2.0)), 0.0);
}

TEST(NegentropyProxy, GaussianNearZeroSparsePositive)
{
	const Vector g = fixtures::gaussian(200000, 1, 3).col(0);
	EXPECT_LT(negentropy_proxy(g, Nonlinearity::logcosh), 1e-5);
	EXPECT_LT(negentropy_proxy(g, Nonlinearity::cube), 1e-3);
	const Vector s = make_group_patterns(1, 5000, 0.05, 2).row(0).transpose();
	EXPECT_GT(negentropy_proxy(s, Nonlinearity::logcosh), 1e-2);
}

TEST(FastIca, SingleComponentIsItself)
{
	const Matrix b = fixtures::orthonormal_rows(1, 300, 4);
	const auto ica = fastica(b);
	EXPECT_NEAR(std::abs(ica.mixing(0, 0)), 1.0, 1e-12);
	EXPECT_NEAR(std::abs(ica.components.values().row(0).dot(b.row(0))), 1.0, 1e-12);
	EXPECT_TRUE(ica.converged);
}

TEST(FastIca, TwoSourcesRecovered)
{
	for (std::uint64_t seed = 0; seed < 5; ++seed) {
		Matrix s;
		const auto [b, m_true] = mixture(2, 5000, seed, &s);
		const auto ica = fastica(b, {.seed = seed});
		const Matrix& a = ica.components.values();
		const double direct = std::min(abs_corr(a.row(0), s.row(0)), abs_corr(a.row(1), s.row(1)));
		const double swapped = std::min(abs_corr(a.row(0), s.row(1)), abs_corr(a.row(1), s.row(0)));
		EXPECT_GT(std::max(direct, swapped), 0.99) << seed;
	}
}

TEST(FastIca, InvariantsHold)
{
	for (auto nl : {Nonlinearity::logcosh, Nonlinearity::cube}) {
		const auto [b, m_true] = mixture(5, 3000, 21);
		const auto ica = fastica(b, {.nonlinearity = nl, .seed = 3});
		const Matrix& a = ica.components.values();
		ASSERT_TRUE(ica.converged);
		EXPECT_LT((b - ica.mixing * a).norm() / b.norm(), 1e-6);
		EXPECT_LT(orthonormality_error(a), 1e-6);
		for (Eigen::Index i = 0; i < 5; ++i)
			EXPECT_GE(skewness(a.row(i).transpose()), 0.0);
		for (double ang : principal_angles(a, b))
			EXPECT_LT(ang, 1e-8);
		double before = 0, after = 0;
		for (Eigen::Index i = 0; i < 5; ++i) {
			before += negentropy_proxy(b.row(i).transpose(), nl);
			after += negentropy_proxy(a.row(i).transpose(), nl);
		}
		EXPECT_GE(after, before - 1e-10);
		EXPECT_LT(amari_index(ica.mixing, m_true), 0.05);
	}
}

TEST(FastIca, DeterministicForSeed)
{
	const auto [b, m_true] = mixture(4, 2000, 5);
	const auto x = fastica(b, {.seed = 9}), y = fastica(b, {.seed = 9});
	EXPECT_EQ(x.components.values(), y.components.values());
	EXPECT_EQ(x.mixing, y.mixing);
	EXPECT_EQ(x.n_iterations, y.n_iterations);
}

TEST(FastIca, NonConvergenceIsFlaggedNotThrown)
{
	const auto [b, m_true] = mixture(6, 2000, 5);
	const auto ica = fastica(b, {.tol = 1e-300, .max_iter = 3, .restarts = 2});
	EXPECT_FALSE(ica.converged);
	EXPECT_EQ(ica.attempts, 3u);
	EXPECT_EQ(ica.n_iterations, 3u);
}

TEST(FastIca, Preconditions)
{
	EXPECT_THROW(fastica(Matrix(0, 10)), Error);
	try {
		fastica(2.0 * fixtures::orthonormal_rows(2, 40, 1));
		FAIL();
	} catch (const Error& e) {
		EXPECT_EQ(e.code(), ErrorCode::NotWhitened);
	}
}

TEST(Nonlinearity, ParseRoundTrip)
{
	EXPECT_EQ(parse_nonlinearity("cube"), Nonlinearity::cube);
	EXPECT_EQ(parse_nonlinearity(to_string(Nonlinearity::logcosh)), Nonlinearity::logcosh);
	EXPECT_THROW(parse_nonlinearity("tanh"), Error);
}
