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

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>

#include "canica/data_model.hpp"
#include "canica/linalg.hpp"
#include "canica/random.hpp"

namespace canica {

enum class Nonlinearity { logcosh, cube };

inline std::string_view to_string(Nonlinearity n)
{
	return n == Nonlinearity::logcosh ? "logcosh" : "cube";
}

inline Nonlinearity parse_nonlinearity(std::string_view s)
{
	if (s == "logcosh")
		return Nonlinearity::logcosh;
	if (s == "cube")
		return Nonlinearity::cube;
	throw Error(ErrorCode::Config, "unknown nonlinearity '" + std::string(s) + "'");
}

struct IcaOptions {
	Nonlinearity nonlinearity = Nonlinearity::logcosh;
	double tol = 1e-6;
	std::size_t max_iter = 200;
	std::size_t restarts = 5;
	std::uint64_t seed = 0;
};

/// B = mixing * components, components unit-norm with nonnegative skewness.
struct IcaDecomposition {
	Matrix mixing;         // k x k
	DataMatrix components; // k x n_voxels
	std::size_t n_iterations = 0;
	bool converged = false;
	Nonlinearity nonlinearity = Nonlinearity::logcosh;
	std::uint64_t seed = 0;
	double objective = 0.0;
	std::size_t attempts = 0;
};

namespace detail {
// E[log cosh(v)] for v ~ N(0, 1)
inline constexpr double gauss_logcosh = 0.374567207491437974;
// E[v^4 / 4]
inline constexpr double gauss_quartic = 0.75;

inline double log_cosh(double u)
{
	const double a = std::abs(u);
	return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}
} // namespace detail

/// Negentropy proxy (E[G(y)] - E[G(v)])^2 of a voxel map scaled to unit
/// second moment.
inline double negentropy_proxy(const Eigen::Ref<const Vector>& map, Nonlinearity nl)
{
	const double rms = std::sqrt(map.squaredNorm() / double(map.size()));
	if (rms == 0.0)
		return 0.0;
	double acc = 0.0;
	for (Eigen::Index i = 0; i < map.size(); ++i) {
		const double y = map(i) / rms;
		acc += nl == Nonlinearity::logcosh ? detail::log_cosh(y) : 0.25 * y * y * y * y;
	}
	const double ref = nl == Nonlinearity::logcosh ? detail::gauss_logcosh : detail::gauss_quartic;
	const double d = acc / double(map.size()) - ref;
	return d * d;
}

inline double skewness(const Eigen::Ref<const Vector>& x)
{
	const Eigen::ArrayXd c = x.array() - x.mean();
	const double m2 = c.square().mean();
	return m2 > 0 ? c.cube().mean() / std::pow(m2, 1.5) : 0.0;
}

namespace detail {
struct FastIcaRun {
	Matrix W;
	std::size_t iterations = 0;
	bool converged = false;
	double objective = 0.0;
};

/// Symmetric fixed-point iteration on X (k x V, identity second moment).
inline FastIcaRun fastica_run(const Matrix& X, const IcaOptions& opt, std::size_t attempt)
{
	const Eigen::Index k = X.rows();
	const double V = double(X.cols());
	RandomStream rng(opt.seed, derive_stream(stream_tag::ica_init, {attempt}));

	FastIcaRun run;
	run.W = symmetric_decorrelation(random_orthogonal(k, rng));
	Matrix g(k, X.cols());
	Vector dg(k);
	while (run.iterations < opt.max_iter) {
		const Matrix Y = run.W * X;
		if (opt.nonlinearity == Nonlinearity::logcosh) {
			g = Y.array().tanh().matrix();
			dg = (1.0 - g.array().square()).rowwise().mean().matrix();
		} else {
			g = Y.array().cube().matrix();
			dg = (3.0 * Y.array().square()).rowwise().mean().matrix();
		}
		Matrix W1 = (g * X.transpose()) / V - dg.asDiagonal() * run.W;
		W1 = symmetric_decorrelation(W1);
		const double change = (1.0 - (W1 * run.W.transpose()).diagonal().array().abs()).abs().maxCoeff();
		run.W = std::move(W1);
		++run.iterations;
		if (!std::isfinite(change))
			throw Error(ErrorCode::NumericalFailure, "FastICA iteration diverged");
		if (change < opt.tol) {
			run.converged = true;
			break;
		}
	}
	const Matrix Y = run.W * X;
	for (Eigen::Index i = 0; i < k; ++i)
		run.objective += negentropy_proxy(Y.row(i).transpose(), opt.nonlinearity);
	return run;
}
} // namespace detail

/// FastICA with symmetric decorrelation on patterns whose rows are already
/// orthonormal in voxel space. Restarts (fresh random orthogonal starts) are
/// tried only while no attempt has converged; the converged attempt, or
/// failing that the best objective, is kept.
inline IcaDecomposition fastica(const Matrix& patterns, const IcaOptions& opt = {})
{
	const Eigen::Index k = patterns.rows();
	if (k < 1)
		throw Error(ErrorCode::BadDimension, "fastica needs at least one pattern");
	if (opt.max_iter < 1 || !(opt.tol > 0))
		throw Error(ErrorCode::BadDimension, "fastica needs max_iter >= 1 and tol > 0");
	if (orthonormality_error(patterns) > 1e-6)
		throw Error(ErrorCode::NotWhitened, "input patterns are not orthonormal");

	const Matrix X = patterns * std::sqrt(double(patterns.cols()));
	std::optional<detail::FastIcaRun> best;
	std::size_t attempts = 0;
	for (std::size_t a = 0; a <= opt.restarts; ++a) {
		auto run = detail::fastica_run(X, opt, a);
		++attempts;
		const bool better = !best || (run.converged && !best->converged) ||
		                    (run.converged == best->converged && run.objective > best->objective);
		if (better)
			best = std::move(run);
		if (best->converged)
			break;
	}

	Matrix A = best->W * patterns;
	Matrix M = best->W.transpose();
	for (Eigen::Index i = 0; i < k; ++i) {
		A.row(i).normalize();
		if (skewness(A.row(i).transpose()) < 0) {
			A.row(i) = -A.row(i);
			M.col(i) = -M.col(i);
		}
	}

	IcaDecomposition out;
	out.mixing = std::move(M);
	out.components = DataMatrix(std::move(A), RowSemantics::components);
	out.n_iterations = best->iterations;
	out.converged = best->converged;
	out.nonlinearity = opt.nonlinearity;
	out.seed = opt.seed;
	out.objective = best->objective;
	out.attempts = attempts;
	return out;
}

/// Amari index of a product matrix P, computed on |P| and normalized to
/// [0, 1].
inline double amari_of_product(const Matrix& product)
{
	const Eigen::Index n = product.rows();
	if (n == 0 || product.cols() != n)
		throw Error(ErrorCode::BadDimension, "amari index needs a nonempty square matrix");
	if (n == 1)
		return 0.0;
	const Matrix P = product.cwiseAbs();
	double acc = 0.0;
	for (Eigen::Index i = 0; i < n; ++i)
		acc += P.row(i).sum() / P.row(i).maxCoeff() - 1.0;
	for (Eigen::Index j = 0; j < n; ++j)
		acc += P.col(j).sum() / P.col(j).maxCoeff() - 1.0;
	return acc / (2.0 * double(n) * double(n - 1));
}

/// Amari performance index of M_est^{-1} M_true. Zero iff the product is a
/// scaled permutation.
inline double amari_index(const Matrix& m_est, const Matrix& m_true)
{
	if (m_est.rows() != m_est.cols() || m_true.rows() != m_true.cols() || m_est.rows() != m_true.rows())
		throw Error(ErrorCode::BadDimension, "amari_index needs two square matrices of equal size");
	const Eigen::Index n = m_est.rows();
	if (n == 0)
		throw Error(ErrorCode::BadDimension, "amari_index of empty matrices");
	Eigen::FullPivLU<Matrix> lu_true(m_true);
	Eigen::FullPivLU<Matrix> lu_est(m_est);
	if (lu_true.rank() < n || lu_est.rank() < n)
		throw Error(ErrorCode::SingularMatrix, "amari_index needs invertible matrices");
	return amari_of_product(lu_est.solve(m_true));
}

} // namespace canica
