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

#include <cstdint>
#include <vector>

#include "canica/data_model.hpp"
#include "canica/linalg.hpp"
#include "canica/parallel.hpp"
#include "canica/random.hpp"

namespace canica {

struct StabilityPoint {
	std::size_t order = 0;
	double data_stability = 0.0;
	double null_quantile = 0.0;
};

/// Whitened patterns of interest and the observation-noise residual of one
/// subject.
struct SubjectReduction {
	std::string subject_id;
	DataMatrix whitened_patterns; // n x n_voxels, orthonormal rows
	DataMatrix noise_residual;    // n_frames x n_voxels
	std::size_t selected_order = 0;
	Vector singular_values;       // all min(n_frames, n_voxels) values, nonincreasing
	std::vector<StabilityPoint> stability_curve;
};

struct OrderSelection {
	std::size_t order = 0;
	std::size_t numeric_rank = 0;
	std::vector<StabilityPoint> curve;
};

/// Keeps the top `order` right singular vectors; everything else is noise.
inline SubjectReduction svd_reduce(const SubjectSeries& series, std::size_t order)
{
	const Matrix& Y = series.values();
	const auto limit = std::size_t(std::min(Y.rows(), Y.cols()));
	if (order < 1 || order > limit)
		throw Error(ErrorCode::BadDimension, "order " + std::to_string(order) + " outside [1, " +
		                                         std::to_string(limit) + "]");
	const ThinSvd svd = thin_svd(Y);
	const auto n = Eigen::Index(order);

	SubjectReduction out;
	out.subject_id = series.id();
	out.selected_order = order;
	out.singular_values = svd.s;
	out.whitened_patterns = DataMatrix(svd.V.leftCols(n).transpose(), RowSemantics::patterns);
	Matrix residual = Y;
	residual.noalias() -= svd.U.leftCols(n) * svd.s.head(n).asDiagonal() * svd.V.leftCols(n).transpose();
	out.noise_residual = DataMatrix(std::move(residual), RowSemantics::frames);
	return out;
}

/// Order-0 reduction: nothing retained. A degenerate (constant) subject gets
/// an all-zero residual, otherwise the whole series is residual.
inline SubjectReduction empty_reduction(const SubjectSeries& series, bool degenerate)
{
	SubjectReduction out;
	out.subject_id = series.id();
	out.whitened_patterns = DataMatrix(Matrix(0, series.n_voxels()), RowSemantics::patterns);
	out.noise_residual = DataMatrix(degenerate ? Matrix::Zero(series.n_frames(), series.n_voxels())
	                                           : series.values(),
	                                RowSemantics::frames);
	out.singular_values = degenerate ? Vector::Zero(std::min(series.n_frames(), series.n_voxels()))
	                                 : thin_svd(series.values()).s;
	return out;
}

namespace detail {

/// Per-resample marginal stability. Entry (b, m-1) is the energy of the m-th
/// reference right singular vector captured by the top-m right singular
/// subspace of the frame-resampled matrix.
///
/// Resampled frames stay in the row space of Y, so with Y = U S V^T the
/// resampled right singular vectors are V G where G are eigenvectors of
/// (US)^T D (US) and D holds the resampling counts. The reference vectors
/// are the coordinate axes, so the captured energy is sum_{i<m} G(m-1, i)^2.
inline Matrix marginal_stability(const ThinSvd& svd, Eigen::Index rank, Eigen::Index max_m, std::size_t n_boot,
                                 std::uint64_t seed, std::uint64_t tag)
{
	const Eigen::Index frames = svd.U.rows();
	const Matrix US = svd.U.leftCols(rank) * svd.s.head(rank).asDiagonal();
	Matrix out(Eigen::Index(n_boot), max_m);

	parallel_for(n_boot, [&](std::size_t b) {
		RandomStream rng(seed, derive_stream(tag, {b}));
		Vector counts = Vector::Zero(frames);
		for (auto i : bootstrap_indices(frames, rng))
			counts(i) += 1.0;
		const Matrix weighted = counts.cwiseSqrt().asDiagonal() * US;
		Matrix gram = Matrix::Zero(rank, rank);
		gram.selfadjointView<Eigen::Lower>().rankUpdate(weighted.transpose());
		Eigen::SelfAdjointEigenSolver<Matrix> eig(gram.selfadjointView<Eigen::Lower>());
		if (eig.info() != Eigen::Success)
			throw Error(ErrorCode::NumericalFailure, "bootstrap eigendecomposition failed");
		const Matrix& G = eig.eigenvectors(); // ascending eigenvalues
		for (Eigen::Index m = 1; m <= max_m; ++m) {
			double energy = 0.0;
			for (Eigen::Index i = 0; i < m; ++i) {
				const double g = G(m - 1, rank - 1 - i);
				energy += g * g;
			}
			out(Eigen::Index(b), m - 1) = energy;
		}
	});
	return out;
}

} // namespace detail

/// Bootstrap model-order selection. For each candidate order m the data's
/// mean marginal stability is compared with the `quantile` point of the same
/// statistic on an i.i.d. standard-normal matrix of identical shape; the
/// selected order is the last m before the first failure (ties fail).
/// Candidates beyond the numerical rank of the data are never selected.
inline OrderSelection select_order_detailed(const SubjectSeries& series, std::size_t max_order, std::size_t n_boot,
                                            double quantile, std::uint64_t seed)
{
	const Matrix& Y = series.values();
	const auto half = std::size_t(std::min(Y.rows(), Y.cols()) / 2);
	if (max_order < 1 || max_order > half)
		throw Error(ErrorCode::BadDimension, "max_order must be in [1, " + std::to_string(half) + "]");
	if (n_boot < 20)
		throw Error(ErrorCode::BadDimension, "n_boot must be >= 20");
	if (!(quantile > 0.0 && quantile < 1.0))
		throw Error(ErrorCode::BadDimension, "quantile must be in (0, 1)");
	if (Y.maxCoeff() == Y.minCoeff())
		throw Error(ErrorCode::DegenerateInput, "subject '" + series.id() + "' is constant");

	const ThinSvd data_svd = thin_svd(Y);
	const Eigen::Index rank = numeric_rank(data_svd.s, Y.rows(), Y.cols());
	const Eigen::Index max_m = std::min<Eigen::Index>(Eigen::Index(max_order), rank);

	OrderSelection out;
	out.numeric_rank = std::size_t(rank);
	if (max_m == 0)
		return out;

	const Matrix data = detail::marginal_stability(data_svd, rank, max_m, n_boot, seed, stream_tag::order_bootstrap);

	RandomStream null_rng(seed, derive_stream(stream_tag::order_null, {~std::uint64_t{0}}));
	const ThinSvd null_svd = thin_svd(null_rng.normal_matrix(Y.rows(), Y.cols()));
	const Eigen::Index null_rank = numeric_rank(null_svd.s, Y.rows(), Y.cols());
	const Matrix null = detail::marginal_stability(null_svd, null_rank, max_m, n_boot, seed, stream_tag::order_null);

	bool passing = true;
	for (Eigen::Index m = 1; m <= max_m; ++m) {
		StabilityPoint pt;
		pt.order = std::size_t(m);
		pt.data_stability = data.col(m - 1).mean();
		const Vector col = null.col(m - 1);
		pt.null_quantile = nearest_rank_quantile(std::vector<double>(col.data(), col.data() + col.size()), quantile);
		out.curve.push_back(pt);
		if (passing && pt.data_stability > pt.null_quantile)
			out.order = std::size_t(m);
		else
			passing = false;
	}
	return out;
}

inline std::size_t select_order(const SubjectSeries& series, std::size_t max_order, std::size_t n_boot,
                                double quantile, std::uint64_t seed)
{
	return select_order_detailed(series, max_order, n_boot, quantile, seed).order;
}

} // namespace canica
