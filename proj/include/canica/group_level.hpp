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
#include <string>
#include <vector>

#include "canica/data_model.hpp"
#include "canica/linalg.hpp"
#include "canica/parallel.hpp"
#include "canica/random.hpp"
#include "canica/subject_level.hpp"

namespace canica {

/// SVD of the vertically stacked whitened subject patterns:
/// P = Upsilon diag(Z) Theta^T.
struct CcaDecomposition {
	Matrix upsilon;                       // N x r, orthonormal columns
	Vector z;                             // r, nonincreasing
	Matrix theta_t;                       // r x n_voxels, orthonormal rows
	std::vector<std::size_t> block_sizes; // rows contributed by each subject, in input order
	std::vector<std::string> subject_ids;
	double total_ss = 0.0;                // ||P||_F^2

	std::size_t total_rows() const { return std::size_t(upsilon.rows()); }
};

/// Group-reproducible subspace after thresholding the canonical correlations.
struct GroupSubspace {
	DataMatrix group_patterns;            // k x n_voxels, orthonormal rows
	Vector canonical_correlations;        // the k retained values
	Vector all_correlations;              // every singular value, for diagnostics
	Matrix loadings;                      // N x k, Upsilon_k diag(Z_k)
	std::vector<std::size_t> block_sizes;
	double threshold = 0.0;
	double residual_ss = 0.0;

	std::size_t k() const { return std::size_t(group_patterns.rows()); }
};

inline Matrix stack_patterns(const std::vector<SubjectReduction>& reductions)
{
	Eigen::Index rows = 0;
	for (const auto& r : reductions)
		rows += r.whitened_patterns.rows();
	const Eigen::Index V = reductions.empty() ? 0 : reductions.front().whitened_patterns.cols();
	Matrix P(rows, V);
	Eigen::Index at = 0;
	for (const auto& r : reductions) {
		P.middleRows(at, r.whitened_patterns.rows()) = r.whitened_patterns.values();
		at += r.whitened_patterns.rows();
	}
	return P;
}

inline void check_group(const std::vector<SubjectReduction>& reductions)
{
	if (reductions.empty())
		throw Error(ErrorCode::EmptyGroup, "no subjects");
	std::size_t active = 0;
	for (const auto& r : reductions) {
		if (r.whitened_patterns.cols() != reductions.front().whitened_patterns.cols())
			throw Error(ErrorCode::BadDimension, "subject '" + r.subject_id + "' has a different voxel count");
		if (r.selected_order > 0)
			++active;
	}
	if (active < 2)
		throw Error(ErrorCode::EmptyGroup, "need at least 2 subjects with a nonzero selected order, have " +
		                                       std::to_string(active));
}

inline CcaDecomposition group_cca(const std::vector<SubjectReduction>& reductions)
{
	check_group(reductions);
	const Matrix P = stack_patterns(reductions);
	ThinSvd svd = thin_svd(P);

	CcaDecomposition out;
	out.upsilon = std::move(svd.U);
	out.z = std::move(svd.s);
	out.theta_t = svd.V.transpose();
	out.total_ss = P.squaredNorm();
	for (const auto& r : reductions) {
		out.block_sizes.push_back(std::size_t(r.whitened_patterns.rows()));
		out.subject_ids.push_back(r.subject_id);
	}
	return out;
}

/// (1 - alpha) nearest-rank quantile of the largest canonical correlation
/// obtained when every subject's whitened patterns are replaced by
/// re-whitened, frame-resampled noise residuals of the same order.
inline double noise_threshold(const std::vector<SubjectReduction>& reductions, std::size_t n_boot, double alpha,
                              std::uint64_t seed)
{
	check_group(reductions);
	if (n_boot < 20)
		throw Error(ErrorCode::BadDimension, "n_boot must be >= 20");
	if (!(alpha > 0.0 && alpha < 1.0))
		throw Error(ErrorCode::BadDimension, "alpha must be in (0, 1)");

	struct NoiseFactor {
		Matrix US;          // frames x r_e
		Matrix V;           // voxels x r_e
		Eigen::Index order; // rows contributed per draw
		std::size_t subject;
	};
	std::vector<NoiseFactor> factors;
	for (std::size_t s = 0; s < reductions.size(); ++s) {
		const auto& r = reductions[s];
		if (r.selected_order == 0)
			continue;
		const Matrix& E = r.noise_residual.values();
		if (E.size() == 0 || E.cwiseAbs().maxCoeff() == 0.0)
			throw Error(ErrorCode::EmptyNoise, "subject '" + r.subject_id + "' has an all-zero noise residual");
		const ThinSvd svd = thin_svd(E);
		const Eigen::Index rank = numeric_rank(svd.s, E.rows(), E.cols());
		if (rank < Eigen::Index(r.selected_order))
			throw Error(ErrorCode::EmptyNoise, "noise residual of subject '" + r.subject_id +
			                                       "' has rank below the selected order");
		factors.push_back({svd.U.leftCols(rank) * svd.s.head(rank).asDiagonal(), svd.V.leftCols(rank),
		                   Eigen::Index(r.selected_order), s});
	}

	Eigen::Index total = 0;
	for (const auto& f : factors)
		total += f.order;
	const Eigen::Index V = reductions.front().whitened_patterns.cols();

	std::vector<double> maxima(n_boot);
	parallel_for(n_boot, [&](std::size_t b) {
		Matrix Q(total, V);
		Eigen::Index at = 0;
		for (const auto& f : factors) {
			RandomStream rng(seed, derive_stream(stream_tag::noise_bootstrap, {b, f.subject}));
			Vector counts = Vector::Zero(f.US.rows());
			for (auto i : bootstrap_indices(f.US.rows(), rng))
				counts(i) += 1.0;
			const Matrix weighted = counts.cwiseSqrt().asDiagonal() * f.US;
			const Eigen::Index r = f.US.cols();
			Matrix gram = Matrix::Zero(r, r);
			gram.selfadjointView<Eigen::Lower>().rankUpdate(weighted.transpose());
			Eigen::SelfAdjointEigenSolver<Matrix> eig(gram.selfadjointView<Eigen::Lower>());
			if (eig.info() != Eigen::Success)
				throw Error(ErrorCode::NumericalFailure, "noise bootstrap eigendecomposition failed");
			const Matrix top = eig.eigenvectors().rightCols(f.order);
			Q.middleRows(at, f.order).noalias() = (f.V * top).transpose();
			at += f.order;
		}
		Matrix gram = Matrix::Zero(total, total);
		gram.selfadjointView<Eigen::Lower>().rankUpdate(Q);
		Eigen::SelfAdjointEigenSolver<Matrix> eig(gram.selfadjointView<Eigen::Lower>(), Eigen::EigenvaluesOnly);
		maxima[b] = std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff()));
	});
	return nearest_rank_quantile(std::move(maxima), 1.0 - alpha);
}

/// Keeps the canonical directions whose correlation strictly exceeds the
/// threshold. An empty selection is a valid result.
inline GroupSubspace select_group_subspace(const CcaDecomposition& d, double threshold)
{
	if (!(threshold > 0.0))
		throw Error(ErrorCode::BadDimension, "threshold must be positive");
	Eigen::Index k = 0;
	while (k < d.z.size() && d.z(k) > threshold)
		++k;

	GroupSubspace out;
	out.group_patterns = DataMatrix(d.theta_t.topRows(k), RowSemantics::patterns);
	out.canonical_correlations = d.z.head(k);
	out.all_correlations = d.z;
	out.loadings = d.upsilon.leftCols(k) * d.z.head(k).asDiagonal();
	out.block_sizes = d.block_sizes;
	out.threshold = threshold;
	out.residual_ss = d.z.tail(d.z.size() - k).squaredNorm();
	return out;
}

} // namespace canica
