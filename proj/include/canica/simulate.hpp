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
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include "canica/data_model.hpp"
#include "canica/linalg.hpp"
#include "canica/parallel.hpp"
#include "canica/random.hpp"

namespace canica {

/// Parameters of the two-level generative model. Noise scales are in units
/// of the per-voxel RMS amplitude of a unit-norm pattern: entries of R_s and
/// E_s have standard deviation sigma / sqrt(n_voxels).
struct SimulationConfig {
	std::size_t subjects = 12;
	std::size_t n_frames = 200;
	std::size_t n_voxels = 5000;
	std::size_t k_true = 10;
	double sparsity = 0.05;
	double sigma_e = 0.5;
	double sigma_r = 0.1;
	double loading_jitter = 0.1;
	std::uint64_t seed = 0;
};

struct GroundTruth {
	DataMatrix group_patterns;                 // B, k_true x n_voxels, unit-norm rows
	std::vector<Matrix> loadings;              // Lambda_s, k_s x k_true
	std::vector<DataMatrix> residual_patterns; // R_s, k_s x n_voxels
	std::vector<Matrix> temporal_mixing;       // W_s, n_frames x k_s
	double sigma_e = 0.0;
	double sigma_r = 0.0;
	std::uint64_t seed = 0;
	std::size_t n_voxels = 0;

	std::size_t subjects() const { return loadings.size(); }
};

struct SyntheticDataset {
	GroupDataset dataset;
	GroundTruth truth;
};

inline std::string subject_name(std::size_t index)
{
	char buf[32];
	std::snprintf(buf, sizeof buf, "sub-%02zu", index + 1);
	return buf;
}

inline double excess_kurtosis(const Eigen::Ref<const Vector>& x)
{
	const double mean = x.mean();
	const Eigen::ArrayXd c = x.array() - mean;
	const double m2 = c.square().mean();
	const double m4 = c.square().square().mean();
	return m2 > 0 ? m4 / (m2 * m2) - 3.0 : 0.0;
}

/// k sparse Laplacian patterns, each with ceil(sparsity * n_voxels) nonzero
/// entries at uniformly chosen voxels, scaled to unit norm. Rows whose sample
/// excess kurtosis is not positive are redrawn.
inline Matrix make_group_patterns(std::size_t k, std::size_t n_voxels, double sparsity, std::uint64_t seed)
{
	if (k < 1 || k >= n_voxels)
		throw Error(ErrorCode::BadDimension, "need 1 <= k_true < n_voxels");
	if (!(sparsity > 0.0 && sparsity <= 1.0))
		throw Error(ErrorCode::BadDimension, "sparsity must be in (0, 1]");

	const auto nnz = std::min<std::size_t>(n_voxels, std::size_t(std::ceil(sparsity * double(n_voxels) - 1e-9)));
	Matrix B = Matrix::Zero(Eigen::Index(k), Eigen::Index(n_voxels));
	std::vector<std::size_t> perm(n_voxels);

	for (std::size_t row = 0; row < k; ++row) {
		RandomStream rng(seed, derive_stream(stream_tag::group_patterns, {row}));
		for (;;) {
			std::iota(perm.begin(), perm.end(), std::size_t{0});
			Vector r = Vector::Zero(Eigen::Index(n_voxels));
			for (std::size_t i = 0; i < nnz; ++i) {
				const std::size_t j = i + std::size_t(rng.index(n_voxels - i));
				std::swap(perm[i], perm[j]);
				double v = 0.0;
				while (v == 0.0)
					v = rng.laplace();
				r(Eigen::Index(perm[i])) = v;
			}
			if (excess_kurtosis(r) > 0.0) {
				B.row(Eigen::Index(row)) = r.transpose() / r.norm();
				break;
			}
		}
	}

	const ThinSvd svd = thin_svd(B);
	if (numeric_rank(svd.s, B.rows(), B.cols()) < B.rows())
		throw Error(ErrorCode::NumericalFailure, "generated group patterns are linearly dependent");
	return B;
}

/// Draws B and every subject's Lambda_s, R_s, W_s.
inline GroundTruth make_truth(const SimulationConfig& cfg)
{
	if (cfg.subjects < 1 || cfg.n_frames < 2 || cfg.n_voxels < 2)
		throw Error(ErrorCode::BadDimension, "need >= 1 subject, >= 2 frames and >= 2 voxels");
	if (cfg.sigma_e < 0 || cfg.sigma_r < 0 || cfg.loading_jitter < 0)
		throw Error(ErrorCode::BadDimension, "noise scales must be nonnegative");
	if (cfg.n_frames < cfg.k_true)
		throw Error(ErrorCode::BadDimension, "n_frames must be >= k_true");

	GroundTruth truth;
	truth.sigma_e = cfg.sigma_e;
	truth.sigma_r = cfg.sigma_r;
	truth.seed = cfg.seed;
	truth.n_voxels = cfg.n_voxels;

	const auto k = Eigen::Index(cfg.k_true);
	const auto V = Eigen::Index(cfg.n_voxels);
	truth.group_patterns =
		DataMatrix(k > 0 ? make_group_patterns(cfg.k_true, cfg.n_voxels, cfg.sparsity, cfg.seed) : Matrix(0, V),
		           RowSemantics::patterns);

	const double r_scale = cfg.sigma_r / std::sqrt(double(V));
	for (std::size_t s = 0; s < cfg.subjects; ++s) {
		RandomStream rng(cfg.seed, derive_stream(stream_tag::subject_truth, {s}));
		Matrix lambda = Matrix::Identity(k, k) + rng.normal_matrix(k, k, cfg.loading_jitter);
		Matrix residual = rng.normal_matrix(k, V, r_scale);
		Matrix mixing = rng.normal_matrix(Eigen::Index(cfg.n_frames), k);
		truth.loadings.push_back(std::move(lambda));
		truth.residual_patterns.emplace_back(std::move(residual), RowSemantics::patterns);
		truth.temporal_mixing.push_back(std::move(mixing));
	}
	return truth;
}

/// Y_s = W_s (Lambda_s B + R_s) + E_s, E_s drawn from the subject's noise
/// stream.
inline SubjectSeries simulate_subject(const GroundTruth& truth, std::size_t subject_index, std::size_t n_frames)
{
	if (subject_index >= truth.subjects())
		throw Error(ErrorCode::BadDimension, "subject index out of range");
	const Matrix& W = truth.temporal_mixing[subject_index];
	const Matrix& lambda = truth.loadings[subject_index];
	if (Eigen::Index(n_frames) != W.rows())
		throw Error(ErrorCode::BadDimension, "n_frames does not match the stored temporal mixing");
	if (Eigen::Index(n_frames) < lambda.rows())
		throw Error(ErrorCode::BadDimension, "n_frames must be >= k_s");

	const auto V = Eigen::Index(truth.n_voxels);
	Matrix patterns = lambda * truth.group_patterns.values() + truth.residual_patterns[subject_index].values();
	Matrix Y = Matrix::Zero(Eigen::Index(n_frames), V);
	if (patterns.rows() > 0)
		Y.noalias() = W * patterns;
	if (truth.sigma_e > 0) {
		RandomStream rng(truth.seed, derive_stream(stream_tag::observation_noise, {subject_index}));
		Y += rng.normal_matrix(Eigen::Index(n_frames), V, truth.sigma_e / std::sqrt(double(V)));
	}
	return SubjectSeries(subject_name(subject_index), std::move(Y));
}

inline SyntheticDataset simulate(const SimulationConfig& cfg)
{
	SyntheticDataset out;
	out.truth = make_truth(cfg);
	std::vector<std::optional<SubjectSeries>> subjects(cfg.subjects);
	parallel_for(cfg.subjects, [&](std::size_t s) { subjects[s] = simulate_subject(out.truth, s, cfg.n_frames); });
	std::vector<SubjectSeries> list;
	for (auto& s : subjects)
		list.push_back(std::move(*s));
	out.dataset = GroupDataset(std::move(list));
	return out;
}

} // namespace canica
