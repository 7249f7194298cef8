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
#include <optional>
#include <string>
#include <vector>

#include "canica/data_model.hpp"
#include "canica/group_level.hpp"
#include "canica/map_thresholding.hpp"
#include "canica/random.hpp"
#include "canica/source_separation.hpp"
#include "canica/subject_level.hpp"

namespace canica {

struct PipelineConfig {
	// subject level
	std::size_t max_order = 100; // clamped to min(n_frames, n_voxels) / 2 per subject
	std::size_t order_boot = 100;
	double order_quantile = 0.95;
	std::size_t fixed_order = 0; // 0 selects the order by bootstrap
	bool variance_normalize = false;
	// group level
	std::size_t cca_boot = 100;
	double cca_alpha = 0.05;
	// ICA
	Nonlinearity nonlinearity = Nonlinearity::logcosh;
	double ica_tol = 1e-6;
	std::size_t ica_max_iter = 200;
	std::size_t ica_restarts = 5;
	// thresholding
	double p_two_sided = default_p_two_sided;

	std::uint64_t seed = 0;
	std::string input;
	std::string output;

	void validate() const
	{
		auto fraction = [](double x, const char* name) {
			if (!(x > 0.0 && x < 1.0))
				throw Error(ErrorCode::Config, std::string(name) + " must be in (0, 1)");
		};
		auto count = [](std::size_t x, const char* name) {
			if (x < 1)
				throw Error(ErrorCode::Config, std::string(name) + " must be >= 1");
		};
		count(max_order, "max_order");
		count(order_boot, "order_boot");
		count(cca_boot, "cca_boot");
		count(ica_max_iter, "ica_max_iter");
		fraction(order_quantile, "order_quantile");
		fraction(cca_alpha, "cca_alpha");
		fraction(p_two_sided, "p_two_sided");
		if (!(ica_tol > 0.0))
			throw Error(ErrorCode::Config, "ica_tol must be positive");
	}

	friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

/// Seed for a named sub-task of a run.
inline std::uint64_t sub_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> parts)
{
	return splitmix64(seed ^ derive_stream(stream_tag::pipeline, parts));
}

/// Everything a group run produces.
struct GroupFit {
	std::vector<SubjectReduction> reductions;
	std::vector<bool> degenerate_subjects;
	std::optional<CcaDecomposition> decomposition;
	GroupSubspace subspace;
	std::optional<IcaDecomposition> ica;
	std::vector<ThresholdedMap> maps;
	std::string note;
	Eigen::Index n_voxels = 0;

	std::size_t k() const { return subspace.k(); }

	/// Rows of A, or an empty 0 x n_voxels matrix when k = 0.
	Matrix components() const { return ica ? ica->components.values() : Matrix(0, n_voxels); }
};

namespace detail {
template <typename Fn>
auto run_stage(const char* stage, Fn&& fn) -> decltype(fn())
{
	try {
		return fn();
	} catch (const Error& e) {
		if (!e.stage().empty())
			throw;
		throw e.with_stage(stage);
	}
}
} // namespace detail

/// Per-subject noise rejection, group CCA with a noise-calibrated
/// threshold, FastICA on the retained subspace and empirical-null
/// thresholding of every component. k = 0 is a regular outcome.
inline GroupFit fit_group(const GroupDataset& dataset, const PipelineConfig& cfg, bool keep_residuals = false)
{
	cfg.validate();
	if (dataset.size() < 2)
		throw Error(ErrorCode::EmptyGroup, "need at least 2 subjects, have " + std::to_string(dataset.size()))
			.with_stage("input");

	GroupFit fit;
	fit.n_voxels = dataset.n_voxels();
	fit.subspace.group_patterns = DataMatrix(Matrix(0, fit.n_voxels), RowSemantics::patterns);

	for (std::size_t s = 0; s < dataset.size(); ++s) {
		const SubjectSeries& raw = dataset.subjects()[s];
		const SubjectSeries prepared =
			detail::run_stage("standardize", [&] { return standardize(raw, cfg.variance_normalize); });

		detail::run_stage("subject_level", [&] {
			const auto limit = std::size_t(std::min(prepared.n_frames(), prepared.n_voxels()));
			std::size_t order = 0;
			bool degenerate = prepared.values().cwiseAbs().maxCoeff() == 0.0;
			std::vector<StabilityPoint> curve;
			if (!degenerate && cfg.fixed_order > 0) {
				order = std::min(cfg.fixed_order, limit);
			} else if (!degenerate) {
				const std::size_t max_order = std::min(cfg.max_order, limit / 2);
				if (max_order >= 1) {
					auto sel = select_order_detailed(prepared, max_order, cfg.order_boot, cfg.order_quantile,
					                                 sub_seed(cfg.seed, {1, s}));
					order = sel.order;
					curve = std::move(sel.curve);
				}
			}
			SubjectReduction red = order > 0 ? svd_reduce(prepared, order) : empty_reduction(prepared, degenerate);
			red.stability_curve = std::move(curve);
			fit.reductions.push_back(std::move(red));
			fit.degenerate_subjects.push_back(degenerate);
			return 0;
		});
	}

	std::size_t active = 0;
	for (const auto& r : fit.reductions)
		active += r.selected_order > 0 ? 1 : 0;
	if (active < 2) {
		fit.note = "no reproducible subspace: fewer than 2 subjects have significant principal components";
		return fit;
	}

	detail::run_stage("group_level", [&] {
		fit.decomposition = group_cca(fit.reductions);
		const double threshold = noise_threshold(fit.reductions, cfg.cca_boot, cfg.cca_alpha, sub_seed(cfg.seed, {2}));
		fit.subspace = select_group_subspace(*fit.decomposition, threshold);
		return 0;
	});
	if (!keep_residuals)
		for (auto& r : fit.reductions)
			r.noise_residual = DataMatrix(Matrix(0, fit.n_voxels), RowSemantics::frames);

	if (fit.k() == 0) {
		fit.note = "no reproducible subspace: no canonical correlation exceeds the noise threshold";
		return fit;
	}

	detail::run_stage("source_separation", [&] {
		IcaOptions opt;
		opt.nonlinearity = cfg.nonlinearity;
		opt.tol = cfg.ica_tol;
		opt.max_iter = cfg.ica_max_iter;
		opt.restarts = cfg.ica_restarts;
		opt.seed = sub_seed(cfg.seed, {3});
		fit.ica = fastica(fit.subspace.group_patterns.values(), opt);
		return 0;
	});
	detail::run_stage("map_thresholding", [&] {
		fit.maps = threshold_components(fit.ica->components.values(), cfg.p_two_sided);
		return 0;
	});
	return fit;
}

} // namespace canica
