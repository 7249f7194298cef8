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
#include <map>
#include <numeric>
#include <tuple>
#include <optional>
#include <vector>

#include "canica/pipeline.hpp"
#include "canica/reproducibility.hpp"

namespace canica {

struct SplitHalfResult {
	std::vector<std::size_t> half_a; // dataset positions
	std::vector<std::size_t> half_b;
	std::optional<std::size_t> dropped;
	std::size_t k_a = 0;
	std::size_t k_b = 0;
	ReproducibilityReport raw;
	ReproducibilityReport thresholded;
};

/// Raw and thresholded comparison of two independent fits.
inline std::pair<ReproducibilityReport, ReproducibilityReport> compare_fits(const GroupFit& a, const GroupFit& b)
{
	if (a.n_voxels != b.n_voxels)
		throw Error(ErrorCode::BadDimension, "fits have different voxel counts");
	return {compare_components(a.components(), b.components(), ComparisonMode::raw_maps),
	        compare_masks(a.maps, b.maps, a.n_voxels)};
}

/// Seeded random split into two disjoint halves of equal size; with an odd
/// subject count one random subject is left out.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> random_halves(std::size_t n, std::uint64_t seed,
                                                                                   std::optional<std::size_t>* dropped = nullptr)
{
	if (n < 4)
		throw Error(ErrorCode::TooFewSubjects, "split-half needs at least 4 subjects, have " + std::to_string(n));
	std::vector<std::size_t> perm(n);
	std::iota(perm.begin(), perm.end(), std::size_t{0});
	RandomStream rng(seed, derive_stream(stream_tag::split));
	for (std::size_t i = n - 1; i > 0; --i)
		std::swap(perm[i], perm[std::size_t(rng.index(i + 1))]);
	if (dropped)
		*dropped = n % 2 ? std::optional<std::size_t>(perm.back()) : std::nullopt;
	const std::size_t half = n / 2;
	std::vector<std::size_t> a(perm.begin(), perm.begin() + std::ptrdiff_t(half));
	std::vector<std::size_t> b(perm.begin() + std::ptrdiff_t(half), perm.begin() + std::ptrdiff_t(2 * half));
	std::sort(a.begin(), a.end());
	std::sort(b.begin(), b.end());
	return {a, b};
}

/// Learns components independently on two random halves of the group and
/// compares them. Each half runs the full pipeline with its own derived
/// seed.
inline SplitHalfResult split_half(const GroupDataset& dataset, std::uint64_t seed, const PipelineConfig& cfg)
{
	SplitHalfResult out;
	std::tie(out.half_a, out.half_b) = random_halves(dataset.size(), seed, &out.dropped);

	PipelineConfig cfg_a = cfg, cfg_b = cfg;
	cfg_a.seed = sub_seed(seed, {4, 0});
	cfg_b.seed = sub_seed(seed, {4, 1});
	const GroupFit fit_a = fit_group(dataset.subset(out.half_a), cfg_a);
	const GroupFit fit_b = fit_group(dataset.subset(out.half_b), cfg_b);
	out.k_a = fit_a.k();
	out.k_b = fit_b.k();
	std::tie(out.raw, out.thresholded) = compare_fits(fit_a, fit_b);
	return out;
}

/// Mean and standard deviation of the mean.
struct MeanSem {
	double mean = 0.0;
	double sem = 0.0;
};

inline MeanSem mean_sem(const std::vector<double>& xs)
{
	MeanSem out;
	if (xs.empty())
		return out;
	const double n = double(xs.size());
	out.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
	if (xs.size() > 1) {
		double ss = 0.0;
		for (double x : xs)
			ss += (x - out.mean) * (x - out.mean);
		out.sem = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
	}
	return out;
}

struct SplitHalfAggregate {
	MeanSem raw_e, raw_t, thresholded_e, thresholded_t;
	std::map<std::size_t, std::size_t> component_counts; // k -> number of halves
};

inline SplitHalfAggregate aggregate(const std::vector<SplitHalfResult>& runs)
{
	std::vector<double> re, rt, te, tt;
	SplitHalfAggregate agg;
	for (const auto& r : runs) {
		re.push_back(r.raw.e);
		rt.push_back(r.raw.t);
		te.push_back(r.thresholded.e);
		tt.push_back(r.thresholded.t);
		++agg.component_counts[r.k_a];
		++agg.component_counts[r.k_b];
	}
	agg.raw_e = mean_sem(re);
	agg.raw_t = mean_sem(rt);
	agg.thresholded_e = mean_sem(te);
	agg.thresholded_t = mean_sem(tt);
	return agg;
}

/// Repeat r uses split seed sub_seed(seed, {5, r}).
inline std::vector<SplitHalfResult> repeated_split_half(const GroupDataset& dataset, std::uint64_t seed,
                                                        std::size_t repeats, const PipelineConfig& cfg)
{
	std::vector<SplitHalfResult> out;
	for (std::size_t r = 0; r < repeats; ++r)
		out.push_back(split_half(dataset, sub_seed(seed, {5, r}), cfg));
	return out;
}

} // namespace canica
