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

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "canica/data_model.hpp"
#include "canica/linalg.hpp"

namespace canica {

/// Gaussian null fitted to the central half of a map's histogram.
struct NullFit {
	double mu = 0.0;
	double sigma = 1.0;
	double central_fraction = 0.5;
	double z_threshold = 0.0;
	double p_two_sided = 0.0;
};

struct ThresholdedMap {
	std::size_t component_index = 0;
	std::vector<bool> selected;
	std::size_t n_selected = 0;
	NullFit fit;
};

inline constexpr double default_p_two_sided = 1e-3;
// IQR of a standard normal, rounded as conventionally quoted
inline constexpr double normal_iqr = 1.349;

/// z such that P(|N(0,1)| > z) = p.
inline double two_sided_z(double p)
{
	if (!(p > 0.0 && p < 1.0))
		throw Error(ErrorCode::BadDimension, "p_two_sided must be in (0, 1)");
	return std::sqrt(2.0) * boost::math::erfc_inv(p);
}

/// mu = median, sigma = IQR / 1.349, quantiles by linear interpolation.
inline NullFit fit_empirical_null(const Eigen::Ref<const Vector>& map, double p_two_sided = default_p_two_sided)
{
	if (map.size() < 100)
		throw Error(ErrorCode::BadDimension, "empirical null needs at least 100 voxels");
	std::vector<double> sorted(map.data(), map.data() + map.size());
	std::sort(sorted.begin(), sorted.end());
	if (sorted.front() == sorted.back())
		throw Error(ErrorCode::DegenerateInput, "map is constant");
	const double q1 = interpolated_quantile(sorted, 0.25);
	const double q3 = interpolated_quantile(sorted, 0.75);
	if (!(q3 - q1 > 0.0))
		throw Error(ErrorCode::DegenerateInput, "interquartile range is zero");

	NullFit fit;
	fit.mu = interpolated_quantile(sorted, 0.5);
	fit.sigma = (q3 - q1) / normal_iqr;
	fit.central_fraction = 0.5;
	fit.p_two_sided = p_two_sided;
	fit.z_threshold = two_sided_z(p_two_sided);
	return fit;
}

/// Selects voxels with |value - mu| / sigma > z(p), strictly.
inline ThresholdedMap threshold_map(const Eigen::Ref<const Vector>& map, NullFit fit, double p_two_sided,
                                    std::size_t component_index = 0)
{
	if (!(fit.sigma > 0.0))
		throw Error(ErrorCode::BadDimension, "null fit needs sigma > 0");
	fit.p_two_sided = p_two_sided;
	fit.z_threshold = two_sided_z(p_two_sided);

	ThresholdedMap out;
	out.component_index = component_index;
	out.fit = fit;
	out.selected.resize(std::size_t(map.size()));
	for (Eigen::Index v = 0; v < map.size(); ++v) {
		const bool hit = std::abs(map(v) - fit.mu) / fit.sigma > fit.z_threshold;
		out.selected[std::size_t(v)] = hit;
		out.n_selected += hit ? 1 : 0;
	}
	return out;
}

/// Fits and thresholds every row of a component matrix.
inline std::vector<ThresholdedMap> threshold_components(const Matrix& components, double p_two_sided)
{
	std::vector<ThresholdedMap> out;
	for (Eigen::Index i = 0; i < components.rows(); ++i) {
		const Vector row = components.row(i).transpose();
		out.push_back(threshold_map(row, fit_empirical_null(row, p_two_sided), p_two_sided, std::size_t(i)));
	}
	return out;
}

/// Binary masks as rows scaled to unit norm (empty masks stay zero).
inline Matrix normalized_masks(const std::vector<ThresholdedMap>& maps, Eigen::Index n_voxels)
{
	Matrix out = Matrix::Zero(Eigen::Index(maps.size()), n_voxels);
	for (std::size_t i = 0; i < maps.size(); ++i) {
		if (maps[i].n_selected == 0)
			continue;
		const double w = 1.0 / std::sqrt(double(maps[i].n_selected));
		for (Eigen::Index v = 0; v < n_voxels; ++v)
			if (maps[i].selected[std::size_t(v)])
				out(Eigen::Index(i), v) = w;
	}
	return out;
}

} // namespace canica
