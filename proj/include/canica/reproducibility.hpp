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
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "canica/data_model.hpp"
#include "canica/linalg.hpp"
#include "canica/map_thresholding.hpp"

namespace canica {

enum class ComparisonMode { raw_maps, thresholded_maps };

inline std::string_view to_string(ComparisonMode m)
{
	return m == ComparisonMode::raw_maps ? "raw_maps" : "thresholded_maps";
}

inline constexpr std::size_t histogram_bins = 20;

/// Injective matching between the rows and columns of C, covering the
/// smaller side.
struct Matching {
	std::vector<std::pair<std::size_t, std::size_t>> pairs; // (row, col), sorted by row
	Matrix reordered; // matched pairs on the diagonal, unmatched rows/cols last
	double matched_sum = 0.0;
};

struct ReproducibilityReport {
	ComparisonMode mode = ComparisonMode::raw_maps;
	Matrix C;
	Matching matching;
	double e = 0.0;
	double t = 0.0;
	std::size_t d = 0;
	std::vector<double> max_overlaps; // row maxima then column maxima of |C|
	std::vector<std::size_t> histogram;
};

/// C[i, j] = <row i of a, row j of b>, clamped to [-1, 1].
inline Matrix cross_correlation(const Matrix& a, const Matrix& b)
{
	if (a.cols() != b.cols())
		throw Error(ErrorCode::BadDimension, "component sets have different voxel counts");
	return (a * b.transpose()).cwiseMax(-1.0).cwiseMin(1.0);
}

namespace detail {

/// Minimum-cost assignment of every row of an n x m cost matrix (n <= m) to
/// a distinct column; shortest augmenting paths with potentials. Returns the
/// column assigned to each row.
inline std::vector<std::size_t> assign_rows(const Matrix& cost)
{
	const auto n = std::size_t(cost.rows()), m = std::size_t(cost.cols());
	constexpr double inf = std::numeric_limits<double>::infinity();
	std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
	std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
	for (std::size_t i = 1; i <= n; ++i) {
		p[0] = i;
		std::size_t j0 = 0;
		std::vector<double> minv(m + 1, inf);
		std::vector<bool> used(m + 1, false);
		do {
			used[j0] = true;
			const std::size_t i0 = p[j0];
			double delta = inf;
			std::size_t j1 = 0;
			for (std::size_t j = 1; j <= m; ++j) {
				if (used[j])
					continue;
				const double cur = cost(Eigen::Index(i0 - 1), Eigen::Index(j - 1)) - u[i0] - v[j];
				if (cur < minv[j]) {
					minv[j] = cur;
					way[j] = j0;
				}
				if (minv[j] < delta) {
					delta = minv[j];
					j1 = j;
				}
			}
			for (std::size_t j = 0; j <= m; ++j) {
				if (used[j]) {
					u[p[j]] += delta;
					v[j] -= delta;
				} else {
					minv[j] -= delta;
				}
			}
			j0 = j1;
		} while (p[j0] != 0);
		do {
			const std::size_t j1 = way[j0];
			p[j0] = p[j1];
			j0 = j1;
		} while (j0 != 0);
	}
	std::vector<std::size_t> row_to_col(n);
	for (std::size_t j = 1; j <= m; ++j)
		if (p[j] != 0)
			row_to_col[p[j] - 1] = j - 1;
	return row_to_col;
}

} // namespace detail

/// Optimal assignment maximizing sum |C[i, match(i)]|.
inline Matching match_components(const Matrix& C)
{
	if (!C.allFinite())
		throw Error(ErrorCode::NonFiniteValue, "cross-correlation matrix is not finite");
	Matching out;
	const Eigen::Index d1 = C.rows(), d2 = C.cols();
	if (d1 == 0 || d2 == 0) {
		out.reordered = C;
		return out;
	}
	const Matrix mag = C.cwiseAbs();
	if (d1 <= d2) {
		const auto cols = detail::assign_rows(-mag);
		for (std::size_t i = 0; i < cols.size(); ++i)
			out.pairs.emplace_back(i, cols[i]);
	} else {
		const auto rows = detail::assign_rows(-mag.transpose());
		for (std::size_t j = 0; j < rows.size(); ++j)
			out.pairs.emplace_back(rows[j], j);
		std::sort(out.pairs.begin(), out.pairs.end());
	}

	// matched pairs first in row order, then the leftovers ascending
	std::vector<Eigen::Index> row_order, col_order;
	std::vector<bool> row_used(std::size_t(d1), false), col_used(std::size_t(d2), false);
	for (const auto& [i, j] : out.pairs) {
		row_order.push_back(Eigen::Index(i));
		col_order.push_back(Eigen::Index(j));
		row_used[i] = col_used[j] = true;
		out.matched_sum += mag(Eigen::Index(i), Eigen::Index(j));
	}
	for (Eigen::Index i = 0; i < d1; ++i)
		if (!row_used[std::size_t(i)])
			row_order.push_back(i);
	for (Eigen::Index j = 0; j < d2; ++j)
		if (!col_used[std::size_t(j)])
			col_order.push_back(j);
	out.reordered.resize(d1, d2);
	for (Eigen::Index i = 0; i < d1; ++i)
		for (Eigen::Index j = 0; j < d2; ++j)
			out.reordered(i, j) = C(row_order[std::size_t(i)], col_order[std::size_t(j)]);
	return out;
}

struct Measures {
	double e = 0.0;
	double t = 0.0;
	std::size_t d = 0;
};

/// e = tr(C^T C) / d and t = (matched |C| sum) / d; d defaults to
/// min(rows, cols). Both are 0 when d is 0.
inline Measures measures(const Matrix& C, const Matching& matching, std::optional<std::size_t> d = {})
{
	Measures out;
	out.d = d.value_or(std::size_t(std::min(C.rows(), C.cols())));
	if (out.d == 0)
		return out;
	out.e = C.squaredNorm() / double(out.d);
	double sum = 0.0;
	for (const auto& [i, j] : matching.pairs)
		sum += std::abs(C(Eigen::Index(i), Eigen::Index(j)));
	out.t = sum / double(out.d);
	return out;
}

/// Best match of every component against the other set: row maxima of |C|
/// followed by column maxima.
inline std::vector<double> max_overlaps(const Matrix& C)
{
	std::vector<double> out;
	if (C.rows() == 0 || C.cols() == 0) {
		out.assign(std::size_t(C.rows() + C.cols()), 0.0);
		return out;
	}
	const Matrix mag = C.cwiseAbs();
	for (Eigen::Index i = 0; i < mag.rows(); ++i)
		out.push_back(mag.row(i).maxCoeff());
	for (Eigen::Index j = 0; j < mag.cols(); ++j)
		out.push_back(mag.col(j).maxCoeff());
	return out;
}

/// Counts in `bins` uniform bins on [0, 1]; 1.0 lands in the last bin.
inline std::vector<std::size_t> overlap_histogram(const std::vector<double>& values, std::size_t bins = histogram_bins)
{
	std::vector<std::size_t> counts(bins, 0);
	for (double v : values) {
		auto b = static_cast<std::ptrdiff_t>(std::floor(std::clamp(v, 0.0, 1.0) * double(bins)));
		b = std::min<std::ptrdiff_t>(b, std::ptrdiff_t(bins) - 1);
		++counts[std::size_t(b)];
	}
	return counts;
}

inline std::size_t row_rank(const Matrix& rows)
{
	if (rows.rows() == 0 || rows.squaredNorm() == 0.0)
		return 0;
	return std::size_t(numeric_rank(thin_svd(rows).s, rows.rows(), rows.cols()));
}

/// Full comparison of two component sets given as voxel-space rows.
inline ReproducibilityReport compare_components(const Matrix& a, const Matrix& b, ComparisonMode mode)
{
	ReproducibilityReport r;
	r.mode = mode;
	r.C = cross_correlation(a, b);
	r.matching = match_components(r.C);
	const auto m = measures(r.C, r.matching, std::min(row_rank(a), row_rank(b)));
	r.e = m.e;
	r.t = m.t;
	r.d = m.d;
	r.max_overlaps = max_overlaps(r.C);
	r.histogram = overlap_histogram(r.max_overlaps);
	return r;
}

inline ReproducibilityReport compare_masks(const std::vector<ThresholdedMap>& a, const std::vector<ThresholdedMap>& b,
                                           Eigen::Index n_voxels)
{
	return compare_components(normalized_masks(a, n_voxels), normalized_masks(b, n_voxels),
	                          ComparisonMode::thresholded_maps);
}

} // namespace canica
