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

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "canica/config.hpp"
#include "canica/matrix_io.hpp"
#include "canica/pipeline.hpp"
#include "canica/reproducibility.hpp"
#include "canica/split_half.hpp"

namespace canica {

/// Shortest round-trip decimal representation.
inline std::string format_double(double x)
{
	char buf[32];
	const auto r = std::to_chars(buf, buf + sizeof buf, x);
	return std::string(buf, r.ptr);
}

inline std::string stability_csv(const SubjectReduction& r)
{
	std::ostringstream out;
	out << "order,data_stability,null_quantile,selected\n";
	for (const auto& p : r.stability_curve)
		out << p.order << ',' << format_double(p.data_stability) << ',' << format_double(p.null_quantile) << ','
		    << (p.order <= r.selected_order ? 1 : 0) << '\n';
	return out.str();
}

/// Scree-style dump: every canonical correlation with the noise threshold.
inline std::string correlations_csv(const GroupSubspace& g)
{
	std::ostringstream out;
	out << "index,z,z_squared,threshold,selected\n";
	for (Eigen::Index i = 0; i < g.all_correlations.size(); ++i) {
		const double z = g.all_correlations(i);
		out << i << ',' << format_double(z) << ',' << format_double(z * z) << ',' << format_double(g.threshold)
		    << ',' << (std::size_t(i) < g.k() ? 1 : 0) << '\n';
	}
	return out.str();
}

inline std::string component_csv(const Eigen::Ref<const Vector>& values, const ThresholdedMap& m)
{
	std::ostringstream out;
	out << "voxel,value,z,selected\n";
	for (Eigen::Index v = 0; v < values.size(); ++v)
		out << v << ',' << format_double(values(v)) << ',' << format_double((values(v) - m.fit.mu) / m.fit.sigma)
		    << ',' << (m.selected[std::size_t(v)] ? 1 : 0) << '\n';
	return out.str();
}

inline Json null_fits_json(const std::vector<ThresholdedMap>& maps)
{
	Json arr = Json::array();
	for (const auto& m : maps)
		arr.push_back({{"component", m.component_index},
		               {"mu", m.fit.mu},
		               {"sigma", m.fit.sigma},
		               {"central_fraction", m.fit.central_fraction},
		               {"z_threshold", m.fit.z_threshold},
		               {"p_two_sided", m.fit.p_two_sided},
		               {"n_selected", m.n_selected}});
	return arr;
}

inline Json summary_json(const GroupFit& fit)
{
	Json subjects = Json::array();
	for (std::size_t s = 0; s < fit.reductions.size(); ++s)
		subjects.push_back({{"id", fit.reductions[s].subject_id},
		                    {"order", fit.reductions[s].selected_order},
		                    {"degenerate", bool(fit.degenerate_subjects[s])}});
	Json z = Json::array();
	for (Eigen::Index i = 0; i < fit.subspace.all_correlations.size(); ++i)
		z.push_back(fit.subspace.all_correlations(i));
	Json j{{"k", fit.k()},
	       {"n_voxels", fit.n_voxels},
	       {"threshold", fit.subspace.threshold},
	       {"residual_ss", fit.subspace.residual_ss},
	       {"subjects", subjects},
	       {"canonical_correlations", z}};
	if (fit.ica)
		j["ica"] = {{"nonlinearity", to_string(fit.ica->nonlinearity)},
		            {"converged", fit.ica->converged},
		            {"n_iterations", fit.ica->n_iterations},
		            {"attempts", fit.ica->attempts},
		            {"objective", fit.ica->objective}};
	else
		j["ica"] = nullptr;
	j["note"] = fit.note;
	return j;
}

/// Writes every stage output of a fit under dir. Returns the summary.
inline Json write_fit_outputs(const GroupFit& fit, const std::filesystem::path& dir)
{
	namespace fs = std::filesystem;
	fs::create_directories(dir / "stability");
	for (const auto& r : fit.reductions)
		write_text((dir / "stability" / (r.subject_id + ".csv")).string(), stability_csv(r));
	write_text((dir / "canonical_correlations.csv").string(), correlations_csv(fit.subspace));
	write_matrix(fit.subspace.group_patterns, dir / "group_patterns.cnic");
	write_matrix(DataMatrix(fit.components(), RowSemantics::components), dir / "components.cnic");
	if (fit.ica)
		write_matrix(DataMatrix(fit.ica->mixing, RowSemantics::components), dir / "mixing.cnic");
	const Matrix a = fit.components();
	if (!fit.maps.empty()) {
		fs::create_directories(dir / "maps");
		for (const auto& m : fit.maps) {
			char name[32];
			std::snprintf(name, sizeof name, "component_%03zu.csv", m.component_index);
			write_text((dir / "maps" / name).string(), component_csv(a.row(Eigen::Index(m.component_index)).transpose(), m));
		}
	}
	write_json((dir / "null_fits.json").string(), null_fits_json(fit.maps));
	Json summary = summary_json(fit);
	write_json((dir / "summary.json").string(), summary);
	return summary;
}

inline Json reproducibility_json(const ReproducibilityReport& r)
{
	Json pairs = Json::array();
	for (auto [i, j] : r.matching.pairs)
		pairs.push_back({{"row", i}, {"col", j}, {"c", r.C(Eigen::Index(i), Eigen::Index(j))}});
	return Json{{"mode", to_string(r.mode)},
	            {"d1", r.C.rows()},
	            {"d2", r.C.cols()},
	            {"d", r.d},
	            {"e", r.e},
	            {"t", r.t},
	            {"matched_sum", r.matching.matched_sum},
	            {"matching", pairs}};
}

inline std::string histogram_csv(const ReproducibilityReport& r)
{
	std::ostringstream out;
	out << "bin_lo,bin_hi,count\n";
	const double w = 1.0 / double(r.histogram.size());
	for (std::size_t b = 0; b < r.histogram.size(); ++b)
		out << format_double(double(b) * w) << ',' << format_double(double(b + 1) * w) << ',' << r.histogram[b]
		    << '\n';
	return out.str();
}

inline Json write_reproducibility_bundle(const ReproducibilityReport& r, const std::filesystem::path& dir)
{
	std::filesystem::create_directories(dir);
	write_matrix(DataMatrix(r.C, RowSemantics::components), dir / "C.cnic");
	Json j = reproducibility_json(r);
	write_json((dir / "summary.json").string(), j);
	write_text((dir / "histogram.csv").string(), histogram_csv(r));
	return j;
}

inline Json mean_sem_json(const MeanSem& m) { return Json{{"mean", m.mean}, {"sem", m.sem}}; }

inline Json aggregate_json(const SplitHalfAggregate& a, std::size_t repeats)
{
	Json counts = Json::object();
	for (auto [k, n] : a.component_counts)
		counts[std::to_string(k)] = n;
	return Json{{"repeats", repeats},
	            {"raw", {{"e", mean_sem_json(a.raw_e)}, {"t", mean_sem_json(a.raw_t)}}},
	            {"thresholded", {{"e", mean_sem_json(a.thresholded_e)}, {"t", mean_sem_json(a.thresholded_t)}}},
	            {"component_counts", counts}};
}

inline std::string component_counts_csv(const SplitHalfAggregate& a)
{
	std::ostringstream out;
	out << "k,halves\n";
	for (auto [k, n] : a.component_counts)
		out << k << ',' << n << '\n';
	return out.str();
}

namespace detail {
inline std::string fixed(double x, int digits)
{
	char buf[64];
	std::snprintf(buf, sizeof buf, "%.*f", digits, x);
	return buf;
}
} // namespace detail

/// Plain-text rendering of a fit summary.
inline std::string render_fit(const Json& summary)
{
	std::ostringstream out;
	const auto k = summary.at("k").get<std::size_t>();
	out << "subjects:";
	for (const auto& s : summary.at("subjects"))
		out << ' ' << s.at("id").get<std::string>() << '=' << s.at("order").get<std::size_t>();
	out << '\n';
	const auto& z = summary.at("canonical_correlations");
	if (!z.empty()) {
		out << "noise threshold on Z: " << detail::fixed(summary.at("threshold").get<double>(), 4) << '\n';
		out << "leading Z:";
		for (std::size_t i = 0; i < std::min<std::size_t>(z.size(), k + 3); ++i)
			out << ' ' << detail::fixed(z[i].get<double>(), 4);
		out << '\n';
	}
	const auto note = summary.value("note", std::string());
	if (k == 0) {
		out << (note.empty() ? std::string("no reproducible subspace") : note) << '\n';
	} else {
		out << "k = " << k << " reproducible components\n";
		const auto& ica = summary.at("ica");
		if (!ica.is_null())
			out << "ICA " << ica.at("nonlinearity").get<std::string>() << ": "
			    << (ica.at("converged").get<bool>() ? "converged" : "NOT converged") << " after "
			    << ica.at("n_iterations").get<std::size_t>() << " iterations\n";
	}
	return out.str();
}

/// Table of mean (standard deviation of the mean) across repeats.
inline std::string render_aggregate(const Json& agg)
{
	auto cell = [](const Json& m) {
		return detail::fixed(m.at("mean").get<double>(), 2) + " (" + detail::fixed(m.at("sem").get<double>(), 2) + ")";
	};
	std::ostringstream out;
	out << "repeats: " << agg.at("repeats").get<std::size_t>() << '\n';
	out << "mode         e            t\n";
	out << "raw          " << cell(agg.at("raw").at("e")) << "  " << cell(agg.at("raw").at("t")) << '\n';
	out << "thresholded  " << cell(agg.at("thresholded").at("e")) << "  " << cell(agg.at("thresholded").at("t"))
	    << '\n';
	out << "components per half:";
	for (const auto& item : agg.at("component_counts").items())
		out << ' ' << item.value().get<std::size_t>() << "x" << item.key();
	out << '\n';
	return out.str();
}

} // namespace canica
