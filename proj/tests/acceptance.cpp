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

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>

#include "canica/canica.hpp"
#include "test_util.hpp"

using namespace canica;

namespace {

struct Outcome {
	bool pass = false;
	std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args)
{
	char buf[512];
	std::snprintf(buf, sizeof buf, f, args...);
	return buf;
}

SubjectSeries low_rank(Eigen::Index frames, Eigen::Index voxels, Eigen::Index k, std::uint64_t seed)
{
	return SubjectSeries("s", fixtures::gaussian(frames, k, seed) * fixtures::orthonormal_rows(k, voxels, seed + 1));
}

Outcome whitening_invariants()
{
	const auto t0 = Clock::now();
	double worst_ortho = 0, worst_resid = 0, worst_energy = 0;
	for (std::uint64_t i = 0; i < 50; ++i) {
		SubjectSeries y = [&] {
			if (i % 2 == 0)
				return SubjectSeries("r", fixtures::gaussian(120, 1500, 500 + i, 3.0));
			SimulationConfig c;
			c.subjects = 1;
			c.n_frames = 120;
			c.n_voxels = 1500;
			c.seed = i;
			return simulate(c).dataset.subjects().front();
		}();
		y = standardize(y, false);
		const std::size_t order = 1 + i % 40;
		const auto r = svd_reduce(y, order);
		const Matrix& p = r.whitened_patterns.values();
		const Matrix& e = r.noise_residual.values();
		const double total = y.values().squaredNorm();
		worst_ortho = std::max(worst_ortho, orthonormality_error(p));
		worst_resid = std::max(worst_resid, (e * p.transpose()).cwiseAbs().maxCoeff() / std::sqrt(total));
		const double kept = r.singular_values.head(Eigen::Index(order)).squaredNorm();
		worst_energy = std::max(worst_energy, std::abs(kept + e.squaredNorm() - total) / total);
	}
	const double secs = seconds_since(t0);
	return {worst_ortho < 1e-8 && worst_resid < 1e-8 && worst_energy < 1e-6 && secs < 30,
	        fmt("orthonormality %.1e, residual overlap %.1e, energy %.1e, %.1f s", worst_ortho, worst_resid,
	            worst_energy, secs)};
}

Outcome order_selection()
{
	constexpr Eigen::Index frames = 200, voxels = 2000;
	constexpr std::size_t max_order = 50, boot = 100;
	int exact = 0, zero = 0, stable = 0;
	for (std::uint64_t seed = 0; seed < 20; ++seed) {
		exact += select_order(low_rank(frames, voxels, 5, 10 * seed), max_order, boot, 0.95, seed) == 5;
		const SubjectSeries noise("n", fixtures::gaussian(frames, voxels, 7000 + seed));
		zero += select_order(noise, max_order, boot, 0.95, seed) == 0;

		SimulationConfig c;
		c.subjects = 1;
		c.n_frames = frames;
		c.n_voxels = voxels;
		c.seed = 100 + seed;
		const SubjectSeries y = simulate(c).dataset.subjects().front();
		Matrix doubled(2 * frames, voxels);
		doubled.topRows(frames) = y.values();
		doubled.bottomRows(frames) =
			fixtures::gaussian(frames, voxels, 9000 + seed, c.sigma_e / std::sqrt(double(voxels)));
		const auto before = select_order(y, max_order, boot, 0.95, seed);
		const auto after = select_order(SubjectSeries("d", doubled), max_order, boot, 0.95, seed);
		stable += after <= before + 1;
	}
	return {exact == 20 && zero >= 18 && stable >= 18,
	        fmt("rank-5 exact %d/20, noise order 0 %d/20, doubling stable %d/20", exact, zero, stable)};
}

Outcome noise_rejection()
{
	const auto t0 = Clock::now();
	int empty = 0;
	for (std::uint64_t seed = 0; seed < 40; ++seed) {
		SimulationConfig c;
		c.subjects = 12;
		c.n_frames = 100;
		c.n_voxels = 2000;
		c.k_true = 0;
		c.sigma_r = 0.0;
		c.seed = seed;
		PipelineConfig p;
		p.fixed_order = 10;
		p.cca_alpha = 0.05;
		p.seed = seed;
		empty += fit_group(simulate(c).dataset, p).k() == 0;
	}
	const double secs = seconds_since(t0);
	return {empty >= 38 && secs < 300, fmt("k = 0 in %d/40 groups, %.1f s", empty, secs)};
}

Outcome subspace_recovery()
{
	int exact = 0;
	double worst_angle = 0;
	for (std::uint64_t seed = 0; seed < 40; ++seed) {
		SimulationConfig c;
		c.subjects = 12;
		c.n_frames = 100;
		c.n_voxels = 2000;
		c.k_true = 10;
		c.sigma_r = 0.1;
		c.sigma_e = 0.5;
		c.seed = seed;
		const auto data = simulate(c);
		PipelineConfig p;
		p.seed = seed;
		const GroupFit fit = fit_group(data.dataset, p);
		if (fit.k() != 10)
			continue;
		++exact;
		for (double a : principal_angles(fit.subspace.group_patterns.values(), data.truth.group_patterns.values()))
			worst_angle = std::max(worst_angle, degrees(a));
	}
	return {exact >= 32 && worst_angle < 5.0, fmt("k = 10 in %d/40, largest angle %.2f deg", exact, worst_angle)};
}

std::pair<Matrix, Matrix> whitened_mixture(Eigen::Index k, Eigen::Index voxels, std::uint64_t seed, Matrix& sources)
{
	sources = make_group_patterns(std::size_t(k), std::size_t(voxels), 0.05, seed);
	RandomStream rng(seed, 4242);
	const Matrix r = random_orthogonal(k, rng);
	const Matrix a = r + 0.3 * fixtures::gaussian(k, k, seed + 17); // non-orthogonal mixing
	const Matrix x = a * sources;
	Eigen::SelfAdjointEigenSolver<Matrix> e(x * x.transpose());
	const Matrix w =
		e.eigenvectors() * e.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() * e.eigenvectors().transpose();
	return {w * x, w * a};
}

double abs_corr(const Vector& a, const Vector& b)
{
	const Vector ca = a.array() - a.mean(), cb = b.array() - b.mean();
	return std::abs(ca.dot(cb)) / (ca.norm() * cb.norm());
}

Outcome ica_oracle()
{
	Matrix s;
	const auto [b, m_true] = whitened_mixture(8, 5000, 1, s);
	int good = 0;
	double worst = 0;
	for (std::uint64_t r = 0; r < 20; ++r) {
		const auto ica = fastica(b, {.seed = r});
		const double amari = amari_index(ica.mixing, m_true);
		worst = std::max(worst, amari);
		good += amari < 0.05;
	}
	double min_corr = 1.0;
	for (std::uint64_t seed = 0; seed < 20; ++seed) {
		Matrix s2;
		const auto [b2, m2] = whitened_mixture(2, 5000, 100 + seed, s2);
		const Matrix a = fastica(b2, {.seed = seed}).components.values();
		const double direct = std::min(abs_corr(a.row(0), s2.row(0)), abs_corr(a.row(1), s2.row(1)));
		const double swapped = std::min(abs_corr(a.row(0), s2.row(1)), abs_corr(a.row(1), s2.row(0)));
		min_corr = std::min(min_corr, std::max(direct, swapped));
	}
	return {good >= 18 && min_corr > 0.99,
	        fmt("amari < 0.05 in %d/20 (worst %.4f), 2-source min |corr| %.4f", good, worst, min_corr)};
}

Outcome cca_optimality()
{
	int wins = 0, trials = 0;
	for (std::uint64_t inst = 0; inst < 10; ++inst) {
		SimulationConfig c;
		c.subjects = 5;
		c.n_frames = 60;
		c.n_voxels = 400;
		c.k_true = 4;
		c.seed = 300 + inst;
		const auto data = simulate(c);
		std::vector<SubjectReduction> reds;
		for (const auto& y : data.dataset.subjects())
			reds.push_back(svd_reduce(standardize(y, false), 6));
		const auto d = group_cca(reds);
		const auto g = select_group_subspace(d, d.z(Eigen::Index(3 + inst % 3)) * (1 - 1e-12));
		const Matrix P = stack_patterns(reds);
		const double ours = (P - g.loadings * g.group_patterns.values()).squaredNorm();
		for (std::uint64_t t = 0; t < 100; ++t) {
			const Matrix q = fixtures::orthonormal_rows(Eigen::Index(g.k()), P.cols(), 77 + 1000 * inst + t);
			wins += (P - (P * q.transpose()) * q).squaredNorm() > ours;
			++trials;
		}
	}
	return {wins == trials, fmt("optimal in %d/%d comparisons", wins, trials)};
}

Outcome thresholding_calibration()
{
	int inside = 0;
	double total = 0;
	for (std::uint64_t seed = 0; seed < 100; ++seed) {
		const Vector x = fixtures::gaussian(40000, 1, 20000 + seed).col(0);
		const auto n = threshold_map(x, fit_empirical_null(x), 1e-3).n_selected;
		inside += n >= 25 && n <= 57;
		total += double(n);
	}
	const double mean = total / 100.0;
	return {inside >= 95 && std::abs(mean - 40.0) <= 5.0, fmt("in [25, 57] for %d/100, mean %.2f", inside, mean)};
}

Outcome reproducibility_measures()
{
	const Matrix q = fixtures::orthonormal_rows(10, 500, 1);
	const auto same = compare_components(q.topRows(5), q.topRows(5), ComparisonMode::raw_maps);
	const auto orth = compare_components(q.topRows(5), q.bottomRows(5), ComparisonMode::raw_maps);
	const bool trivial = std::abs(same.e - 1) < 1e-12 && std::abs(same.t - 1) < 1e-12 && std::abs(orth.e) < 1e-12 &&
	                     std::abs(orth.t) < 1e-12;

	int optimal = 0;
	RandomStream rng(8, 8);
	for (int trial = 0; trial < 100; ++trial) {
		const auto d1 = Eigen::Index(1 + rng.index(7)), d2 = Eigen::Index(1 + rng.index(7));
		const Matrix c = Matrix::NullaryExpr(d1, d2, [&] { return 2.0 * rng.uniform() - 1.0; });
		const Matrix m = d1 <= d2 ? Matrix(c.cwiseAbs()) : Matrix(c.cwiseAbs().transpose());
		std::vector<Eigen::Index> perm(std::size_t(m.cols()));
		std::iota(perm.begin(), perm.end(), Eigen::Index{0});
		double best = 0;
		do {
			double s = 0;
			for (Eigen::Index i = 0; i < m.rows(); ++i)
				s += m(i, perm[std::size_t(i)]);
			best = std::max(best, s);
		} while (std::next_permutation(perm.begin(), perm.end()));
		optimal += std::abs(match_components(c).matched_sum - best) < 1e-12;
	}

	double drift = 0;
	for (std::uint64_t t = 0; t < 20; ++t) {
		const Matrix a = fixtures::orthonormal_rows(6, 500, 40 + t);
		const Matrix b = row_space_basis(a.topRows(4) + 0.5 * fixtures::gaussian(4, 500, 90 + t, 0.05)).transpose();
		const double e = compare_components(a, b, ComparisonMode::raw_maps).e;
		RandomStream r(t, 3);
		drift = std::max(drift, std::abs(compare_components(random_orthogonal(6, r) * a, b, ComparisonMode::raw_maps).e - e));
		drift = std::max(drift, std::abs(compare_components(a, random_orthogonal(4, r) * b, ComparisonMode::raw_maps).e - e));
	}
	return {trivial && optimal == 100 && drift <= 1e-10,
	        fmt("trivial cases %s, brute-force optimum %d/100, rotation drift %.1e", trivial ? "exact" : "WRONG",
	            optimal, drift)};
}

Outcome split_half_stability()
{
	SimulationConfig c;
	c.subjects = 12;
	c.n_frames = 100;
	c.n_voxels = 2000;
	c.k_true = 10;
	c.sigma_r = 0.1;
	c.sigma_e = 0.5;
	c.seed = 2024;
	PipelineConfig p;
	const auto agg = aggregate(repeated_split_half(simulate(c).dataset, 11, 20, p));
	const bool raw = agg.raw_e.mean > 0.8 && agg.raw_t.mean > 0.8;
	const bool close =
		std::abs(agg.thresholded_e.mean - agg.raw_e.mean) <= 0.1 && std::abs(agg.thresholded_t.mean - agg.raw_t.mean) <= 0.1;
	return {raw && close, fmt("raw e %.3f t %.3f, thresholded e %.3f t %.3f", agg.raw_e.mean, agg.raw_t.mean,
	                          agg.thresholded_e.mean, agg.thresholded_t.mean)};
}

std::string slurp(const std::filesystem::path& p)
{
	std::ifstream in(p, std::ios::binary);
	std::ostringstream s;
	s << in.rdbuf();
	return s.str();
}

bool same_tree(const std::filesystem::path& a, const std::filesystem::path& b)
{
	std::size_t n = 0;
	for (const auto& entry : std::filesystem::recursive_directory_iterator(a)) {
		if (!entry.is_regular_file())
			continue;
		const auto rel = std::filesystem::relative(entry.path(), a);
		if (!std::filesystem::exists(b / rel) || slurp(entry.path()) != slurp(b / rel))
			return false;
		++n;
	}
	std::size_t m = 0;
	for (const auto& entry : std::filesystem::recursive_directory_iterator(b))
		m += entry.is_regular_file();
	return n == m && n > 0;
}

Outcome performance()
{
	const auto dataset = simulate(SimulationConfig{}).dataset;
	const auto root = std::filesystem::temp_directory_path() / "canica_acceptance";
	std::filesystem::remove_all(root);
	double slowest = 0;
	std::size_t k = 0;
	for (int run = 0; run < 2; ++run) {
		const auto t0 = Clock::now();
		const GroupFit fit = fit_group(dataset, PipelineConfig{});
		slowest = std::max(slowest, seconds_since(t0));
		k = fit.k();
		write_fit_outputs(fit, root / std::to_string(run));
	}
	const bool identical = same_tree(root / "0", root / "1");
	std::filesystem::remove_all(root);
	return {slowest < 60 && identical, fmt("12 x 200 x 5000 fit in %.1f s (k = %zu, %u worker(s)), repeat %s",
	                                       slowest, k, worker_count(), identical ? "byte-identical" : "DIFFERS")};
}

} // namespace

int main()
{
	const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
		{"whitening invariants", whitening_invariants},
		{"order selection", order_selection},
		{"group noise rejection", noise_rejection},
		{"shared subspace recovery", subspace_recovery},
		{"ICA oracle", ica_oracle},
		{"CCA least-squares optimality", cca_optimality},
		{"thresholding calibration", thresholding_calibration},
		{"reproducibility measures", reproducibility_measures},
		{"split-half stability", split_half_stability},
		{"performance and determinism", performance},
	};
	int failures = 0;
	for (std::size_t i = 0; i < criteria.size(); ++i) {
		const auto t0 = Clock::now();
		Outcome o;
		try {
			o = criteria[i].second();
		} catch (const std::exception& e) {
			o = {false, std::string("exception: ") + e.what()};
		}
		failures += !o.pass;
		std::printf("criterion %2zu %-30s %s  %s [%.1f s]\n", i + 1, criteria[i].first, o.pass ? "PASS" : "FAIL",
		            o.detail.c_str(), seconds_since(t0));
		std::fflush(stdout);
	}
	return failures == 0 ? 0 : 1;
}
