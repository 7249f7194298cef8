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

// canica: simulate, fit, split-half, threshold and report.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "CLI11.hpp"
#include "canica/canica.hpp"

namespace fs = std::filesystem;
using namespace canica;

namespace {

constexpr const char* tool_version = "canica 0.1.0";

std::string sha256_hex(const std::string& bytes)
{
	unsigned char digest[EVP_MAX_MD_SIZE];
	unsigned int len = 0;
	if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
		throw Error(ErrorCode::Io, "SHA-256 failed");
	static const char* hex = "0123456789abcdef";
	std::string out;
	for (unsigned int i = 0; i < len; ++i) {
		out += hex[digest[i] >> 4];
		out += hex[digest[i] & 15];
	}
	return out;
}

Json file_digests(const std::vector<fs::path>& files)
{
	Json arr = Json::array();
	for (const auto& f : files)
		arr.push_back({{"path", f.string()}, {"sha256", sha256_hex(read_file(f))}});
	return arr;
}

/// Accepts either a flat config or a previous run's manifest.
Json config_section(const std::string& path)
{
	Json j = load_json_file(path);
	if (j.is_object() && j.contains("manifest_version") && j.contains("config"))
		return j.at("config");
	return j;
}

template <class T>
void override(std::optional<T>& flag, T& field)
{
	if (flag)
		field = *flag;
}

struct SimulateArgs {
	std::string config;
	std::string output;
	std::optional<std::size_t> subjects, frames, voxels, k_true;
	std::optional<double> sparsity, sigma_e, sigma_r, jitter;
	std::optional<std::uint64_t> seed;
};

struct PipelineArgs {
	std::string config;
	std::optional<std::string> input, output;
	std::optional<std::size_t> max_order, order_boot, fixed_order, cca_boot, ica_max_iter, ica_restarts;
	std::optional<double> order_quantile, cca_alpha, ica_tol, p;
	std::optional<std::string> nonlinearity;
	std::optional<std::uint64_t> seed;
	bool variance_normalize = false;
	std::size_t repeats = 1;
};

void add_pipeline_flags(CLI::App* cmd, PipelineArgs& a)
{
	cmd->add_option("-c,--config", a.config, "JSON config file or previous manifest");
	cmd->add_option("-i,--input", a.input, "directory of subject files (*.cnic, *.csv)");
	cmd->add_option("-o,--output", a.output, "output directory");
	cmd->add_option("--max-order", a.max_order, "largest candidate subject order");
	cmd->add_option("--order-boot", a.order_boot, "bootstrap draws for order selection");
	cmd->add_option("--order-quantile", a.order_quantile, "null quantile for order selection");
	cmd->add_option("--fixed-order", a.fixed_order, "use this subject order instead of selecting one (0 = select)");
	cmd->add_flag("--variance-normalize", a.variance_normalize, "scale every voxel time series to unit variance");
	cmd->add_option("--cca-boot", a.cca_boot, "noise bootstrap draws for the CCA threshold");
	cmd->add_option("--cca-alpha", a.cca_alpha, "false-positive level of the CCA threshold");
	cmd->add_option("--nonlinearity", a.nonlinearity, "FastICA contrast: logcosh or cube");
	cmd->add_option("--ica-tol", a.ica_tol, "FastICA convergence tolerance");
	cmd->add_option("--ica-max-iter", a.ica_max_iter, "FastICA iteration cap per attempt");
	cmd->add_option("--ica-restarts", a.ica_restarts, "FastICA restarts after a failed attempt");
	cmd->add_option("-p,--p-two-sided", a.p, "two-sided voxel p-value for map thresholding");
	cmd->add_option("-s,--seed", a.seed, "global seed");
}

PipelineConfig resolve(PipelineArgs& a)
{
	PipelineConfig c;
	if (!a.config.empty())
		c = pipeline_config_from_json(config_section(a.config));
	override(a.input, c.input);
	override(a.output, c.output);
	override(a.max_order, c.max_order);
	override(a.order_boot, c.order_boot);
	override(a.order_quantile, c.order_quantile);
	override(a.fixed_order, c.fixed_order);
	if (a.variance_normalize)
		c.variance_normalize = true;
	override(a.cca_boot, c.cca_boot);
	override(a.cca_alpha, c.cca_alpha);
	if (a.nonlinearity)
		c.nonlinearity = parse_nonlinearity(*a.nonlinearity);
	override(a.ica_tol, c.ica_tol);
	override(a.ica_max_iter, c.ica_max_iter);
	override(a.ica_restarts, c.ica_restarts);
	override(a.p, c.p_two_sided);
	override(a.seed, c.seed);
	c.validate();
	if (c.input.empty())
		throw Error(ErrorCode::Config, "no input directory given");
	if (c.output.empty())
		throw Error(ErrorCode::Config, "no output directory given");
	return c;
}

Json manifest(const char* command, Json config, Json inputs)
{
	return Json{{"manifest_version", 1},
	            {"tool", tool_version},
	            {"command", command},
	            {"config", std::move(config)},
	            {"inputs", std::move(inputs)}};
}

Json output_digests(const fs::path& dir)
{
	std::vector<fs::path> files;
	for (const auto& e : fs::recursive_directory_iterator(dir))
		if (e.is_regular_file() && e.path().filename() != "manifest.json")
			files.push_back(e.path());
	std::sort(files.begin(), files.end());
	Json out = Json::object();
	for (const auto& f : files)
		out[fs::relative(f, dir).generic_string()] = sha256_hex(read_file(f));
	return out;
}

int run_simulate(SimulateArgs& a)
{
	SimulationConfig c;
	if (!a.config.empty())
		c = simulation_config_from_json(config_section(a.config));
	override(a.subjects, c.subjects);
	override(a.frames, c.n_frames);
	override(a.voxels, c.n_voxels);
	override(a.k_true, c.k_true);
	override(a.sparsity, c.sparsity);
	override(a.sigma_e, c.sigma_e);
	override(a.sigma_r, c.sigma_r);
	override(a.jitter, c.loading_jitter);
	override(a.seed, c.seed);
	if (a.output.empty())
		throw Error(ErrorCode::Config, "no output directory given");

	const SyntheticDataset sim = detail::run_stage("simulate", [&] { return simulate(c); });
	const fs::path out(a.output);
	const fs::path truth = out / "truth";
	fs::create_directories(truth);
	for (const auto& s : sim.dataset.subjects())
		write_matrix(s.data(), out / (s.id() + ".cnic"));
	write_matrix(sim.truth.group_patterns, truth / "group_patterns.cnic");
	for (std::size_t s = 0; s < sim.truth.subjects(); ++s) {
		const std::string id = subject_name(s);
		if (sim.truth.loadings[s].cols() > 0)
			write_matrix(DataMatrix(sim.truth.loadings[s], RowSemantics::components),
			             truth / ("loadings_" + id + ".cnic"));
		write_matrix(sim.truth.residual_patterns[s], truth / ("residual_" + id + ".cnic"));
		if (sim.truth.temporal_mixing[s].cols() > 0)
			write_matrix(DataMatrix(sim.truth.temporal_mixing[s], RowSemantics::frames),
			             truth / ("mixing_" + id + ".cnic"));
	}
	Json m = manifest("simulate", to_json(c), Json::array());
	m["outputs"] = output_digests(out);
	write_json((out / "manifest.json").string(), m);
	std::cout << "wrote " << c.subjects << " subjects (" << c.n_frames << " x " << c.n_voxels << "), k_true = "
	          << c.k_true << " to " << out.string() << '\n';
	return 0;
}

GroupDataset load_input(const PipelineConfig& c, Json& digests)
{
	return detail::run_stage("input", [&] {
		const auto files = list_subject_files(c.input);
		if (files.size() < 2)
			throw Error(ErrorCode::EmptyGroup, "need at least 2 subject files in '" + c.input + "', found " +
			                                       std::to_string(files.size()));
		digests = file_digests(files);
		return load_dataset(files);
	});
}

int run_fit(PipelineArgs& a)
{
	const PipelineConfig c = resolve(a);
	Json inputs;
	const GroupDataset data = load_input(c, inputs);
	const GroupFit fit = fit_group(data, c);
	const fs::path out(c.output);
	Json summary = detail::run_stage("output", [&] { return write_fit_outputs(fit, out); });
	Json m = manifest("fit", to_json(c), inputs);
	m["results"] = summary;
	m["outputs"] = output_digests(out);
	write_json((out / "manifest.json").string(), m);
	std::cout << render_fit(summary);
	return 0;
}

int run_split_half(PipelineArgs& a)
{
	const PipelineConfig c = resolve(a);
	if (a.repeats < 1)
		throw Error(ErrorCode::Config, "repeats must be >= 1");
	Json inputs;
	const GroupDataset data = load_input(c, inputs);
	const auto runs = detail::run_stage("split-half",
	                                    [&] { return repeated_split_half(data, c.seed, a.repeats, c); });
	const fs::path out(c.output);
	fs::create_directories(out);
	Json splits = Json::array();
	for (std::size_t r = 0; r < runs.size(); ++r) {
		char name[32];
		std::snprintf(name, sizeof name, "split_%03zu", r);
		const auto& run = runs[r];
		auto ids = [&](const std::vector<std::size_t>& pos) {
			Json arr = Json::array();
			for (auto p : pos)
				arr.push_back(data.subjects()[p].id());
			return arr;
		};
		Json s{{"split", r},
		       {"half_a", ids(run.half_a)},
		       {"half_b", ids(run.half_b)},
		       {"dropped", run.dropped ? Json(data.subjects()[*run.dropped].id()) : Json(nullptr)},
		       {"k_a", run.k_a},
		       {"k_b", run.k_b}};
		s["raw"] = write_reproducibility_bundle(run.raw, out / name / "raw");
		s["thresholded"] = write_reproducibility_bundle(run.thresholded, out / name / "thresholded");
		write_json((out / name / "split.json").string(), s);
		splits.push_back(std::move(s));
	}
	const Json agg = aggregate_json(aggregate(runs), runs.size());
	write_json((out / "aggregate.json").string(), agg);
	write_text((out / "component_counts.csv").string(), component_counts_csv(aggregate(runs)));
	const std::string table = render_aggregate(agg);
	write_text((out / "aggregate.txt").string(), table);

	Json cfg = to_json(c);
	Json m = manifest("split-half", cfg, inputs);
	m["repeats"] = a.repeats;
	m["aggregate"] = agg;
	m["outputs"] = output_digests(out);
	write_json((out / "manifest.json").string(), m);
	std::cout << table;
	return 0;
}

struct ThresholdArgs {
	std::string input;
	std::string output;
	double p = default_p_two_sided;
};

int run_threshold(ThresholdArgs& a)
{
	if (!(a.p > 0.0 && a.p < 1.0))
		throw Error(ErrorCode::Config, "p_two_sided must be in (0, 1)");
	const Matrix A = detail::run_stage("input", [&] { return read_matrix(a.input).values(); });
	const auto maps = detail::run_stage("threshold", [&] { return threshold_components(A, a.p); });
	const fs::path out(a.output);
	fs::create_directories(out / "maps");
	for (const auto& m : maps) {
		char name[32];
		std::snprintf(name, sizeof name, "component_%03zu.csv", m.component_index);
		write_text((out / "maps" / name).string(), component_csv(A.row(Eigen::Index(m.component_index)).transpose(), m));
	}
	write_json((out / "null_fits.json").string(), null_fits_json(maps));
	write_matrix(DataMatrix(normalized_masks(maps, A.cols()), RowSemantics::components), out / "masks.cnic");
	Json m = manifest("threshold", Json{{"p_two_sided", a.p}}, file_digests({fs::path(a.input)}));
	m["results"] = null_fits_json(maps);
	m["outputs"] = output_digests(out);
	write_json((out / "manifest.json").string(), m);
	for (const auto& t : maps)
		std::cout << "component " << t.component_index << ": " << t.n_selected << " voxels above |z| > "
		          << detail::fixed(t.fit.z_threshold, 4) << '\n';
	return 0;
}

int run_report(const std::string& path)
{
	fs::path p(path);
	if (fs::is_directory(p))
		p /= "manifest.json";
	const Json m = load_json_file(p.string());
	if (!m.is_object() || !m.contains("command"))
		throw Error(ErrorCode::Config, "'" + p.string() + "' is not a run manifest");
	const auto cmd = m.at("command").get<std::string>();
	std::cout << m.value("tool", std::string("?")) << ' ' << cmd << '\n';
	if (cmd == "fit")
		std::cout << render_fit(m.at("results"));
	else if (cmd == "split-half")
		std::cout << render_aggregate(m.at("aggregate"));
	else if (cmd == "threshold")
		for (const auto& f : m.at("results"))
			std::cout << "component " << f.at("component").get<std::size_t>() << ": "
			          << f.at("n_selected").get<std::size_t>() << " voxels selected\n";
	else
		std::cout << "config: " << m.at("config").dump() << '\n' << m.at("outputs").size() << " output files\n";
	return 0;
}

} // namespace

int main(int argc, char** argv)
{
	CLI::App app{"Group ICA with canonical-correlation subspace selection"};
	app.set_version_flag("--version", tool_version);
	app.require_subcommand(1);

	SimulateArgs sim;
	auto* s = app.add_subcommand("simulate", "write a seeded synthetic multi-subject dataset");
	s->add_option("-c,--config", sim.config, "JSON config file or previous manifest");
	s->add_option("-o,--output", sim.output, "output directory")->required();
	s->add_option("--subjects", sim.subjects, "number of subjects");
	s->add_option("--frames", sim.frames, "frames per subject");
	s->add_option("--voxels", sim.voxels, "voxels");
	s->add_option("--k-true", sim.k_true, "planted group patterns");
	s->add_option("--sparsity", sim.sparsity, "fraction of nonzero voxels per pattern");
	s->add_option("--sigma-e", sim.sigma_e, "observation noise level");
	s->add_option("--sigma-r", sim.sigma_r, "subject variability level");
	s->add_option("--loading-jitter", sim.jitter, "perturbation of the identity loadings");
	s->add_option("-s,--seed", sim.seed, "seed");

	PipelineArgs fit;
	auto* f = app.add_subcommand("fit", "run the full pipeline on a directory of subjects");
	add_pipeline_flags(f, fit);

	PipelineArgs split;
	auto* h = app.add_subcommand("split-half", "split-half reproducibility of the pipeline");
	add_pipeline_flags(h, split);
	h->add_option("--repeats", split.repeats, "number of random splits");

	ThresholdArgs thr;
	auto* t = app.add_subcommand("threshold", "re-threshold an existing component matrix");
	t->add_option("-i,--input", thr.input, "CNIC1 component matrix")->required();
	t->add_option("-o,--output", thr.output, "output directory")->required();
	t->add_option("-p,--p-two-sided", thr.p, "two-sided voxel p-value");

	std::string manifest_path;
	auto* r = app.add_subcommand("report", "re-render the summary stored in a run manifest");
	r->add_option("manifest", manifest_path, "manifest.json or its directory")->required();

	try {
		app.parse(argc, argv);
	} catch (const CLI::ParseError& e) {
		return app.exit(e) == 0 ? 0 : 1;
	}

	try {
		if (*s)
			return run_simulate(sim);
		if (*f)
			return run_fit(fit);
		if (*h)
			return run_split_half(split);
		if (*t)
			return run_threshold(thr);
		return run_report(manifest_path);
	} catch (const Error& e) {
		std::cerr << "canica: error: " << e.what() << '\n';
		return exit_code(e.code());
	} catch (const fs::filesystem_error& e) {
		std::cerr << "canica: error: Io: " << e.what() << '\n';
		return 2;
	} catch (const Json::exception& e) {
		std::cerr << "canica: error: Config: " << e.what() << '\n';
		return 1;
	}
}
