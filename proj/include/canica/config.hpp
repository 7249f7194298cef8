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
#include <fstream>
#include <set>
#include <string>

#include "json.hpp"

#include "canica/error.hpp"
#include "canica/matrix_io.hpp"
#include "canica/pipeline.hpp"
#include "canica/simulate.hpp"

namespace canica {

using Json = nlohmann::ordered_json;

namespace detail {

inline void reject_unknown(const Json& j, const std::set<std::string>& known, const char* what)
{
	if (!j.is_object())
		throw Error(ErrorCode::Config, std::string(what) + " config must be a JSON object");
	for (const auto& item : j.items())
		if (!known.contains(item.key()))
			throw Error(ErrorCode::Config, "unknown " + std::string(what) + " key '" + item.key() + "'");
}

template <class T>
void read_key(const Json& j, const char* key, T& out)
{
	if (!j.contains(key))
		return;
	const Json& v = j.at(key);
	try {
		if constexpr (std::is_same_v<T, bool>) {
			if (!v.is_boolean())
				throw Error(ErrorCode::Config, "");
		} else if constexpr (std::is_integral_v<T>) {
			if (!v.is_number_unsigned() && !(v.is_number_integer() && v.template get<std::int64_t>() >= 0))
				throw Error(ErrorCode::Config, "");
		} else if constexpr (std::is_floating_point_v<T>) {
			if (!v.is_number())
				throw Error(ErrorCode::Config, "");
		} else {
			if (!v.is_string())
				throw Error(ErrorCode::Config, "");
		}
		out = v.template get<T>();
	} catch (const Error&) {
		throw Error(ErrorCode::Config, std::string("key '") + key + "' has the wrong type");
	}
}

} // namespace detail

inline Json to_json(const SimulationConfig& c)
{
	return Json{{"S", c.subjects},          {"n_frames", c.n_frames}, {"n_voxels", c.n_voxels},
	            {"k_true", c.k_true},       {"sparsity", c.sparsity}, {"sigma_E", c.sigma_e},
	            {"sigma_R", c.sigma_r},     {"loading_jitter", c.loading_jitter},
	            {"seed", c.seed}};
}

inline SimulationConfig simulation_config_from_json(const Json& j, SimulationConfig c = {})
{
	detail::reject_unknown(j,
	                       {"S", "n_frames", "n_voxels", "k_true", "sparsity", "sigma_E", "sigma_R",
	                        "loading_jitter", "seed"},
	                       "simulation");
	detail::read_key(j, "S", c.subjects);
	detail::read_key(j, "n_frames", c.n_frames);
	detail::read_key(j, "n_voxels", c.n_voxels);
	detail::read_key(j, "k_true", c.k_true);
	detail::read_key(j, "sparsity", c.sparsity);
	detail::read_key(j, "sigma_E", c.sigma_e);
	detail::read_key(j, "sigma_R", c.sigma_r);
	detail::read_key(j, "loading_jitter", c.loading_jitter);
	detail::read_key(j, "seed", c.seed);
	return c;
}

inline Json to_json(const PipelineConfig& c)
{
	return Json{{"max_order", c.max_order},
	            {"order_boot", c.order_boot},
	            {"order_quantile", c.order_quantile},
	            {"fixed_order", c.fixed_order},
	            {"variance_normalize", c.variance_normalize},
	            {"cca_boot", c.cca_boot},
	            {"cca_alpha", c.cca_alpha},
	            {"nonlinearity", to_string(c.nonlinearity)},
	            {"ica_tol", c.ica_tol},
	            {"ica_max_iter", c.ica_max_iter},
	            {"ica_restarts", c.ica_restarts},
	            {"p_two_sided", c.p_two_sided},
	            {"seed", c.seed},
	            {"input", c.input},
	            {"output", c.output}};
}

inline PipelineConfig pipeline_config_from_json(const Json& j, PipelineConfig c = {})
{
	detail::reject_unknown(j,
	                       {"max_order", "order_boot", "order_quantile", "fixed_order", "variance_normalize",
	                        "cca_boot", "cca_alpha", "nonlinearity", "ica_tol", "ica_max_iter", "ica_restarts",
	                        "p_two_sided", "seed", "input", "output"},
	                       "pipeline");
	detail::read_key(j, "max_order", c.max_order);
	detail::read_key(j, "order_boot", c.order_boot);
	detail::read_key(j, "order_quantile", c.order_quantile);
	detail::read_key(j, "fixed_order", c.fixed_order);
	detail::read_key(j, "variance_normalize", c.variance_normalize);
	detail::read_key(j, "cca_boot", c.cca_boot);
	detail::read_key(j, "cca_alpha", c.cca_alpha);
	std::string nl(to_string(c.nonlinearity));
	detail::read_key(j, "nonlinearity", nl);
	c.nonlinearity = parse_nonlinearity(nl);
	detail::read_key(j, "ica_tol", c.ica_tol);
	detail::read_key(j, "ica_max_iter", c.ica_max_iter);
	detail::read_key(j, "ica_restarts", c.ica_restarts);
	detail::read_key(j, "p_two_sided", c.p_two_sided);
	detail::read_key(j, "seed", c.seed);
	detail::read_key(j, "input", c.input);
	detail::read_key(j, "output", c.output);
	return c;
}

inline Json parse_json_text(const std::string& text, const std::string& origin)
{
	try {
		return Json::parse(text);
	} catch (const nlohmann::json::parse_error& e) {
		throw Error(ErrorCode::Config, origin + ": " + e.what());
	}
}

inline Json load_json_file(const std::string& path) { return parse_json_text(read_file(path), path); }

inline void write_text(const std::string& path, const std::string& text)
{
	std::ofstream out(path, std::ios::binary | std::ios::trunc);
	if (!out)
		throw Error(ErrorCode::Io, "cannot create '" + path + "'");
	out << text;
	if (!out)
		throw Error(ErrorCode::Io, "write to '" + path + "' failed");
}

inline void write_json(const std::string& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

} // namespace canica
