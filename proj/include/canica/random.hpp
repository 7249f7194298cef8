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

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

/*
 * Counter-based random streams.
 *
 * The block generator is Philox4x32-10 (Salmon et al., SC'11) with the
 * Random123 round constants. A stream is identified by (key, stream id): the
 * 64-bit key is the user seed, the 128-bit counter is
 * [block_lo, block_hi, stream_lo, stream_hi]. Every block yields four 32-bit
 * words, consumed as two 64-bit words (w0 | w1 << 32, w2 | w3 << 32).
 *
 * Derived quantities:
 *   uniform  = (u64 >> 11) * 2^-53, in [0, 1)
 *   normal   = Box-Muller on (1 - u1, u2), both outputs used in order
 *              (cos first, then sin)
 *   laplace  = inverse CDF of a unit-scale Laplace at u - 0.5
 *   index(n) = high 64 bits of u64 * n
 *
 * Stream ids for sub-tasks are derived with SplitMix64 chaining, see
 * derive_stream().
 */

namespace canica {

class Philox4x32 {
public:
	using Counter = std::array<std::uint32_t, 4>;
	using Key = std::array<std::uint32_t, 2>;

	static Counter generate(Counter ctr, Key key)
	{
		for (int round = 0; round < 10; ++round) {
			if (round > 0) {
				key[0] += kWeyl0;
				key[1] += kWeyl1;
			}
			const std::uint64_t p0 = std::uint64_t(kMul0) * ctr[0];
			const std::uint64_t p1 = std::uint64_t(kMul1) * ctr[2];
			const auto hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
			const auto hi1 = std::uint32_t(p1 >> 32), lo1 = std::uint32_t(p1);
			ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
		}
		return ctr;
	}

private:
	static constexpr std::uint32_t kMul0 = 0xD2511F53u;
	static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
	static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
	static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

inline std::uint64_t splitmix64(std::uint64_t x)
{
	x += 0x9E3779B97F4A7C15ull;
	x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
	x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
	return x ^ (x >> 31);
}

/// Stream id for a tagged sub-task: h = splitmix64(tag), then
/// h = splitmix64(h ^ part) for each part in order.
inline std::uint64_t derive_stream(std::uint64_t tag, std::initializer_list<std::uint64_t> parts = {})
{
	std::uint64_t h = splitmix64(tag);
	for (auto p : parts)
		h = splitmix64(h ^ p);
	return h;
}

/// Tags for the streams used across the library. Values are part of the
/// reproducibility contract; do not renumber.
namespace stream_tag {
inline constexpr std::uint64_t group_patterns = 1;
inline constexpr std::uint64_t subject_truth = 2;
inline constexpr std::uint64_t observation_noise = 3;
inline constexpr std::uint64_t order_bootstrap = 10;
inline constexpr std::uint64_t order_null = 11;
inline constexpr std::uint64_t noise_bootstrap = 20;
inline constexpr std::uint64_t ica_init = 30;
inline constexpr std::uint64_t split = 40;
inline constexpr std::uint64_t pipeline = 50;
} // namespace stream_tag

class RandomStream {
public:
	RandomStream(std::uint64_t seed, std::uint64_t stream_id)
		: key_{std::uint32_t(seed), std::uint32_t(seed >> 32)},
		  stream_lo_(std::uint32_t(stream_id)), stream_hi_(std::uint32_t(stream_id >> 32))
	{
	}

	std::uint64_t next_u64()
	{
		if (lane_ == 2) {
			const Philox4x32::Counter ctr{std::uint32_t(block_), std::uint32_t(block_ >> 32), stream_lo_,
			                              stream_hi_};
			const auto out = Philox4x32::generate(ctr, key_);
			words_[0] = std::uint64_t(out[0]) | (std::uint64_t(out[1]) << 32);
			words_[1] = std::uint64_t(out[2]) | (std::uint64_t(out[3]) << 32);
			++block_;
			lane_ = 0;
		}
		return words_[lane_++];
	}

	double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

	double normal()
	{
		if (has_spare_) {
			has_spare_ = false;
			return spare_;
		}
		const double u1 = 1.0 - uniform();
		const double u2 = uniform();
		const double r = std::sqrt(-2.0 * std::log(u1));
		const double theta = 2.0 * std::numbers::pi * u2;
		spare_ = r * std::sin(theta);
		has_spare_ = true;
		return r * std::cos(theta);
	}

	/// Unit-scale Laplace draw (variance 2).
	double laplace()
	{
		const double u = uniform() - 0.5;
		const double mag = -std::log1p(-2.0 * std::abs(u));
		return u < 0 ? -mag : mag;
	}

	/// Uniform integer in [0, n).
	std::uint64_t index(std::uint64_t n)
	{
		return std::uint64_t((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
	}

	Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols, double scale = 1.0)
	{
		// row-major fill so the draw order matches the on-disk layout
		Eigen::MatrixXd out(rows, cols);
		for (Eigen::Index i = 0; i < rows; ++i)
			for (Eigen::Index j = 0; j < cols; ++j)
				out(i, j) = scale * normal();
		return out;
	}

private:
	Philox4x32::Key key_;
	std::uint32_t stream_lo_;
	std::uint32_t stream_hi_;
	std::uint64_t block_ = 0;
	std::array<std::uint64_t, 2> words_{};
	int lane_ = 2;
	double spare_ = 0.0;
	bool has_spare_ = false;
};

/// Random orthogonal matrix (QR of a Gaussian matrix, signs fixed so R has a
/// positive diagonal).
inline Eigen::MatrixXd random_orthogonal(Eigen::Index n, RandomStream& rng)
{
	const Eigen::MatrixXd g = rng.normal_matrix(n, n);
	Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
	Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
	const Eigen::MatrixXd r = qr.matrixQR();
	for (Eigen::Index j = 0; j < n; ++j)
		if (r(j, j) < 0)
			q.col(j) = -q.col(j);
	return q;
}

/// Resampling with replacement: n draws from [0, n).
inline std::vector<Eigen::Index> bootstrap_indices(Eigen::Index n, RandomStream& rng)
{
	std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
	for (auto& i : idx)
		i = Eigen::Index(rng.index(std::uint64_t(n)));
	return idx;
}

} // namespace canica
