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
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace canica {

/// Worker count: hardware concurrency, capped by CANICA_THREADS when set.
inline unsigned worker_count()
{
	unsigned n = std::max(1u, std::thread::hardware_concurrency());
	if (const char* env = std::getenv("CANICA_THREADS")) {
		try {
			const long cap = std::stol(env);
			if (cap >= 1)
				n = std::min(n, unsigned(cap));
		} catch (...) {
		}
	}
	return n;
}

/// Runs fn(i) for i in [0, n). Work items must key all randomness on i and
/// write only to slot i of their outputs, so results do not depend on the
/// schedule. The first exception (lowest index) is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, unsigned max_workers)
{
	const unsigned workers = unsigned(std::min<std::size_t>(std::max(1u, max_workers), n));
	if (workers <= 1) {
		for (std::size_t i = 0; i < n; ++i)
			fn(i);
		return;
	}

	std::atomic<std::size_t> next{0};
	std::mutex err_mutex;
	std::exception_ptr err;
	std::size_t err_index = n;

	auto body = [&] {
		for (std::size_t i = next++; i < n; i = next++) {
			try {
				fn(i);
			} catch (...) {
				std::lock_guard lock(err_mutex);
				if (i < err_index) {
					err_index = i;
					err = std::current_exception();
				}
			}
		}
	};

	std::vector<std::thread> pool;
	pool.reserve(workers - 1);
	for (unsigned w = 1; w < workers; ++w)
		pool.emplace_back(body);
	body();
	for (auto& t : pool)
		t.join();
	if (err)
		std::rethrow_exception(err);
}

template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn)
{
	parallel_for(n, std::forward<Fn>(fn), worker_count());
}

} // namespace canica
