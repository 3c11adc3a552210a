// Copyright 2026 The synqp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace synqp {

namespace detail {
inline std::atomic<unsigned>& thread_setting() {
  static std::atomic<unsigned> count{0};
  return count;
}
inline bool& inside_worker() {
  thread_local bool inside = false;
  return inside;
}
}  // namespace detail

// 0 selects std::thread::hardware_concurrency().
inline void set_thread_count(unsigned count) {
  detail::thread_setting().store(count);
}

inline unsigned thread_count() {
  unsigned n = detail::thread_setting().load();
  if (n == 0) {
    if (const char* env = std::getenv("SYNQP_THREADS")) {
      n = static_cast<unsigned>(std::strtoul(env, nullptr, 10));
    }
  }
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

// Runs body(i) for i in [0, n) over contiguous chunks. Results must not
// depend on scheduling: bodies write only to slot i of preallocated output.
// Calls nested inside a worker run inline. The exception from the lowest
// failing chunk is rethrown.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  const std::size_t workers =
      detail::inside_worker() ? 1 : std::min<std::size_t>(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  threads.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      detail::inside_worker() = true;
      const std::size_t lo = w * chunk;
      const std::size_t hi = std::min(n, lo + chunk);
      try {
        for (std::size_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace synqp
