#pragma once

// Every data-parallel kernel in the project takes an Execution argument.
// `serial` is the reference path kept for testing; `parallel` distributes
// independent iterations over OpenMP threads. Kernels write results into
// per-index slots and reduce afterwards in index order, so both paths produce
// bit-identical output.

#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <string_view>

namespace lpo {

enum class Execution { serial, parallel };

std::string_view to_string(Execution e);
int max_threads();

/// Calls f(i) for i in [0, n). In parallel mode the first exception thrown by
/// any iteration is rethrown on the calling thread after the loop.
template <class F>
void for_each_index(std::size_t n, Execution exec, F&& f) {
  if (exec == Execution::serial) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      f(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace lpo
