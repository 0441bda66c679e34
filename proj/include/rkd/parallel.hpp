#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace rkd {

//! Worker count from RKD_WORKERS, else the hardware concurrency.
inline int
worker_count()
{
  if (const char* env = std::getenv("RKD_WORKERS")) {
    try {
      const int v = std::stoi(env);
      if (v > 0)
        return v;
    } catch (...) {
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

//! Runs fn(i) for i in [0, n) on up to `workers` threads. Results must be
//! written to per-index slots; the exception of the lowest failing index is
//! rethrown so failures do not depend on scheduling.
namespace detail {
inline bool&
inside_parallel_region()
{
  thread_local bool flag = false;
  return flag;
}
} // namespace detail

template<class Fn>
void
parallel_for(std::size_t n, Fn&& fn, int workers = 0)
{
  if (workers <= 0)
    workers = worker_count();
  // nested regions run serially on the calling worker
  if (detail::inside_parallel_region())
    workers = 1;
  const std::size_t nthreads =
    std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  if (nthreads <= 1) {
    for (std::size_t i = 0; i < n; ++i)
      fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{ 0 };
  auto body = [&] {
    detail::inside_parallel_region() = true;
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n)
        return;
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  for (std::size_t t = 0; t < nthreads; ++t)
    pool.emplace_back(body);
  for (auto& th : pool)
    th.join();
  for (auto& e : errors) {
    if (e)
      std::rethrow_exception(e);
  }
}

} // namespace rkd
