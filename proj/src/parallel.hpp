#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace mvcal::detail {

/// Runs fn(begin, end) over [0, n) split into fixed chunks, pulled by a small
/// thread pool. Chunk boundaries are independent of the thread count; callers
/// write results into per-index slots, so output is deterministic.
inline void parallel_chunks(long n, long chunk_size, int threads,
                            const std::function<void(long, long)>& fn) {
  if (n <= 0) return;
  const long n_chunks = (n + chunk_size - 1) / chunk_size;
  int n_threads = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  if (n_threads < 1) n_threads = 1;
  if (n_chunks == 1 || n_threads == 1) {
    for (long c = 0; c < n_chunks; ++c)
      fn(c * chunk_size, std::min(n, (c + 1) * chunk_size));
    return;
  }

  std::atomic<long> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto worker = [&] {
    for (;;) {
      const long c = next.fetch_add(1);
      if (c >= n_chunks || failed.load()) return;
      try {
        fn(c * chunk_size, std::min(n, (c + 1) * chunk_size));
      } catch (...) {
        std::scoped_lock lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_threads));
  for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace mvcal::detail
