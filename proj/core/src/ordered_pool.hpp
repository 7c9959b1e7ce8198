#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <map>
#include <mutex>
#include <thread>
#include <vector>

namespace drr::detail {

// Runs work(i) for i in [0, n) on up to `workers` threads and hands each
// result to commit(i, result) strictly in index order, one call at a time.
// The first exception from work or commit stops scheduling and is rethrown.
template <typename Work, typename Commit>
void run_ordered(std::size_t n, int workers, Work&& work, Commit&& commit) {
  using Result = decltype(work(std::size_t{}));
  const std::size_t n_threads = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1, std::max<std::size_t>(n, 1));

  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::mutex mu;
  std::map<std::size_t, Result> pending;
  std::size_t next_commit = 0;
  std::exception_ptr error;

  auto body = [&] {
    while (!stop.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        Result r = work(i);
        std::lock_guard lock(mu);
        pending.emplace(i, std::move(r));
        while (!pending.empty() && pending.begin()->first == next_commit) {
          commit(next_commit, std::move(pending.begin()->second));
          pending.erase(pending.begin());
          ++next_commit;
        }
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
        stop = true;
        return;
      }
    }
  };

  if (n_threads == 1) {
    body();
  } else {
    std::vector<std::jthread> threads;
    threads.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(body);
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace drr::detail
