#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace croftonkit {

/// Streaming mean and variance (Welford), mergeable with Chan's update.
struct MeanAccumulator {
  std::uint64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }

  void merge(const MeanAccumulator& other) {
    if (other.count == 0) return;
    if (count == 0) {
      *this = other;
      return;
    }
    const double n_a = static_cast<double>(count), n_b = static_cast<double>(other.count);
    const double delta = other.mean - mean;
    const double total = n_a + n_b;
    mean += delta * n_b / total;
    m2 += other.m2 + delta * delta * n_a * n_b / total;
    count += other.count;
  }

  double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
  double stderr_of_mean() const { return count > 0 ? std::sqrt(variance() / static_cast<double>(count)) : 0.0; }
};

/// Samples per chunk. Each chunk draws from its own random stream, so results
/// depend on the chunk layout but never on the number of workers.
inline constexpr std::uint64_t kChunkSize = 1 << 15;

/// Resolves a worker request; 0 means all available hardware threads.
inline unsigned resolve_workers(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs `fn(chunk_index, chunk_count) -> Acc` over ceil(n / kChunkSize) chunks
/// on up to `workers` threads and merges the partial results in chunk order.
template <typename Acc, typename Fn>
Acc run_chunked(std::uint64_t n, unsigned workers, Fn&& fn) {
  const std::uint64_t chunks = (n + kChunkSize - 1) / kChunkSize;
  std::vector<Acc> partial(chunks);
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&] {
    for (std::uint64_t c = next++; c < chunks; c = next++) {
      try {
        const std::uint64_t count = std::min(kChunkSize, n - c * kChunkSize);
        partial[c] = fn(c, count);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = chunks;
      }
    }
  };

  const unsigned threads = static_cast<unsigned>(std::min<std::uint64_t>(resolve_workers(workers), std::max<std::uint64_t>(chunks, 1)));
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);

  Acc total{};
  for (const auto& p : partial) total.merge(p);
  return total;
}

}  // namespace croftonkit
