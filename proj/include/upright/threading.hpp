#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace upright {

// Fixed-size worker pool with deterministic static partitioning.
// parallel_for splits [begin, end) into one contiguous chunk per worker, so
// the mapping from index to thread never depends on timing.
class ThreadPool {
 public:
  explicit ThreadPool(int threads = 0) {
    int n = threads > 0 ? threads : int(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    n_threads_ = n;
    for (int t = 1; t < n; ++t) {
      workers_.emplace_back([this, t] { worker_loop(t); });
    }
  }

  ~ThreadPool() {
    {
      std::unique_lock lk(mu_);
      stop_ = true;
      epoch_++;
    }
    cv_.notify_all();
    for (auto& w : workers_) w.join();
  }

  int size() const { return n_threads_; }

  void parallel_for(int64_t begin, int64_t end, const std::function<void(int64_t, int64_t)>& body) {
    const int64_t total = end - begin;
    if (total <= 0) return;
    if (n_threads_ == 1 || total == 1) {
      body(begin, end);
      return;
    }
    const int parts = int(std::min<int64_t>(n_threads_, total));
    const int64_t chunk = (total + parts - 1) / parts;
    {
      std::unique_lock lk(mu_);
      body_ = &body;
      range_begin_ = begin;
      range_end_ = end;
      chunk_ = chunk;
      parts_ = parts;
      pending_ = parts - 1;  // chunk 0 runs on the calling thread
      epoch_++;
    }
    cv_.notify_all();
    body(begin, std::min(end, begin + chunk));
    std::unique_lock lk(mu_);
    done_cv_.wait(lk, [this] { return pending_ == 0; });
    body_ = nullptr;
  }

 private:
  void worker_loop(int id) {
    uint64_t seen = 0;
    for (;;) {
      const std::function<void(int64_t, int64_t)>* body = nullptr;
      int64_t b = 0, e = 0;
      {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return stop_ || epoch_ != seen; });
        seen = epoch_;
        if (stop_) return;
        if (id >= parts_) continue;  // fewer chunks than workers
        body = body_;
        b = range_begin_ + int64_t(id) * chunk_;
        e = std::min(range_end_, b + chunk_);
      }
      if (body && b < e) (*body)(b, e);
      {
        std::unique_lock lk(mu_);
        if (--pending_ == 0) done_cv_.notify_one();
      }
    }
  }

  std::vector<std::thread> workers_;
  std::mutex mu_;
  std::condition_variable cv_, done_cv_;
  const std::function<void(int64_t, int64_t)>* body_ = nullptr;
  int64_t range_begin_ = 0, range_end_ = 0, chunk_ = 0;
  int parts_ = 0;
  int pending_ = 0;
  uint64_t epoch_ = 0;
  int n_threads_ = 1;
  bool stop_ = false;
};

}  // namespace upright
