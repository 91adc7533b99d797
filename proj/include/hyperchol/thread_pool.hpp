#pragma once

#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace hyperchol {

/// Fixed-size worker pool that executes one batch of jobs at a time.
/// run_all() returns only after every job in the batch has finished, so each
/// call is a full barrier.
class ThreadPool {
 public:
  explicit ThreadPool(std::size_t workers) {
    if (workers == 0) workers = 1;
    threads_.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t)
      threads_.emplace_back([this] { worker_loop(); });
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  ~ThreadPool() {
    {
      std::lock_guard lock(mutex_);
      stopping_ = true;
    }
    wake_.notify_all();
    for (auto& t : threads_) t.join();
  }

  std::size_t size() const noexcept { return threads_.size(); }

  /// Runs every job and rethrows the first exception raised by any of them.
  void run_all(std::vector<std::function<void()>>& jobs) {
    if (jobs.empty()) return;
    std::unique_lock lock(mutex_);
    jobs_ = &jobs;
    next_ = 0;
    remaining_ = jobs.size();
    failure_ = nullptr;
    ++generation_;
    wake_.notify_all();
    done_.wait(lock, [this] { return remaining_ == 0; });
    jobs_ = nullptr;
    if (failure_) std::rethrow_exception(failure_);
  }

 private:
  void worker_loop() {
    std::size_t seen = 0;
    std::unique_lock lock(mutex_);
    while (true) {
      wake_.wait(lock, [&] { return stopping_ || generation_ != seen; });
      if (stopping_) return;
      seen = generation_;
      while (jobs_ && next_ < jobs_->size()) {
        auto& job = (*jobs_)[next_++];
        lock.unlock();
        std::exception_ptr err;
        try {
          job();
        } catch (...) {
          err = std::current_exception();
        }
        lock.lock();
        if (err && !failure_) failure_ = err;
        if (--remaining_ == 0) done_.notify_one();
      }
    }
  }

  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  std::vector<std::thread> threads_;
  std::vector<std::function<void()>>* jobs_ = nullptr;
  std::size_t next_ = 0;
  std::size_t remaining_ = 0;
  std::size_t generation_ = 0;
  std::exception_ptr failure_;
  bool stopping_ = false;
};

inline std::size_t default_workers() {
  const auto hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace hyperchol
