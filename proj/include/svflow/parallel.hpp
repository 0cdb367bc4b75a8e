#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace svf {

// Static-partition parallel_for. Each index is owned by exactly one worker
// and all accumulation inside a range is serial, so results are bitwise
// identical for any thread count. Nested calls run serial.
class ThreadPool {
  public:
    static ThreadPool& instance() {
        static ThreadPool pool;
        return pool;
    }

    int threads() const { return n_threads_; }

    void set_threads(int n) {
        std::lock_guard<std::mutex> lk(api_mutex_);
        stop_workers();
        n_threads_ = n < 1 ? 1 : n;
        start_workers();
    }

    // fn(begin, end) over [0, n), split into contiguous ranges
    void parallel_for(std::int64_t n, std::int64_t grain,
                      const std::function<void(std::int64_t, std::int64_t)>& fn) {
        if (n <= 0) return;
        if (n_threads_ <= 1 || n < grain * 2 || in_parallel_) {
            fn(0, n);
            return;
        }
        std::lock_guard<std::mutex> lk(api_mutex_);
        std::int64_t parts = n_threads_;
        if (parts > n) parts = n;
        const std::int64_t chunk = (n + parts - 1) / parts;
        in_parallel_ = true;
        {
            std::unique_lock<std::mutex> wl(work_mutex_);
            job_ = &fn;
            job_n_ = n;
            job_chunk_ = chunk;
            job_parts_ = parts;
            next_part_ = 1;  // part 0 runs on the caller
            pending_ = parts - 1;
            ++generation_;
        }
        work_cv_.notify_all();
        fn(0, std::min(chunk, n));
        {
            std::unique_lock<std::mutex> wl(work_mutex_);
            done_cv_.wait(wl, [&] { return pending_ == 0; });
            job_ = nullptr;
        }
        in_parallel_ = false;
    }

    ~ThreadPool() { stop_workers(); }

  private:
    ThreadPool() {
        n_threads_ = static_cast<int>(std::thread::hardware_concurrency());
        if (n_threads_ < 1) n_threads_ = 1;
        start_workers();
    }

    void start_workers() {
        stopping_ = false;
        for (int t = 1; t < n_threads_; ++t) {
            workers_.emplace_back([this] { worker_loop(); });
        }
    }

    void stop_workers() {
        {
            std::lock_guard<std::mutex> wl(work_mutex_);
            stopping_ = true;
        }
        work_cv_.notify_all();
        for (auto& w : workers_) {
            if (w.joinable()) w.join();
        }
        workers_.clear();
    }

    void worker_loop() {
        std::uint64_t seen = 0;
        while (true) {
            const std::function<void(std::int64_t, std::int64_t)>* job = nullptr;
            std::int64_t begin = 0, end = 0;
            {
                std::unique_lock<std::mutex> wl(work_mutex_);
                work_cv_.wait(wl, [&] { return stopping_ || (job_ && generation_ != seen); });
                if (stopping_) return;
                seen = generation_;
                job = job_;
            }
            while (true) {
                std::int64_t part;
                {
                    std::lock_guard<std::mutex> wl(work_mutex_);
                    // the job this loop was dispatched for may already be over
                    if (generation_ != seen || job_ == nullptr) break;
                    if (next_part_ >= job_parts_) break;
                    part = next_part_++;
                }
                begin = part * job_chunk_;
                end = std::min(begin + job_chunk_, job_n_);
                if (begin < end) (*job)(begin, end);
                {
                    std::lock_guard<std::mutex> wl(work_mutex_);
                    if (--pending_ == 0) done_cv_.notify_all();
                }
            }
        }
    }

    int n_threads_ = 1;
    std::vector<std::thread> workers_;
    std::mutex api_mutex_;
    std::mutex work_mutex_;
    std::condition_variable work_cv_;
    std::condition_variable done_cv_;
    const std::function<void(std::int64_t, std::int64_t)>* job_ = nullptr;
    std::int64_t job_n_ = 0, job_chunk_ = 0, job_parts_ = 0, next_part_ = 0;
    int pending_ = 0;
    std::uint64_t generation_ = 0;
    bool stopping_ = false;
    static thread_local bool in_parallel_;
};

inline thread_local bool ThreadPool::in_parallel_ = false;

inline void parallel_for(std::int64_t n, std::int64_t grain,
                         const std::function<void(std::int64_t, std::int64_t)>& fn) {
    ThreadPool::instance().parallel_for(n, grain, fn);
}

}  // namespace svf
