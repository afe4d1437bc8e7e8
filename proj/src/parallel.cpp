#include "sgs/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

namespace sgs {

namespace {

int g_max_threads = 0; // 0 = uninitialized

// Minimal persistent pool. Workers grab chunk indices from a shared counter;
// chunks write disjoint state, so scheduling order never affects results.
class Pool {
public:
    static Pool& instance() {
        static Pool pool;
        return pool;
    }

    void run(int64_t n_chunks, int workers, const std::function<void(int64_t)>& chunk_fn) {
        std::unique_lock<std::mutex> lk(mutex_);
        ensure_workers(workers - 1);
        chunk_fn_ = &chunk_fn;
        next_chunk_.store(0, std::memory_order_relaxed);
        n_chunks_ = n_chunks;
        pending_ = int64_t(threads_.size()); // every worker checks in once per generation
        ++generation_;
        lk.unlock();
        cv_work_.notify_all();

        drain(chunk_fn); // caller participates

        std::unique_lock<std::mutex> lk2(mutex_);
        cv_done_.wait(lk2, [&] { return pending_ == 0; });
        chunk_fn_ = nullptr;
    }

private:
    Pool() = default;

    ~Pool() {
        {
            std::lock_guard<std::mutex> lk(mutex_);
            stop_ = true;
        }
        cv_work_.notify_all();
        for (auto& t : threads_) t.join();
    }

    void ensure_workers(int needed) {
        while (int(threads_.size()) < needed) {
            threads_.emplace_back([this] { worker_loop(); });
        }
    }

    void drain(const std::function<void(int64_t)>& fn) {
        for (;;) {
            int64_t c = next_chunk_.fetch_add(1, std::memory_order_relaxed);
            if (c >= n_chunks_) break;
            fn(c);
        }
    }

    void worker_loop() {
        uint64_t seen = 0;
        for (;;) {
            const std::function<void(int64_t)>* fn = nullptr;
            {
                std::unique_lock<std::mutex> lk(mutex_);
                cv_work_.wait(lk, [&] {
                    return stop_ || (generation_ != seen && chunk_fn_ != nullptr);
                });
                if (stop_) return;
                seen = generation_;
                fn = chunk_fn_;
            }
            drain(*fn);
            {
                std::lock_guard<std::mutex> lk(mutex_);
                if (--pending_ == 0) cv_done_.notify_all();
            }
        }
    }

    std::vector<std::thread> threads_;
    std::mutex mutex_;
    std::condition_variable cv_work_, cv_done_;
    const std::function<void(int64_t)>* chunk_fn_ = nullptr;
    std::atomic<int64_t> next_chunk_{0};
    int64_t n_chunks_ = 0;
    int64_t pending_ = 0;
    uint64_t generation_ = 0;
    bool stop_ = false;
};

} // namespace

int max_threads() {
    if (g_max_threads <= 0) {
        unsigned hc = std::thread::hardware_concurrency();
        g_max_threads = hc == 0 ? 1 : int(hc);
    }
    return g_max_threads;
}

void set_max_threads(int n) { g_max_threads = n < 1 ? 1 : n; }

void parallel_for(int64_t n, int64_t grain, const std::function<void(int64_t, int64_t)>& fn) {
    if (n <= 0) return;
    if (grain < 1) grain = 1;
    const int64_t n_chunks = (n + grain - 1) / grain;
    const int workers = max_threads();
    if (workers <= 1 || n_chunks <= 1) {
        for (int64_t c = 0; c < n_chunks; ++c) {
            fn(c * grain, std::min(n, (c + 1) * grain));
        }
        return;
    }
    Pool::instance().run(n_chunks, workers, [&](int64_t c) {
        fn(c * grain, std::min(n, (c + 1) * grain));
    });
}

} // namespace sgs
