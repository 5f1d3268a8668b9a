#pragma once

// Fixed worker pool satisfying the Executor concept. parallel_for hands out
// indices through an atomic counter; the calling thread works too. The first
// exception thrown by any task is rethrown from parallel_for after all
// workers have stopped picking up new indices.

#include <traceforms/executor.hpp>

#include <atomic>
#include <condition_variable>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace traceforms::cli {

class ThreadPool {
public:
    explicit ThreadPool(std::size_t workers) {
        if (workers == 0) workers = 1;
        for (std::size_t i = 1; i < workers; ++i) threads_.emplace_back([this] { loop(); });
    }

    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

    ~ThreadPool() {
        {
            std::lock_guard lock(mu_);
            stop_ = true;
        }
        wake_.notify_all();
        for (auto& t : threads_) t.join();
    }

    [[nodiscard]] std::size_t size() const { return threads_.size() + 1; }

    void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f) const {
        if (n == 0) return;
        std::unique_lock call(call_mu_);  // one job at a time
        {
            std::lock_guard lock(mu_);
            job_ = &f;
            n_ = n;
            next_.store(0);
            error_ = nullptr;
            active_ = threads_.size();
            ++generation_;
        }
        wake_.notify_all();
        work();
        std::unique_lock lock(mu_);
        done_.wait(lock, [this] { return active_ == 0; });
        job_ = nullptr;
        if (error_) std::rethrow_exception(error_);
    }

private:
    void work() const {
        for (;;) {
            const std::size_t i = next_.fetch_add(1);
            if (i >= n_) return;
            try {
                (*job_)(i);
            } catch (...) {
                std::lock_guard lock(mu_);
                if (!error_) error_ = std::current_exception();
                next_.store(n_);
            }
        }
    }

    void loop() {
        std::size_t seen = 0;
        for (;;) {
            {
                std::unique_lock lock(mu_);
                wake_.wait(lock, [&] { return stop_ || generation_ != seen; });
                if (stop_) return;
                seen = generation_;
            }
            work();
            {
                std::lock_guard lock(mu_);
                --active_;
            }
            done_.notify_one();
        }
    }

    std::vector<std::thread> threads_;
    mutable std::mutex mu_;
    mutable std::mutex call_mu_;
    mutable std::condition_variable wake_;
    mutable std::condition_variable done_;
    mutable const std::function<void(std::size_t)>* job_ = nullptr;
    mutable std::size_t n_ = 0;
    mutable std::atomic<std::size_t> next_{0};
    mutable std::exception_ptr error_;
    mutable std::size_t active_ = 0;
    mutable std::size_t generation_ = 0;
    bool stop_ = false;
};

static_assert(Executor<ThreadPool>);

} // namespace traceforms::cli
