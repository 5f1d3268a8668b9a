#pragma once

#include <concepts>
#include <cstddef>
#include <functional>

namespace traceforms {

/// Anything that can run f(0), ..., f(n-1), possibly concurrently, and return
/// once all calls finished.
template <typename E>
concept Executor = requires(const E& e, std::size_t n, const std::function<void(std::size_t)>& f) {
    e.parallel_for(n, f);
};

struct SequentialExecutor {
    template <typename F>
    void parallel_for(std::size_t n, F&& f) const {
        for (std::size_t i = 0; i < n; ++i) f(i);
    }
};

} // namespace traceforms
