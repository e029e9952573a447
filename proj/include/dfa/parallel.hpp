#pragma once

#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace dfa {

// Worker count for data-parallel loops: DFA_THREADS if set (clamped to at
// least 1), otherwise the hardware concurrency.
inline int worker_count() {
    if (const char* env = std::getenv("DFA_THREADS")) {
        int v = std::atoi(env);
        if (v >= 1) return v;
        return 1;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

namespace detail {
inline thread_local bool inside_parallel_for = false;
}

// Runs f(i) for i = 0..count-1, statically partitioned over workers. Each
// index must write only its own output slot, which makes the result
// independent of the thread count. Nested calls run serially.
template <class F>
void parallel_for(int count, F&& f) {
    const int workers = detail::inside_parallel_for ? 1 : std::min(worker_count(), count);
    if (workers <= 1) {
        bool was_inside = detail::inside_parallel_for;
        detail::inside_parallel_for = true;
        try {
            for (int i = 0; i < count; ++i) f(i);
        } catch (...) {
            detail::inside_parallel_for = was_inside;
            throw;
        }
        detail::inside_parallel_for = was_inside;
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            detail::inside_parallel_for = true;
            try {
                for (int i = w; i < count; i += workers) f(i);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (std::thread& t : pool) t.join();
    for (const std::exception_ptr& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace dfa
