#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace loadgen {

/// Calls body(i, worker) for i in [0, count), striding indices over up to
/// `threads` workers. The first exception from any worker is rethrown after
/// all workers have joined.
template <typename Body>
void parallel_for(Eigen::Index count, int threads, Body&& body)
{
    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(std::max<Eigen::Index>(count, 1))));
    if (workers == 1) {
        for (Eigen::Index i = 0; i < count; ++i) {
            body(i, 0);
        }
        return;
    }
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    {
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (Eigen::Index i = w; i < count; i += workers) {
                        body(i, w);
                    }
                } catch (...) {
                    errors[static_cast<std::size_t>(w)] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

} // namespace loadgen
