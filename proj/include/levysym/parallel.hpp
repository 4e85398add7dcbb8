#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace levysym {

inline int resolve_workers(int requested) {
    if (requested > 0) return requested;
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

// Runs fn(block_begin, block_end) over fixed-size blocks of [0, n).
// Blocks are claimed by an atomic counter; callers must write results into
// per-index (or per-block) slots and reduce sequentially afterwards, so the
// outcome is independent of worker count and scheduling.
template <typename Fn>
void parallel_blocks(std::size_t n, std::size_t block, int workers, Fn&& fn) {
    if (n == 0) return;
    workers = resolve_workers(workers);
    std::size_t nblocks = (n + block - 1) / block;
    if (workers == 1 || nblocks == 1) {
        for (std::size_t b = 0; b < nblocks; ++b)
            fn(b * block, std::min(n, (b + 1) * block));
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    auto worker = [&] {
        for (;;) {
            std::size_t b = next.fetch_add(1);
            if (b >= nblocks || failed.load()) return;
            try {
                fn(b * block, std::min(n, (b + 1) * block));
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    int nthreads = static_cast<int>(std::min<std::size_t>(workers, nblocks));
    pool.reserve(nthreads);
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failed.load() && error) std::rethrow_exception(error);
}

} // namespace levysym
