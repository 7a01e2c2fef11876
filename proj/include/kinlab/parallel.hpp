#pragma once

// Deterministic parallel map over sample indices. Work is split into
// fixed-size chunks; each chunk's partial result is stored by chunk index
// and folded serially afterwards, so the outcome is bit-identical for any
// thread count.

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace kinlab {

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

// eval: (std::size_t index, Partial& acc) -> void, must be pure per index.
// Returns the partials in chunk order; fold them serially.
template <class Partial, class Eval>
std::vector<Partial> chunked_map(std::size_t count, int threads, Eval&& eval,
                                 std::size_t chunk_size = 256) {
    std::size_t num_chunks = (count + chunk_size - 1) / chunk_size;
    std::vector<Partial> partials(num_chunks);
    if (num_chunks == 0) return partials;

    threads = resolve_threads(threads);
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            std::size_t c = next.fetch_add(1);
            if (c >= num_chunks) return;
            std::size_t lo = c * chunk_size;
            std::size_t hi = std::min(lo + chunk_size, count);
            Partial acc{};
            for (std::size_t i = lo; i < hi; ++i) eval(i, acc);
            partials[c] = std::move(acc);
        }
    };

    if (threads <= 1 || num_chunks == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        int n = std::min<std::size_t>(threads, num_chunks);
        pool.reserve(n);
        for (int t = 0; t < n; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return partials;
}

}  // namespace kinlab
