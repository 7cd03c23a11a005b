#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <random>
#include <thread>
#include <vector>

namespace bsdelab {

// Worker count used by data-parallel loops. Results never depend on it:
// work is cut into fixed-size blocks and partials are reduced in block order.
void set_workers(unsigned n);
unsigned workers();

// Calls f(begin, end, block_index) for every block of [0, n).
template <class F>
void parallel_blocks(std::size_t n, std::size_t block, F&& f)
{
    if (n == 0) return;
    const std::size_t nblocks = (n + block - 1) / block;
    const unsigned w = std::min<std::size_t>(workers(), nblocks);
    auto run = [&](std::size_t b) { f(b * block, std::min(n, (b + 1) * block), b); };
    if (w <= 1) {
        for (std::size_t b = 0; b < nblocks; ++b) run(b);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(w);
    for (unsigned t = 0; t < w; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t b = t; b < nblocks; b += w) run(b);
            } catch (...) {
                errs[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent engine for (seed, stream); streams are path blocks.
inline std::mt19937_64 stream_engine(std::uint64_t seed, std::uint64_t stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(seed)),
                      static_cast<std::uint32_t>(splitmix64(seed) >> 32),
                      static_cast<std::uint32_t>(splitmix64(seed ^ (stream * 0xd1342543de82ef95ULL))),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

} // namespace bsdelab
