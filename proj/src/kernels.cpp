#include "degenctrl/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>

namespace degenctrl::kernels {

namespace {

std::atomic<int> g_thread_cap{0};

constexpr std::size_t kChunk = 512;

double chunk_dot(std::span<const double> a, std::span<const double> b, std::span<const double> w,
                 std::size_t begin, std::size_t end) {
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += w[i] * a[i] * b[i];
    return s;
}

}  // namespace

void set_thread_cap(int threads) { g_thread_cap.store(threads > 0 ? threads : 0); }

int thread_cap() { return g_thread_cap.load(); }

int apply_thread_cap_from_env() {
    if (const char* env = std::getenv("DEGENCTRL_THREADS")) {
        try {
            set_thread_cap(std::stoi(env));
        } catch (...) {
            set_thread_cap(0);
        }
    }
    return thread_cap();
}

namespace serial {

double weighted_dot(std::span<const double> a, std::span<const double> b, std::span<const double> w) {
    const std::size_t n = a.size();
    const std::size_t chunks = (n + kChunk - 1) / kChunk;
    return row_reduce(chunks, [&](std::size_t c) {
        return chunk_dot(a, b, w, c * kChunk, std::min(n, (c + 1) * kChunk));
    });
}

}  // namespace serial

namespace omp {

double weighted_dot(std::span<const double> a, std::span<const double> b, std::span<const double> w) {
    const std::size_t n = a.size();
    const std::size_t chunks = (n + kChunk - 1) / kChunk;
    return row_reduce(chunks, [&](std::size_t c) {
        return chunk_dot(a, b, w, c * kChunk, std::min(n, (c + 1) * kChunk));
    });
}

}  // namespace omp

double weighted_dot(std::span<const double> a, std::span<const double> b, std::span<const double> w) {
    // Thread start-up dominates below a few chunks.
    if (a.size() < 8 * kChunk) return serial::weighted_dot(a, b, w);
    return omp::weighted_dot(a, b, w);
}

}  // namespace degenctrl::kernels
