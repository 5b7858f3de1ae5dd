#pragma once

// Data-parallel building blocks. Every kernel has a serial reference in
// kernels::serial and an OpenMP version in kernels::omp. Reductions are
// computed row by row into a buffer and combined in row order, so the OpenMP
// result is bitwise identical to the serial one for any thread count.

#include <cstddef>
#include <span>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace degenctrl::kernels {

// Caps the number of OpenMP threads used by the omp kernels (<= 0: no cap).
void set_thread_cap(int threads);
int thread_cap();

// Reads DEGENCTRL_THREADS and applies it as the cap; returns the cap in force.
int apply_thread_cap_from_env();

namespace serial {

template <class RowFn>
double row_reduce(std::size_t rows, RowFn&& row_sum) {
    std::vector<double> partial(rows);
    for (std::size_t r = 0; r < rows; ++r) partial[r] = row_sum(r);
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
    for (std::size_t k = 0; k < count; ++k) fn(k);
}

double weighted_dot(std::span<const double> a, std::span<const double> b,
                    std::span<const double> w);

}  // namespace serial

namespace omp {

template <class RowFn>
double row_reduce(std::size_t rows, RowFn&& row_sum) {
    std::vector<double> partial(rows);
    const long n = static_cast<long>(rows);
#ifdef _OPENMP
    const int cap = thread_cap();
#pragma omp parallel for schedule(static) num_threads(cap > 0 ? cap : omp_get_max_threads())
#endif
    for (long r = 0; r < n; ++r) partial[static_cast<std::size_t>(r)] = row_sum(static_cast<std::size_t>(r));
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
    const long n = static_cast<long>(count);
#ifdef _OPENMP
    const int cap = thread_cap();
#pragma omp parallel for schedule(dynamic, 1) num_threads(cap > 0 ? cap : omp_get_max_threads())
#endif
    for (long k = 0; k < n; ++k) fn(static_cast<std::size_t>(k));
}

double weighted_dot(std::span<const double> a, std::span<const double> b,
                    std::span<const double> w);

}  // namespace omp

// Default dispatch used by the library.
template <class RowFn>
double row_reduce(std::size_t rows, RowFn&& row_sum) {
    return omp::row_reduce(rows, std::forward<RowFn>(row_sum));
}

template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
    omp::parallel_for(count, std::forward<Fn>(fn));
}

double weighted_dot(std::span<const double> a, std::span<const double> b,
                    std::span<const double> w);

}  // namespace degenctrl::kernels
