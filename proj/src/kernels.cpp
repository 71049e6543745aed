#include "invlab/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace invlab::kernels {

bool all_finite(const Vec& x) {
    for (double v : x) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

double max_abs(const Vec& x) {
    double m = 0.0;
    for (double v : x) {
        double a = std::fabs(v);
        if (a > m) m = a;
    }
    return m;
}

namespace {

inline std::size_t block_count(std::size_t n) {
    return (n + reduce_block - 1) / reduce_block;
}

inline void check_same_size(std::size_t a, std::size_t b) {
    if (a != b) throw std::invalid_argument("kernels: size mismatch");
}

}  // namespace

namespace serial {

double dot(const double* x, const double* y, std::size_t n) {
    const std::size_t nb = block_count(n);
    double total = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
        const std::size_t lo = b * reduce_block;
        const std::size_t hi = std::min(n, lo + reduce_block);
        double acc = 0.0;
        for (std::size_t i = lo; i < hi; ++i) acc += x[i] * y[i];
        total += acc;
    }
    return total;
}

double squared_norm(const double* x, std::size_t n) { return dot(x, x, n); }

double squared_distance(const double* x, const double* y, std::size_t n) {
    const std::size_t nb = block_count(n);
    double total = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
        const std::size_t lo = b * reduce_block;
        const std::size_t hi = std::min(n, lo + reduce_block);
        double acc = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            const double d = x[i] - y[i];
            acc += d * d;
        }
        total += acc;
    }
    return total;
}

void axpby(double a, const double* x, double b, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a * x[i] + b * y[i];
}

void sub(const double* x, const double* y, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] - y[i];
}

}  // namespace serial

namespace parallel {

double dot(const double* x, const double* y, std::size_t n) {
    const std::size_t nb = block_count(n);
    std::vector<double> partial(nb, 0.0);
#pragma omp parallel for schedule(static)
    for (long long b = 0; b < static_cast<long long>(nb); ++b) {
        const std::size_t lo = static_cast<std::size_t>(b) * reduce_block;
        const std::size_t hi = std::min(n, lo + reduce_block);
        double acc = 0.0;
        for (std::size_t i = lo; i < hi; ++i) acc += x[i] * y[i];
        partial[static_cast<std::size_t>(b)] = acc;
    }
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

double squared_norm(const double* x, std::size_t n) { return dot(x, x, n); }

double squared_distance(const double* x, const double* y, std::size_t n) {
    const std::size_t nb = block_count(n);
    std::vector<double> partial(nb, 0.0);
#pragma omp parallel for schedule(static)
    for (long long b = 0; b < static_cast<long long>(nb); ++b) {
        const std::size_t lo = static_cast<std::size_t>(b) * reduce_block;
        const std::size_t hi = std::min(n, lo + reduce_block);
        double acc = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            const double d = x[i] - y[i];
            acc += d * d;
        }
        partial[static_cast<std::size_t>(b)] = acc;
    }
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

void axpby(double a, const double* x, double b, double* y, std::size_t n) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
        y[i] = a * x[i] + b * y[i];
    }
}

void sub(const double* x, const double* y, double* out, std::size_t n) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i) out[i] = x[i] - y[i];
}

}  // namespace parallel

double dot(const Vec& x, const Vec& y, Exec exec) {
    check_same_size(x.size(), y.size());
    return exec == Exec::Parallel ? parallel::dot(x.data(), y.data(), x.size())
                                  : serial::dot(x.data(), y.data(), x.size());
}

double squared_norm(const Vec& x, Exec exec) {
    return exec == Exec::Parallel ? parallel::squared_norm(x.data(), x.size())
                                  : serial::squared_norm(x.data(), x.size());
}

double norm(const Vec& x, Exec exec) { return std::sqrt(squared_norm(x, exec)); }

double squared_distance(const Vec& x, const Vec& y, Exec exec) {
    check_same_size(x.size(), y.size());
    return exec == Exec::Parallel
               ? parallel::squared_distance(x.data(), y.data(), x.size())
               : serial::squared_distance(x.data(), y.data(), x.size());
}

double mean_squared_error(const Vec& x, const Vec& y, Exec exec) {
    check_same_size(x.size(), y.size());
    if (x.empty()) throw std::invalid_argument("kernels: empty input");
    return squared_distance(x, y, exec) / static_cast<double>(x.size());
}

void axpby(double a, const Vec& x, double b, Vec& y, Exec exec) {
    check_same_size(x.size(), y.size());
    if (exec == Exec::Parallel) {
        parallel::axpby(a, x.data(), b, y.data(), x.size());
    } else {
        serial::axpby(a, x.data(), b, y.data(), x.size());
    }
}

Vec sub(const Vec& x, const Vec& y, Exec exec) {
    check_same_size(x.size(), y.size());
    Vec out(x.size());
    if (exec == Exec::Parallel) {
        parallel::sub(x.data(), y.data(), out.data(), x.size());
    } else {
        serial::sub(x.data(), y.data(), out.data(), x.size());
    }
    return out;
}

}  // namespace invlab::kernels
