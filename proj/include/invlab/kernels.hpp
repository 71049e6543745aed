#pragma once

// Flat vector kernels used throughout the lab. Every reduction is computed
// block-wise with a fixed block size so the serial and OpenMP paths sum in
// the same order and produce bit-identical results for any thread count.

#include <cstddef>
#include <vector>

namespace invlab {

using Vec = std::vector<double>;

enum class Exec { Serial, Parallel };

namespace kernels {

inline constexpr std::size_t reduce_block = 2048;

bool all_finite(const Vec& x);
double max_abs(const Vec& x);

namespace serial {

double dot(const double* x, const double* y, std::size_t n);
double squared_norm(const double* x, std::size_t n);
double squared_distance(const double* x, const double* y, std::size_t n);
// y := a*x + b*y
void axpby(double a, const double* x, double b, double* y, std::size_t n);
// out := x - y
void sub(const double* x, const double* y, double* out, std::size_t n);

}  // namespace serial

namespace parallel {

double dot(const double* x, const double* y, std::size_t n);
double squared_norm(const double* x, std::size_t n);
double squared_distance(const double* x, const double* y, std::size_t n);
void axpby(double a, const double* x, double b, double* y, std::size_t n);
void sub(const double* x, const double* y, double* out, std::size_t n);

}  // namespace parallel

double dot(const Vec& x, const Vec& y, Exec exec = Exec::Serial);
double squared_norm(const Vec& x, Exec exec = Exec::Serial);
double norm(const Vec& x, Exec exec = Exec::Serial);
double squared_distance(const Vec& x, const Vec& y, Exec exec = Exec::Serial);
double mean_squared_error(const Vec& x, const Vec& y, Exec exec = Exec::Serial);
void axpby(double a, const Vec& x, double b, Vec& y, Exec exec = Exec::Serial);
Vec sub(const Vec& x, const Vec& y, Exec exec = Exec::Serial);

}  // namespace kernels
}  // namespace invlab
