#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace psl {

// Dense row-major matrix, the only layout used throughout.
struct Matrix {
    std::size_t n = 0, p = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols) : n(rows), p(cols), a(rows * cols, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return a[i * p + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * p + j]; }

    std::vector<double> row(std::size_t i) const {
        return {a.begin() + static_cast<long>(i * p), a.begin() + static_cast<long>((i + 1) * p)};
    }
};

double mean(const std::vector<double>& v);
double sample_sd(const std::vector<double>& v);
// Type-7 quantile (linear interpolation between order statistics).
double quantile(std::vector<double> v, double q);

// Shortest round-trippable decimal rendering, and strict parsing.
std::string format_double(double x);
double parse_double(const std::string& s);

// Runs fn(0), ..., fn(count-1) across at most `threads` workers. Tasks must
// write only to their own output slots; the first exception is rethrown after
// all workers join.
void run_parallel(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace psl
