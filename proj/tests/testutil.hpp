#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace testutil {

// Two-sided one-sample Kolmogorov--Smirnov statistic against a CDF.
inline double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (size_t i = 0; i < sample.size(); ++i) {
        double f = cdf(sample[i]);
        d = std::max(d, std::fabs(f - static_cast<double>(i) / n));
        d = std::max(d, std::fabs(static_cast<double>(i + 1) / n - f));
    }
    return d;
}

// Two-sample KS statistic.
inline double ks_statistic_two_sample(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j])
            ++i;
        else
            ++j;
        double fa = static_cast<double>(i) / a.size();
        double fb = static_cast<double>(j) / b.size();
        d = std::max(d, std::fabs(fa - fb));
    }
    return d;
}

// Asymptotic two-sided critical value at the 1% level.
inline double ks_critical_1pct(size_t n) { return 1.6276236115189504 / std::sqrt(double(n)); }

inline double ks_critical_1pct_two_sample(size_t n, size_t m) {
    return 1.6276236115189504 * std::sqrt((double(n) + double(m)) / (double(n) * double(m)));
}

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
    double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

// Batch-means standard error of the mean of a correlated chain.
inline double batch_means_se(const std::vector<double>& chain, int n_batches = 100) {
    const int n = static_cast<int>(chain.size());
    const int bs = n / n_batches;
    std::vector<double> bm;
    for (int b = 0; b + 1 <= n_batches; ++b) {
        double s = 0.0;
        for (int i = b * bs; i < (b + 1) * bs; ++i) s += chain[i];
        bm.push_back(s / bs);
    }
    return std::sqrt(variance(bm) / static_cast<double>(bm.size()));
}

// Random rank-d projection matrix from a seeded generator-provided basis.
inline Eigen::MatrixXd projection_from_basis(const Eigen::MatrixXd& basis) {
    return basis * basis.transpose();
}

} // namespace testutil
