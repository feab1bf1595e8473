#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace sbx {

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
    std::size_t count = 0;
};

inline MeanSe mean_se(const std::vector<double>& xs) {
    MeanSe r;
    r.count = xs.size();
    if (xs.empty()) return r;
    double s = 0.0;
    for (double x : xs) s += x;
    r.mean = s / static_cast<double>(xs.size());
    if (xs.size() < 2) return r;
    double v = 0.0;
    for (double x : xs) v += (x - r.mean) * (x - r.mean);
    v /= static_cast<double>(xs.size() - 1);
    r.se = std::sqrt(v / static_cast<double>(xs.size()));
    return r;
}

inline double median(std::vector<double> xs) {
    if (xs.empty()) throw std::invalid_argument("median: empty sample");
    const std::size_t m = xs.size() / 2;
    std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(m), xs.end());
    double hi = xs[m];
    if (xs.size() % 2 == 1) return hi;
    std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(m) - 1, xs.end());
    return 0.5 * (hi + xs[m - 1]);
}

/// Delete-one jackknife standard error of -log(mean(w)).
inline double jackknife_se_neglogmean(const std::vector<double>& w) {
    const std::size_t n = w.size();
    if (n < 2) return 0.0;
    double total = 0.0;
    for (double x : w) total += x;
    std::vector<double> theta(n);
    for (std::size_t i = 0; i < n; ++i)
        theta[i] = -std::log((total - w[i]) / static_cast<double>(n - 1));
    const MeanSe m = mean_se(theta);
    // jackknife variance = (n-1)/n * sum (theta_i - theta_bar)^2
    double v = 0.0;
    for (double t : theta) v += (t - m.mean) * (t - m.mean);
    v *= static_cast<double>(n - 1) / static_cast<double>(n);
    return std::sqrt(v);
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
    double slope_ci_lo = 0.0; ///< slope +- 2 se
    double slope_ci_hi = 0.0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n != y.size() || n < 3) throw std::invalid_argument("fit_line: need >= 3 points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - f.intercept - f.slope * x[i];
        ss += r * r;
    }
    f.slope_se = std::sqrt(ss / static_cast<double>(n - 2) / sxx);
    f.slope_ci_lo = f.slope - 2.0 * f.slope_se;
    f.slope_ci_hi = f.slope + 2.0 * f.slope_se;
    return f;
}

/// One-sample Kolmogorov-Smirnov statistic against a CDF given as sorted
/// uniform transforms (pass F(x_i) values).
inline double ks_statistic_uniform(std::vector<double> u) {
    std::sort(u.begin(), u.end());
    const std::size_t n = u.size();
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double lo = static_cast<double>(i) / static_cast<double>(n);
        const double hi = static_cast<double>(i + 1) / static_cast<double>(n);
        d = std::max(d, std::max(u[i] - lo, hi - u[i]));
    }
    return d;
}

/// Asymptotic KS critical value at level alpha (e.g. 1.628/sqrt(n) at 1%).
inline double ks_critical(std::size_t n, double alpha) {
    const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
    return c / std::sqrt(static_cast<double>(n));
}

/// Spearman rank correlation of y against x within one small group.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    auto ranks = [](const std::vector<double>& v) {
        const std::size_t m = v.size();
        std::vector<std::size_t> idx(m);
        for (std::size_t i = 0; i < m; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
        std::vector<double> r(m);
        std::size_t i = 0;
        while (i < m) {
            std::size_t j = i;
            while (j + 1 < m && v[idx[j + 1]] == v[idx[i]]) ++j;
            const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
            for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    const std::vector<double> rx = ranks(x), ry = ranks(y);
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

struct TrendTest {
    double mean_rho = 0.0; ///< mean per-replica Spearman correlation
    double z = 0.0;        ///< normal test statistic across replicas
    bool significant_1pct = false;
};

/// Positive-trend test: Spearman correlation is computed within each
/// replica (replicas are independent), then averaged; the z statistic is
/// mean/SE over replicas, valid at any within-replica dependence.
inline TrendTest spearman_trend(const std::vector<std::vector<double>>& per_replica_y,
                                const std::vector<double>& x) {
    std::vector<double> rhos;
    rhos.reserve(per_replica_y.size());
    for (const auto& y : per_replica_y) rhos.push_back(spearman(x, y));
    const MeanSe m = mean_se(rhos);
    TrendTest t;
    t.mean_rho = m.mean;
    t.z = m.se > 0.0 ? m.mean / m.se : 0.0;
    t.significant_1pct = t.z > 2.326;
    return t;
}

} // namespace sbx
