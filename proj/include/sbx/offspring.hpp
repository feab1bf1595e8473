#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sbx/rng.hpp"

namespace sbx {

/// Critical offspring distribution with generating function
///   f(s) = s + (1-s)^{1+beta} / (1+beta),
/// i.e. p_0 = 1/(1+beta), p_1 = 0, p_{k+1} = p_k (k-1-beta)/(k+1).
/// Chosen so that n * rate(n) * [f(1-u/n) - (1-u/n)] equals u^{1+beta}
/// identically when rate(n) = (1+beta) n^beta: the rescaled particle
/// system branches with the stable mechanism at every mass scale, not
/// just in the limit.  beta = 1 degenerates to the binary law {1/2,0,1/2}.
///
/// Probabilities are tabulated up to k_max; the remaining mass and mean
/// have closed forms (telescoping the ratio recurrence):
///   P(K > m)        = beta Gamma(m-beta) / ((1+beta) Gamma(1-beta) m!)
///   E[K; K > m]     = Gamma(m-beta) / (Gamma(1-beta) Gamma(m)),
/// and tail draws use Pareto inversion with index 1+beta.
class OffspringLaw {
  public:
    static OffspringLaw make(double beta, int k_max = 100000) {
        if (!(beta > 0.0) || beta > 1.0)
            throw std::invalid_argument("OffspringLaw: beta must be in (0,1]");
        OffspringLaw law;
        law.beta_ = beta;
        law.k_max_ = k_max;
        law.pmf_.assign(static_cast<std::size_t>(k_max) + 1, 0.0);
        law.pmf_[0] = 1.0 / (1.0 + beta);
        if (k_max >= 2) law.pmf_[2] = 0.5 * beta;
        for (int k = 2; k < k_max; ++k)
            law.pmf_[static_cast<std::size_t>(k) + 1] =
                law.pmf_[static_cast<std::size_t>(k)] * (static_cast<double>(k) - 1.0 - beta) /
                (static_cast<double>(k) + 1.0);
        law.cdf_.resize(law.pmf_.size());
        double acc = 0.0;
        for (std::size_t k = 0; k < law.pmf_.size(); ++k) {
            acc += law.pmf_[k];
            law.cdf_[k] = acc;
        }
        if (beta < 1.0) {
            const double lg1mb = std::lgamma(1.0 - beta);
            const double m = static_cast<double>(k_max);
            law.tail_mass_ = beta / (1.0 + beta) *
                             std::exp(std::lgamma(m - beta) - lg1mb - std::lgamma(m + 1.0));
            law.tail_mean_ = std::exp(std::lgamma(m - beta) - lg1mb - std::lgamma(m));
        }
        return law;
    }

    double beta() const { return beta_; }
    int k_max() const { return k_max_; }
    double tail_mass() const { return tail_mass_; }
    double tail_mean() const { return tail_mean_; }

    double prob(int k) const {
        if (k < 0) return 0.0;
        if (k <= k_max_) return pmf_[static_cast<std::size_t>(k)];
        if (beta_ >= 1.0) return 0.0;
        return beta_ / std::tgamma(1.0 - beta_) *
               std::exp(std::lgamma(static_cast<double>(k) - 1.0 - beta_) -
                        std::lgamma(static_cast<double>(k) + 1.0));
    }

    /// Total tabulated mass plus analytic tail; equals 1 up to rounding.
    double total_mass() const { return cdf_.back() + tail_mass_; }
    /// First moment including the analytic tail; equals 1 (criticality).
    double total_mean() const {
        double s = 0.0;
        for (std::size_t k = 2; k < pmf_.size(); ++k) s += static_cast<double>(k) * pmf_[k];
        return s + tail_mean_;
    }

    std::int64_t sample(Rng& rng) const {
        const double u = rng.uniform_co();
        // bulk of the mass sits at tiny k: scan before binary search
        if (u < cdf_[8]) {
            for (int k = 0; k <= 8; ++k)
                if (u < cdf_[static_cast<std::size_t>(k)]) return k;
        }
        if (u < cdf_.back()) {
            const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
            return static_cast<std::int64_t>(it - cdf_.begin());
        }
        // Pareto tail: P(K > k | K > k_max) ~ (k/k_max)^{-(1+beta)}
        const double v = rng.uniform();
        const double x = static_cast<double>(k_max_) * std::pow(v, -1.0 / (1.0 + beta_));
        const double cap = 1.0e12;
        const std::int64_t k = static_cast<std::int64_t>(std::min(x, cap));
        return std::max<std::int64_t>(k, k_max_ + 1);
    }

  private:
    double beta_ = 0.5;
    int k_max_ = 0;
    double tail_mass_ = 0.0;
    double tail_mean_ = 0.0;
    std::vector<double> pmf_;
    std::vector<double> cdf_;
};

} // namespace sbx
