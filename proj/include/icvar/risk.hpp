#pragma once

// Value-at-risk and conditional value-at-risk of discrete distributions.
//
// Outcomes are rewards, so "worst" means smallest. CVaR_tau averages the
// lowest tau-fraction of probability mass; at tau = 1 it is the mean.

#include "icvar/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

namespace icvar {

/// Density-ratio weights xi with 0 <= xi <= 1/tau and E_P[xi] = 1.
struct RiskEnvelopeWeights {
    std::vector<double> xi;
};

struct DualSolution {
    double value = 0.0;
    RiskEnvelopeWeights weights;
};

namespace detail {

inline void check_outcomes(std::span<const double> values, std::span<const double> probs) {
    require(values.size() == probs.size(), "values and probabilities must have the same length");
    require(!values.empty(), "distribution must have at least one outcome");
    for (std::size_t i = 0; i < values.size(); ++i) {
        require(std::isfinite(values[i]), "values must be finite");
        require(std::isfinite(probs[i]) && probs[i] >= 0.0, "probabilities must be finite and >= 0");
    }
}

/// Outcome indices sorted by ascending value; equal values keep index order.
inline std::vector<std::size_t> ascending_order(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
    return order;
}

/// Lower-tail average given a precomputed ascending order. Zero-probability
/// outcomes are skipped; the boundary outcome gets the leftover mass.
inline double lower_tail_average(std::span<const std::size_t> order, std::span<const double> values,
                                 std::span<const double> probs, double tau) {
    double remaining = tau;
    double total = 0.0;
    for (std::size_t i : order) {
        const double p = probs[i];
        if (p <= 0.0) continue;
        const double w = std::min(p, remaining);
        total += w * values[i];
        remaining -= w;
        if (remaining <= 0.0) break;
    }
    return total / tau;
}

} // namespace detail

/// CVaR_tau of Z where Z takes values[i] with probability probs[i].
inline double cvar_discrete(std::span<const double> values, std::span<const double> probs, RiskLevel tau) {
    detail::check_outcomes(values, probs);
    const auto order = detail::ascending_order(values);
    return detail::lower_tail_average(order, values, probs, tau.value());
}

inline double cvar_discrete(std::span<const double> values, const DiscreteDistribution& dist, RiskLevel tau) {
    return cvar_discrete(values, dist.probs(), tau);
}

/// VaR_tau(Z) = inf { z : F_Z(z) >= tau }.
inline double var_discrete(std::span<const double> values, std::span<const double> probs, RiskLevel tau) {
    detail::check_outcomes(values, probs);
    const auto order = detail::ascending_order(values);
    double cumulative = 0.0;
    double last = values[order.front()];
    for (std::size_t i : order) {
        if (probs[i] <= 0.0) continue;
        cumulative += probs[i];
        last = values[i];
        if (cumulative + kProbabilityTolerance >= tau.value()) {
            return values[i];
        }
    }
    return last;
}

inline double var_discrete(std::span<const double> values, const DiscreteDistribution& dist, RiskLevel tau) {
    return var_discrete(values, dist.probs(), tau);
}

/// Solves inf_{xi in envelope} E_P[xi Z] by filling the envelope greedily
/// from the lowest outcome upward. Independent route to cvar_discrete.
inline DualSolution cvar_dual_oracle(std::span<const double> values, std::span<const double> probs,
                                     RiskLevel tau) {
    detail::check_outcomes(values, probs);
    const double cap = 1.0 / tau.value();

    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (probs[i] > 0.0) order.push_back(i);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return values[i] < values[j] || (values[i] == values[j] && i < j);
    });

    DualSolution out;
    out.weights.xi.assign(values.size(), 0.0);
    double budget = 1.0; // remaining expectation mass sum p * xi still to place
    for (std::size_t i : order) {
        if (budget <= 0.0) break;
        const double p = probs[i];
        if (p * cap <= budget) {
            out.weights.xi[i] = cap;
            budget -= p * cap;
        } else {
            out.weights.xi[i] = budget / p;
            budget = 0.0;
        }
    }

    double value = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        value += probs[i] * out.weights.xi[i] * values[i];
    }
    out.value = value;
    return out;
}

inline DualSolution cvar_dual_oracle(std::span<const double> values, const DiscreteDistribution& dist,
                                     RiskLevel tau) {
    return cvar_dual_oracle(values, dist.probs(), tau);
}

/// argmin over the CVaR uncertainty set U^tau(P) of Ptilde . V.
inline DiscreteDistribution worst_case_kernel(const DiscreteDistribution& dist, std::span<const double> target,
                                              RiskLevel tau) {
    if (tau.value() == 1.0) return dist;
    const auto dual = cvar_dual_oracle(target, dist.probs(), tau);
    std::vector<double> kernel(dist.size());
    for (std::size_t i = 0; i < dist.size(); ++i) {
        kernel[i] = dist[i] * dual.weights.xi[i];
    }
    return DiscreteDistribution(std::move(kernel));
}

/// Total-variation distance, half the L1 distance.
inline double tv_distance(const DiscreteDistribution& p, const DiscreteDistribution& q) {
    detail::require(p.size() == q.size(), "distributions must have the same length");
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        total += std::abs(p[i] - q[i]);
    }
    return 0.5 * total;
}

} // namespace icvar
