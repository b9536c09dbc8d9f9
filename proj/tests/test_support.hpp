#pragma once

// Shared fixtures and reference implementations for the test suites. Oracles
// here are written from the definitions, not from the library code paths.

#include "icvar/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace testing_support {

using icvar::TabularMdp;

inline std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n, double zero_fraction = 0.0) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> p(n, 0.0);
    double total = 0.0;
    for (auto& x : p) {
        if (unit(rng) >= zero_fraction) x = -std::log(1.0 - unit(rng));
        total += x;
    }
    if (total == 0.0) {
        p[rng() % n] = 1.0;
        return p;
    }
    for (auto& x : p) x /= total;
    // Push rounding residue onto the largest entry so the row sums to 1.
    double sum = 0.0;
    for (double x : p) sum += x;
    *std::max_element(p.begin(), p.end()) += 1.0 - sum;
    return p;
}

inline std::vector<double> random_values(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

inline TabularMdp random_dense_mdp(std::mt19937_64& rng, std::size_t S, std::size_t A, double gamma,
                                   double zero_fraction = 0.3) {
    std::vector<double> transition;
    for (std::size_t i = 0; i < S * A; ++i) {
        const auto row = random_simplex(rng, S, zero_fraction);
        transition.insert(transition.end(), row.begin(), row.end());
    }
    return {S, A, std::move(transition), random_values(rng, S * A, 0.0, 1.0), gamma};
}

/// CVaR of the lower tail via the Rockafellar-Uryasev form
/// max_z { z - E[(z - X)^+] / tau }, maximized over the atoms (the
/// objective is concave piecewise linear with kinks at the atoms).
inline double cvar_oracle(const std::vector<double>& values, const std::vector<double>& probs, double tau) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (probs[k] <= 0.0) continue;
        const double z = values[k];
        double shortfall = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) shortfall += probs[i] * std::max(z - values[i], 0.0);
        best = std::max(best, z - shortfall / tau);
    }
    return best;
}

/// Plain risk-neutral value iteration with its own loop and stopping rule.
inline std::vector<double> risk_neutral_q(const TabularMdp& mdp, double tol = 1e-13) {
    const std::size_t S = mdp.num_states();
    const std::size_t A = mdp.num_actions();
    const double g = mdp.discount();
    std::vector<double> q(S * A, 0.0);
    std::vector<double> v(S, 0.0);
    for (int it = 0; it < 100000; ++it) {
        for (std::size_t s = 0; s < S; ++s) {
            double m = q[s * A];
            for (std::size_t a = 1; a < A; ++a) m = std::max(m, q[s * A + a]);
            v[s] = m;
        }
        double change = 0.0;
        for (std::size_t s = 0; s < S; ++s) {
            for (std::size_t a = 0; a < A; ++a) {
                double ev = 0.0;
                for (std::size_t n = 0; n < S; ++n) ev += mdp.transition(s, a, n) * v[n];
                const double next = mdp.reward(s, a) + g * ev;
                change = std::max(change, std::abs(next - q[s * A + a]));
                q[s * A + a] = next;
            }
        }
        if (change * g / (1.0 - g) < tol || change == 0.0) break;
    }
    return q;
}

/// Closed-form hard-instance value gamma z / ((1 - gamma)(1 - gamma (1 - z))).
inline double two_state_value(double gamma, double z) { return gamma * z / ((1.0 - gamma) * (1.0 - gamma * (1.0 - z))); }

} // namespace testing_support
