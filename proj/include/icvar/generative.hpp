#pragma once

// Generative-model sampling and the maximum-likelihood empirical kernel.

#include "icvar/bellman.hpp"
#include "icvar/keyed_random.hpp"
#include "icvar/mdp.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace icvar {

/// Per-(s,a) next-state counts from n generative calls each, and the kernel
/// P_hat(s'|s,a) = counts / n. Rewards and discount are those of the source.
class EmpiricalModel {
public:
    EmpiricalModel(const TabularMdp& source, std::vector<std::uint64_t> counts, std::size_t samples_per_pair,
                   Seed seed)
        : counts_(std::move(counts)),
          samples_per_pair_(samples_per_pair),
          seed_(seed),
          kernel_(build_kernel(source, counts_, samples_per_pair)) {}

    std::size_t num_states() const noexcept { return kernel_.num_states(); }
    std::size_t num_actions() const noexcept { return kernel_.num_actions(); }
    std::size_t samples_per_pair() const noexcept { return samples_per_pair_; }
    Seed seed() const noexcept { return seed_; }

    /// n(. , s, a).
    std::span<const std::uint64_t> counts(std::size_t s, std::size_t a) const {
        const auto S = num_states();
        return {counts_.data() + (s * num_actions() + a) * S, S};
    }
    std::span<const std::uint64_t> count_data() const noexcept { return counts_; }

    const TabularMdp& kernel() const noexcept { return kernel_; }

private:
    static TabularMdp build_kernel(const TabularMdp& source, const std::vector<std::uint64_t>& counts,
                                   std::size_t n) {
        const auto S = source.num_states();
        const auto A = source.num_actions();
        detail::require(n >= 1, "samples per pair must be at least 1");
        detail::require(counts.size() == S * A * S, "counts tensor must have shape S x A x S");
        std::vector<double> transition(counts.size());
        for (std::size_t pair = 0; pair < S * A; ++pair) {
            std::uint64_t total = 0;
            for (std::size_t next = 0; next < S; ++next) {
                const auto c = counts[pair * S + next];
                total += c;
                transition[pair * S + next] = static_cast<double>(c) / static_cast<double>(n);
            }
            detail::require(total == n, "counts for (" + std::to_string(pair / A) + "," + std::to_string(pair % A) +
                                            ") do not sum to n");
        }
        std::vector<double> reward(source.reward_data().begin(), source.reward_data().end());
        return {S, A, std::move(transition), std::move(reward), source.discount()};
    }

    std::vector<std::uint64_t> counts_;
    std::size_t samples_per_pair_;
    Seed seed_;
    TabularMdp kernel_;
};

/// Domain tag separating sampling draws from other keyed streams.
inline constexpr std::uint64_t kSampleStream = 0x73616d706c65ULL;

/// Inverse-CDF draw from `row` for uniform u; ties go to the lower index.
inline std::size_t inverse_cdf(std::span<const double> cumulative, double u) {
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) {
        // u fell past a total that rounded below 1: take the last atom with mass.
        std::size_t k = cumulative.size() - 1;
        while (k > 0 && cumulative[k] == cumulative[k - 1]) --k;
        return k;
    }
    return static_cast<std::size_t>(it - cumulative.begin());
}

/// i-th draw for pair (s,a); a pure function of (seed, s, a, i).
inline double sample_uniform(Seed seed, std::size_t s, std::size_t a, std::uint64_t i) {
    return keyed_uniform({kSampleStream, seed.value, s, a, i});
}

inline EmpiricalModel sample_empirical_model(const TabularMdp& mdp, std::size_t n, Seed seed) {
    detail::require(n >= 1, "number of samples per pair must be at least 1");
    require_valid(mdp);
    const auto S = mdp.num_states();
    const auto A = mdp.num_actions();
    std::vector<std::uint64_t> counts(S * A * S, 0);
    std::vector<double> cumulative(S);
    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t a = 0; a < A; ++a) {
            auto row = mdp.row(s, a);
            auto* out = counts.data() + (s * A + a) * S;

            std::size_t atoms = 0;
            std::size_t only = 0;
            for (std::size_t next = 0; next < S; ++next) {
                if (row[next] > 0.0) {
                    ++atoms;
                    only = next;
                }
            }
            if (atoms == 1) {
                // Every draw lands on the single atom.
                out[only] = n;
                continue;
            }

            double running = 0.0;
            for (std::size_t next = 0; next < S; ++next) {
                running += row[next];
                cumulative[next] = running;
            }
            for (std::uint64_t i = 0; i < n; ++i) {
                ++out[inverse_cdf(cumulative, sample_uniform(seed, s, a, i))];
            }
        }
    }
    return {mdp, std::move(counts), n, seed};
}

/// {s' : n(s', s, a) > 0}.
inline SupportSets empirical_supports(const EmpiricalModel& model) {
    const auto S = model.num_states();
    const auto A = model.num_actions();
    std::vector<std::vector<std::size_t>> sets(S * A);
    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t a = 0; a < A; ++a) {
            auto c = model.counts(s, a);
            for (std::size_t next = 0; next < S; ++next) {
                if (c[next] > 0) sets[s * A + a].push_back(next);
            }
        }
    }
    return {S, A, std::move(sets)};
}

/// Smallest strictly positive transition probability.
inline double p_min(const TabularMdp& mdp) {
    double smallest = std::numeric_limits<double>::infinity();
    for (double p : mdp.transition_data()) {
        if (p > 0.0) smallest = std::min(smallest, p);
    }
    detail::require(std::isfinite(smallest), "kernel has no positive entry");
    return smallest;
}

} // namespace icvar
