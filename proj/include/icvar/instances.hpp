#pragma once

// Hard MDP families with closed-form values, and seeded random MDPs.
//
// Both hard families live on states {0, ..., S-1}. State 1 is absorbing with
// reward 1; every other state earns 0; states >= 1 move to state 1 under all
// actions. Only state 0 has a decision: action phi is the better one. All
// states get A actions, and actions >= 2 at state 0 copy action 1 - phi.

#include "icvar/keyed_random.hpp"
#include "icvar/mdp.hpp"

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

namespace icvar {

struct CvarHardParams {
    double tau = 0.5;
    double gamma = 0.9;
    double epsilon = 0.01;
    double c = 0.5;
    int phi = 0;
    std::size_t num_states = 3;
    std::size_t num_actions = 2;
};

struct CvarHardDerived {
    double p = 0.0;       // P(1 | 0, phi)
    double q = 0.0;       // P(1 | 0, 1 - phi)
    double delta = 0.0;   // p - q
    double p_low = 0.0;   // smallest P(1 | 0, phi) over the CVaR uncertainty set
    double q_low = 0.0;   // same for action 1 - phi
};

struct WorstPathHardParams {
    double p_min = 0.1;
    double gamma = 0.9;
    int phi = 0;
    std::size_t num_states = 3;
    std::size_t num_actions = 2;
};

/// A constructed MDP together with its closed-form optimal values.
struct HardInstance {
    TabularMdp mdp;
    ValueVector optimal_values;
    std::size_t initial_state = 0;
    std::size_t optimal_action = 0;
};

namespace detail {

inline void check_common(double gamma, int phi, std::size_t S, std::size_t A) {
    require(phi == 0 || phi == 1, "phi must be 0 or 1");
    require(S >= 2, "num_states must be at least 2");
    require(A >= 2, "num_actions must be at least 2");
    require(std::isfinite(gamma) && gamma < 1.0, "gamma must be below 1");
}

/// One arm of state 0: probability of moving to state 1 and back to state 0.
struct Arm {
    double to_one;
    double to_zero;
};

/// Kernel shared by both families: state 0 plays `good` under phi and `bad`
/// under every other action; all other states jump to state 1.
inline TabularMdp two_arm_mdp(std::size_t S, std::size_t A, double gamma, int phi, Arm good, Arm bad) {
    std::vector<double> transition(S * A * S, 0.0);
    std::vector<double> reward(S * A, 0.0);
    auto at = [&](std::size_t s, std::size_t a, std::size_t next) -> double& {
        return transition[(s * A + a) * S + next];
    };
    for (std::size_t a = 0; a < A; ++a) {
        const Arm arm = static_cast<int>(a) == phi ? good : bad;
        at(0, a, 1) = arm.to_one;
        at(0, a, 0) = arm.to_zero;
    }
    for (std::size_t s = 1; s < S; ++s) {
        for (std::size_t a = 0; a < A; ++a) at(s, a, 1) = 1.0;
    }
    for (std::size_t a = 0; a < A; ++a) reward[1 * A + a] = 1.0;
    return {S, A, std::move(transition), std::move(reward), gamma};
}

inline ValueVector absorbing_values(std::size_t S, double gamma, double v0) {
    ValueVector v(S, gamma / (1.0 - gamma));
    v[0] = v0;
    v[1] = 1.0 / (1.0 - gamma);
    return v;
}

} // namespace detail

/// Throws ValidationError naming the violated constraint.
inline void validate_cvar_hard_params(const CvarHardParams& params) {
    using detail::require;
    require(std::isfinite(params.tau) && params.tau > 0.0 && params.tau <= 1.0, "tau must lie in (0, 1]");
    require(params.gamma > 0.5, "gamma must exceed 1/2");
    detail::check_common(params.gamma, params.phi, params.num_states, params.num_actions);
    require(params.c > 0.0 && params.c < 1.0, "c must lie in (0, 1)");
    require(params.epsilon > 0.0, "epsilon must be positive");
    const double eps_max = params.c / (16.0 * (1.0 - params.gamma));
    std::ostringstream msg;
    msg << "epsilon must not exceed c / (16 (1 - gamma)) = " << eps_max;
    require(params.epsilon <= eps_max * (1.0 + 1e-12), msg.str());
}

inline CvarHardDerived derive_cvar_hard(const CvarHardParams& params) {
    validate_cvar_hard_params(params);
    const double tau = params.tau;
    const double gamma = params.gamma;
    CvarHardDerived d;
    d.p = (1.0 - tau) + params.c * tau * (1.0 - gamma);
    d.delta = 16.0 * (1.0 - gamma) * (1.0 - gamma) * tau * params.epsilon;
    d.q = d.p - d.delta;
    d.p_low = std::max(d.p - (1.0 - tau), 0.0) / tau;
    d.q_low = std::max(d.q - (1.0 - tau), 0.0) / tau;
    return d;
}

inline TabularMdp build_cvar_hard_mdp(const CvarHardParams& params) {
    const auto d = derive_cvar_hard(params);
    return detail::two_arm_mdp(params.num_states, params.num_actions, params.gamma, params.phi, {d.p, 1.0 - d.p},
                               {d.q, 1.0 - d.q});
}

/// gamma z / ((1 - gamma)(1 - gamma (1 - z))) with z = p_low rho + q_low (1 - rho),
/// the value at state 0 of a policy playing phi there with probability rho.
inline double cvar_hard_value(const CvarHardParams& params, double rho) {
    detail::require(rho >= 0.0 && rho <= 1.0, "rho must lie in [0, 1]");
    const auto d = derive_cvar_hard(params);
    const double gamma = params.gamma;
    const double z = d.p_low * rho + d.q_low * (1.0 - rho);
    return gamma * z / ((1.0 - gamma) * (1.0 - gamma * (1.0 - z)));
}

inline HardInstance make_cvar_hard_instance(const CvarHardParams& params) {
    return {build_cvar_hard_mdp(params),
            detail::absorbing_values(params.num_states, params.gamma, cvar_hard_value(params, 1.0)), 0,
            static_cast<std::size_t>(params.phi)};
}

inline void validate_worst_path_hard_params(const WorstPathHardParams& params) {
    // Above 1/2 the other branch (1 - p_min) would become the smallest atom.
    detail::require(params.p_min > 0.0 && params.p_min <= 0.5, "p_min must lie in (0, 1/2]");
    detail::require(params.gamma >= 0.0, "gamma must be non-negative");
    detail::check_common(params.gamma, params.phi, params.num_states, params.num_actions);
}

inline TabularMdp build_worst_path_hard_mdp(const WorstPathHardParams& params) {
    validate_worst_path_hard_params(params);
    // The weaker arm falls back to state 0 with probability p_min: this rare
    // branch is what n samples must reveal.
    return detail::two_arm_mdp(params.num_states, params.num_actions, params.gamma, params.phi, {1.0, 0.0},
                               {1.0 - params.p_min, params.p_min});
}

inline HardInstance make_worst_path_hard_instance(const WorstPathHardParams& params) {
    return {build_worst_path_hard_mdp(params),
            detail::absorbing_values(params.num_states, params.gamma, params.gamma / (1.0 - params.gamma)), 0,
            static_cast<std::size_t>(params.phi)};
}

/// Probability of naming the better action from n samples of the weaker
/// arm: certain once state 0 shows up, otherwise a fair guess.
inline double worst_path_guess_probability(double p_min, std::size_t n) {
    detail::require(p_min > 0.0 && p_min <= 1.0, "p_min must lie in (0, 1]");
    return 1.0 - 0.5 * std::pow(1.0 - p_min, static_cast<double>(n));
}

struct RandomMdpSpec {
    std::size_t num_states = 5;
    std::size_t num_actions = 2;
    /// Average support size of a transition row, in [1, S].
    double sparsity = 2.0;
    /// Fraction of (s,a) pairs with a nonzero reward.
    double reward_density = 0.5;
    /// Lower bound on every positive transition probability.
    double min_probability = 0.0;
    double gamma = 0.9;
    Seed seed{};
};

inline TabularMdp random_mdp(const RandomMdpSpec& spec) {
    using detail::require;
    const auto S = spec.num_states;
    const auto A = spec.num_actions;
    require(S >= 1 && A >= 1, "random MDP needs at least one state and one action");
    require(spec.sparsity >= 1.0 && spec.sparsity <= static_cast<double>(S), "sparsity must lie in [1, S]");
    require(spec.reward_density >= 0.0 && spec.reward_density <= 1.0, "reward_density must lie in [0, 1]");
    require(spec.gamma >= 0.0 && spec.gamma < 1.0, "gamma must lie in [0, 1)");
    const auto max_support = static_cast<std::size_t>(std::ceil(spec.sparsity));
    require(spec.min_probability >= 0.0 && spec.min_probability * static_cast<double>(max_support) <= 1.0,
            "min_probability times the largest support size must not exceed 1");

    constexpr std::uint64_t kTag = 0x72616e646d6470ULL;
    const auto base = static_cast<std::size_t>(std::floor(spec.sparsity));
    const double fraction = spec.sparsity - static_cast<double>(base);

    std::vector<double> transition(S * A * S, 0.0);
    std::vector<double> reward(S * A, 0.0);
    std::vector<std::size_t> states(S);
    std::vector<double> weights;
    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t a = 0; a < A; ++a) {
            auto draw = [&](std::uint64_t purpose, std::uint64_t j) {
                return keyed_uniform({kTag, spec.seed.value, s, a, purpose, j});
            };
            std::size_t k = base + (draw(0, 0) < fraction ? 1 : 0);
            k = std::min(std::max<std::size_t>(k, 1), S);

            // Partial Fisher-Yates picks k distinct next states.
            for (std::size_t i = 0; i < S; ++i) states[i] = i;
            for (std::size_t i = 0; i < k; ++i) {
                const auto j = i + static_cast<std::size_t>(draw(1, i) * static_cast<double>(S - i));
                std::swap(states[i], states[std::min(j, S - 1)]);
            }

            // Flat Dirichlet weights via normalized exponentials.
            weights.assign(k, 0.0);
            double total = 0.0;
            for (std::size_t i = 0; i < k; ++i) {
                weights[i] = -std::log1p(-draw(2, i));
                total += weights[i];
            }
            const double free_mass = 1.0 - spec.min_probability * static_cast<double>(k);
            double* row = transition.data() + (s * A + a) * S;
            for (std::size_t i = 0; i < k; ++i) {
                const double w = total > 0.0 ? weights[i] / total : 1.0 / static_cast<double>(k);
                row[states[i]] = spec.min_probability + free_mass * w;
            }

            if (draw(3, 0) < spec.reward_density) reward[s * A + a] = draw(4, 0);
        }
    }
    return {S, A, std::move(transition), std::move(reward), spec.gamma};
}

} // namespace icvar
