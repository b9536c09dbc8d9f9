#pragma once

// Iterated-CVaR Bellman operators. All operators are pure: the input table
// is never modified and a fresh result is returned.

#include "icvar/mdp.hpp"
#include "icvar/risk.hpp"

#include <algorithm>
#include <limits>
#include <span>
#include <vector>

namespace icvar {

/// For every (s, a), the set of next states the worst-path backup ranges over.
class SupportSets {
public:
    SupportSets(std::size_t num_states, std::size_t num_actions, std::vector<std::vector<std::size_t>> sets)
        : num_states_(num_states), num_actions_(num_actions), sets_(std::move(sets)) {
        detail::require(sets_.size() == num_states_ * num_actions_, "support table must have shape S x A");
        for (std::size_t i = 0; i < sets_.size(); ++i) {
            auto& set = sets_[i];
            detail::require(!set.empty(), "empty support set at (" + std::to_string(i / num_actions_) + "," +
                                              std::to_string(i % num_actions_) + ")");
            std::sort(set.begin(), set.end());
            set.erase(std::unique(set.begin(), set.end()), set.end());
            detail::require(set.back() < num_states_, "support set contains an invalid state index");
        }
    }

    std::size_t num_states() const noexcept { return num_states_; }
    std::size_t num_actions() const noexcept { return num_actions_; }

    /// Sorted ascending, duplicates removed.
    std::span<const std::size_t> at(std::size_t s, std::size_t a) const { return sets_[s * num_actions_ + a]; }

    friend bool operator==(const SupportSets&, const SupportSets&) = default;

private:
    std::size_t num_states_;
    std::size_t num_actions_;
    std::vector<std::vector<std::size_t>> sets_;
};

/// supp(P(. | s, a)) of the MDP's own kernel.
inline SupportSets true_supports(const TabularMdp& mdp) {
    const auto S = mdp.num_states();
    const auto A = mdp.num_actions();
    std::vector<std::vector<std::size_t>> sets(S * A);
    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t a = 0; a < A; ++a) {
            auto row = mdp.row(s, a);
            for (std::size_t next = 0; next < S; ++next) {
                if (row[next] > 0.0) sets[s * A + a].push_back(next);
            }
        }
    }
    return {S, A, std::move(sets)};
}

namespace detail {

inline void check_q_shape(const QTable& q, const TabularMdp& mdp) {
    require(q.num_states() == mdp.num_states() && q.num_actions() == mdp.num_actions(),
            "Q table shape does not match the MDP");
}

inline void check_v_shape(const ValueVector& v, const TabularMdp& mdp) {
    require(v.size() == mdp.num_states(), "value vector length does not match the MDP");
}

inline void check_policy_shape(const DeterministicPolicy& pi, const TabularMdp& mdp) {
    require(pi.size() == mdp.num_states(), "policy length does not match the MDP");
    for (std::size_t s = 0; s < pi.size(); ++s) {
        require(pi[s] < mdp.num_actions(), "policy action out of range at state " + std::to_string(s));
    }
}

inline void check_support_shape(const SupportSets& supports, const TabularMdp& mdp) {
    require(supports.num_states() == mdp.num_states() && supports.num_actions() == mdp.num_actions(),
            "support sets shape does not match the MDP");
}

inline double min_over(std::span<const std::size_t> set, const ValueVector& v) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t s : set) m = std::min(m, v[s]);
    return m;
}

} // namespace detail

/// T^tau(Q)(s,a) = r(s,a) + gamma * CVaR_tau(V(s')), s' ~ P(.|s,a), V = max_a Q.
inline QTable cvar_optimality_operator(const QTable& q, const TabularMdp& mdp, RiskLevel tau) {
    detail::check_q_shape(q, mdp);
    const auto S = mdp.num_states();
    const auto A = mdp.num_actions();
    const double gamma = mdp.discount();

    const ValueVector v = q.state_values();
    // V is shared by every backup, so one sort serves the whole sweep.
    const auto order = detail::ascending_order(v.values);

    QTable out(S, A);
    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t a = 0; a < A; ++a) {
            out(s, a) = mdp.reward(s, a) + gamma * detail::lower_tail_average(order, v.values, mdp.row(s, a), tau.value());
        }
    }
    return out;
}

/// V'(s) = r(s,pi(s)) + gamma * CVaR_tau(V(s')), s' ~ P(.|s,pi(s)).
inline ValueVector cvar_policy_operator(const ValueVector& v, const TabularMdp& mdp, RiskLevel tau,
                                        const DeterministicPolicy& policy) {
    detail::check_v_shape(v, mdp);
    detail::check_policy_shape(policy, mdp);
    const auto order = detail::ascending_order(v.values);
    ValueVector out(mdp.num_states());
    for (std::size_t s = 0; s < mdp.num_states(); ++s) {
        const std::size_t a = policy[s];
        out[s] = mdp.reward(s, a) + mdp.discount() * detail::lower_tail_average(order, v.values, mdp.row(s, a), tau.value());
    }
    return out;
}

/// Stochastic policies: the pi-weighted sum of the per-action backups.
inline ValueVector cvar_policy_operator(const ValueVector& v, const TabularMdp& mdp, RiskLevel tau,
                                        const StochasticPolicy& policy) {
    detail::check_v_shape(v, mdp);
    detail::require(policy.num_states() == mdp.num_states() && policy.num_actions() == mdp.num_actions(),
                    "policy shape does not match the MDP");
    const auto order = detail::ascending_order(v.values);
    ValueVector out(mdp.num_states());
    for (std::size_t s = 0; s < mdp.num_states(); ++s) {
        double total = 0.0;
        for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
            const double w = policy(s, a);
            if (w == 0.0) continue;
            total += w * (mdp.reward(s, a) +
                          mdp.discount() * detail::lower_tail_average(order, v.values, mdp.row(s, a), tau.value()));
        }
        out[s] = total;
    }
    return out;
}

/// T(Q)(s,a) = r(s,a) + gamma * min_{s' in support(s,a)} max_a' Q(s',a').
inline QTable worst_path_operator(const QTable& q, const TabularMdp& mdp, const SupportSets& supports) {
    detail::check_q_shape(q, mdp);
    detail::check_support_shape(supports, mdp);
    const ValueVector v = q.state_values();
    QTable out(mdp.num_states(), mdp.num_actions());
    for (std::size_t s = 0; s < mdp.num_states(); ++s) {
        for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
            out(s, a) = mdp.reward(s, a) + mdp.discount() * detail::min_over(supports.at(s, a), v);
        }
    }
    return out;
}

inline ValueVector worst_path_policy_operator(const ValueVector& v, const TabularMdp& mdp,
                                              const SupportSets& supports, const DeterministicPolicy& policy) {
    detail::check_v_shape(v, mdp);
    detail::check_support_shape(supports, mdp);
    detail::check_policy_shape(policy, mdp);
    ValueVector out(mdp.num_states());
    for (std::size_t s = 0; s < mdp.num_states(); ++s) {
        const std::size_t a = policy[s];
        out[s] = mdp.reward(s, a) + mdp.discount() * detail::min_over(supports.at(s, a), v);
    }
    return out;
}

/// argmax_a Q(s, a); ties go to the lowest action index.
inline DeterministicPolicy greedy_policy(const QTable& q) {
    DeterministicPolicy pi;
    pi.action.resize(q.num_states());
    for (std::size_t s = 0; s < q.num_states(); ++s) {
        auto row = q.row(s);
        std::size_t best = 0;
        for (std::size_t a = 1; a < row.size(); ++a) {
            if (row[a] > row[best]) best = a;
        }
        pi.action[s] = best;
    }
    return pi;
}

} // namespace icvar
