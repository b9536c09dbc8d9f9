#pragma once

// Value iteration for the iterated-CVaR and worst-path objectives, and
// fixed-policy evaluation. Every solve starts from zero and reports the
// a-posteriori bound gamma * residual / (1 - gamma) on its distance to the
// fixed point.

#include "icvar/bellman.hpp"
#include "icvar/mdp.hpp"
#include "icvar/risk.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace icvar {

inline constexpr double kDefaultTolerance = 1e-9;

/// When to stop value iteration. With a tolerance the loop ends once the
/// certified gap is at or below it; with an iteration budget it ends after
/// that many sweeps. If both are set, whichever fires first wins.
struct StopRule {
    std::optional<std::size_t> max_iterations;
    std::optional<double> tolerance = kDefaultTolerance;

    static StopRule iterations(std::size_t count) { return {count, std::nullopt}; }
    static StopRule certified(double tol) { return {std::nullopt, tol}; }
};

struct SolveResult {
    QTable q;
    ValueVector v;
    DeterministicPolicy policy;
    std::size_t iterations = 0;
    double final_residual = 0.0;
    double certified_gap = 0.0;
    /// residuals[t-1] = ||Q_t - Q_{t-1}||_inf.
    std::vector<double> residuals;
};

/// Called after every sweep with the iteration count t and the table Q_t.
using IterationObserver = std::function<void(std::size_t, const QTable&)>;

/// ceil(log(1 / ((1 - gamma) tol)) / log(1 / gamma)) + 1: enough sweeps for
/// gamma^T / (1 - gamma) <= tol.
inline std::size_t iteration_cap(double gamma, double tol) {
    detail::require(tol > 0.0, "tolerance must be positive");
    if (gamma <= 0.0) return 1;
    const double numerator = std::log(1.0 / ((1.0 - gamma) * tol));
    const double sweeps = std::ceil(numerator / std::log(1.0 / gamma));
    return sweeps <= 0.0 ? 1 : static_cast<std::size_t>(sweeps) + 1;
}

inline double certified_gap_of(double gamma, double residual) { return gamma * residual / (1.0 - gamma); }

namespace detail {

inline void check_stop(const StopRule& stop) {
    require(stop.max_iterations || stop.tolerance, "stop rule needs an iteration budget or a tolerance");
    if (stop.max_iterations) require(*stop.max_iterations > 0, "iteration budget must be positive");
    if (stop.tolerance) require(*stop.tolerance > 0.0 && std::isfinite(*stop.tolerance), "tolerance must be positive");
}

inline std::size_t sweep_limit(const StopRule& stop, double gamma) {
    if (stop.tolerance) {
        const std::size_t cap = iteration_cap(gamma, *stop.tolerance);
        return stop.max_iterations ? std::min(cap, *stop.max_iterations) : cap;
    }
    return *stop.max_iterations;
}

template <class Table>
struct FixedPoint {
    Table value;
    std::size_t iterations = 0;
    double final_residual = 0.0;
    std::vector<double> residuals;
};

inline std::span<const double> flat(const QTable& q) { return q.data(); }
inline std::span<const double> flat(const ValueVector& v) { return v.values; }

template <class Table, class Step, class Observe>
FixedPoint<Table> iterate(Table current, Step&& step, const StopRule& stop, double gamma, Observe&& observe) {
    check_stop(stop);
    FixedPoint<Table> out;
    const std::size_t limit = sweep_limit(stop, gamma);
    for (std::size_t t = 1; t <= limit; ++t) {
        Table next = step(current);
        const double residual = max_abs_difference(flat(next), flat(current));
        current = std::move(next);
        out.residuals.push_back(residual);
        out.iterations = t;
        out.final_residual = residual;
        observe(t, current);
        if (stop.tolerance && certified_gap_of(gamma, residual) <= *stop.tolerance) break;
    }
    out.value = std::move(current);
    return out;
}

inline SolveResult finish(FixedPoint<QTable>&& fp, double gamma) {
    SolveResult r;
    r.v = fp.value.state_values();
    r.policy = greedy_policy(fp.value);
    r.q = std::move(fp.value);
    r.iterations = fp.iterations;
    r.final_residual = fp.final_residual;
    r.certified_gap = certified_gap_of(gamma, fp.final_residual);
    r.residuals = std::move(fp.residuals);
    return r;
}

template <class Step>
SolveResult solve_q(const TabularMdp& mdp, Step&& step, const StopRule& stop, const IterationObserver& observer) {
    QTable q0(mdp.num_states(), mdp.num_actions(), 0.0);
    auto fp = iterate(std::move(q0), step, stop, mdp.discount(), [&](std::size_t t, const QTable& q) {
        if (observer) observer(t, q);
    });
    return finish(std::move(fp), mdp.discount());
}

} // namespace detail

/// ICVaR-VI: Q_0 = 0, Q_t = T^tau(Q_{t-1}).
inline SolveResult icvar_vi(const TabularMdp& mdp, RiskLevel tau, const StopRule& stop = {},
                            const IterationObserver& observer = {}) {
    require_valid(mdp);
    return detail::solve_q(
        mdp, [&](const QTable& q) { return cvar_optimality_operator(q, mdp, tau); }, stop, observer);
}

/// Value iteration with the worst-path operator over the given supports.
/// Only rewards and discount of `mdp` are used.
inline SolveResult worst_path_vi(const TabularMdp& mdp, const SupportSets& supports, const StopRule& stop = {},
                                 const IterationObserver& observer = {}) {
    detail::require(mdp.discount() >= 0.0 && mdp.discount() < 1.0, "discount must lie in [0, 1)");
    detail::check_support_shape(supports, mdp);
    return detail::solve_q(
        mdp, [&](const QTable& q) { return worst_path_operator(q, mdp, supports); }, stop, observer);
}

/// Fixed point of the CVaR policy operator, to certified gap <= tolerance.
template <class Policy>
ValueVector policy_eval_cvar(const TabularMdp& mdp, RiskLevel tau, const Policy& policy,
                             double tolerance = kDefaultTolerance) {
    require_valid(mdp);
    auto fp = detail::iterate(
        ValueVector(mdp.num_states(), 0.0),
        [&](const ValueVector& v) { return cvar_policy_operator(v, mdp, tau, policy); },
        StopRule::certified(tolerance), mdp.discount(), [](std::size_t, const ValueVector&) {});
    return std::move(fp.value);
}

/// Fixed point of the worst-path policy operator.
inline ValueVector policy_eval_worst_path(const TabularMdp& mdp, const SupportSets& supports,
                                          const DeterministicPolicy& policy, double tolerance = kDefaultTolerance) {
    detail::require(mdp.discount() >= 0.0 && mdp.discount() < 1.0, "discount must lie in [0, 1)");
    auto fp = detail::iterate(
        ValueVector(mdp.num_states(), 0.0),
        [&](const ValueVector& v) { return worst_path_policy_operator(v, mdp, supports, policy); },
        StopRule::certified(tolerance), mdp.discount(), [](std::size_t, const ValueVector&) {});
    return std::move(fp.value);
}

/// V*(s) - V^learned(s) for every state, both under the true kernel. V* is
/// the evaluation of reference.policy through the same evaluator, so equal
/// policies give an exactly zero gap.
inline ValueVector suboptimality_by_state(const TabularMdp& mdp, RiskLevel tau, const DeterministicPolicy& learned,
                                          const SolveResult& reference, double tolerance = kDefaultTolerance) {
    const auto best = policy_eval_cvar(mdp, tau, reference.policy, tolerance);
    const auto mine = learned == reference.policy ? best : policy_eval_cvar(mdp, tau, learned, tolerance);
    ValueVector gap(mdp.num_states());
    for (std::size_t s = 0; s < gap.size(); ++s) gap[s] = best[s] - mine[s];
    return gap;
}

inline double suboptimality_gap(const TabularMdp& mdp, RiskLevel tau, const DeterministicPolicy& learned,
                                const SolveResult& reference, double tolerance = kDefaultTolerance) {
    const auto gap = suboptimality_by_state(mdp, tau, learned, reference, tolerance);
    return *std::max_element(gap.values.begin(), gap.values.end());
}

inline ValueVector worst_path_suboptimality_by_state(const TabularMdp& mdp, const SupportSets& supports,
                                                     const DeterministicPolicy& learned, const SolveResult& reference,
                                                     double tolerance = kDefaultTolerance) {
    const auto best = policy_eval_worst_path(mdp, supports, reference.policy, tolerance);
    const auto mine = learned == reference.policy ? best : policy_eval_worst_path(mdp, supports, learned, tolerance);
    ValueVector gap(mdp.num_states());
    for (std::size_t s = 0; s < gap.size(); ++s) gap[s] = best[s] - mine[s];
    return gap;
}

} // namespace icvar
