#pragma once

#include "icvar/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace icvar {

/// Absolute tolerance on row sums of constructed kernels.
inline constexpr double kProbabilityTolerance = 1e-12;

/// Risk level tau of CVaR / VaR. Always in (0, 1].
class RiskLevel {
public:
    explicit RiskLevel(double tau) : tau_(tau) {
        detail::require(std::isfinite(tau) && tau > 0.0 && tau <= 1.0,
                        "risk level tau must lie in (0, 1], got " + std::to_string(tau));
    }

    double value() const noexcept { return tau_; }

private:
    double tau_;
};

/// Probability vector over a finite outcome set.
class DiscreteDistribution {
public:
    explicit DiscreteDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
        detail::require(!probs_.empty(), "distribution must have at least one outcome");
        double total = 0.0;
        for (double p : probs_) {
            detail::require(std::isfinite(p) && p >= 0.0, "distribution entries must be finite and >= 0");
            total += p;
        }
        detail::require(std::abs(total - 1.0) <= kProbabilityTolerance,
                        "distribution must sum to 1 (sum = " + std::to_string(total) + ")");
    }

    std::size_t size() const noexcept { return probs_.size(); }
    double operator[](std::size_t i) const { return probs_[i]; }
    std::span<const double> probs() const noexcept { return probs_; }

    friend bool operator==(const DiscreteDistribution&, const DiscreteDistribution&) = default;

private:
    std::vector<double> probs_;
};

/// State-value function, one entry per state.
struct ValueVector {
    std::vector<double> values;

    ValueVector() = default;
    explicit ValueVector(std::vector<double> v) : values(std::move(v)) {}
    explicit ValueVector(std::size_t num_states, double fill = 0.0) : values(num_states, fill) {}

    std::size_t size() const noexcept { return values.size(); }
    double operator[](std::size_t s) const { return values[s]; }
    double& operator[](std::size_t s) { return values[s]; }

    friend bool operator==(const ValueVector&, const ValueVector&) = default;
};

/// Dense action-value table, row-major by state.
class QTable {
public:
    QTable() = default;
    QTable(std::size_t num_states, std::size_t num_actions, double fill = 0.0)
        : num_states_(num_states), num_actions_(num_actions), values_(num_states * num_actions, fill) {}

    std::size_t num_states() const noexcept { return num_states_; }
    std::size_t num_actions() const noexcept { return num_actions_; }

    double operator()(std::size_t s, std::size_t a) const { return values_[s * num_actions_ + a]; }
    double& operator()(std::size_t s, std::size_t a) { return values_[s * num_actions_ + a]; }

    std::span<const double> row(std::size_t s) const {
        return {values_.data() + s * num_actions_, num_actions_};
    }
    std::span<const double> data() const noexcept { return values_; }

    /// V(s) = max_a Q(s, a).
    ValueVector state_values() const {
        ValueVector v(num_states_);
        for (std::size_t s = 0; s < num_states_; ++s) {
            auto r = row(s);
            v[s] = *std::max_element(r.begin(), r.end());
        }
        return v;
    }

    friend bool operator==(const QTable&, const QTable&) = default;

private:
    std::size_t num_states_ = 0;
    std::size_t num_actions_ = 0;
    std::vector<double> values_;
};

/// One action per state.
struct DeterministicPolicy {
    std::vector<std::size_t> action;

    std::size_t size() const noexcept { return action.size(); }
    std::size_t operator[](std::size_t s) const { return action[s]; }

    friend bool operator==(const DeterministicPolicy&, const DeterministicPolicy&) = default;
};

/// pi(a | s) as an S x A table whose rows are distributions.
class StochasticPolicy {
public:
    StochasticPolicy(std::size_t num_states, std::size_t num_actions, std::vector<double> probs)
        : num_states_(num_states), num_actions_(num_actions), probs_(std::move(probs)) {
        detail::require(probs_.size() == num_states_ * num_actions_, "stochastic policy has wrong shape");
        for (std::size_t s = 0; s < num_states_; ++s) {
            double total = 0.0;
            for (std::size_t a = 0; a < num_actions_; ++a) {
                double p = (*this)(s, a);
                detail::require(p >= 0.0, "policy probabilities must be >= 0");
                total += p;
            }
            detail::require(std::abs(total - 1.0) <= kProbabilityTolerance, "policy rows must sum to 1");
        }
    }

    static StochasticPolicy from_deterministic(const DeterministicPolicy& pi, std::size_t num_actions) {
        std::vector<double> probs(pi.size() * num_actions, 0.0);
        for (std::size_t s = 0; s < pi.size(); ++s) {
            detail::require(pi[s] < num_actions, "policy action out of range");
            probs[s * num_actions + pi[s]] = 1.0;
        }
        return {pi.size(), num_actions, std::move(probs)};
    }

    std::size_t num_states() const noexcept { return num_states_; }
    std::size_t num_actions() const noexcept { return num_actions_; }
    double operator()(std::size_t s, std::size_t a) const { return probs_[s * num_actions_ + a]; }

private:
    std::size_t num_states_;
    std::size_t num_actions_;
    std::vector<double> probs_;
};

/// Finite discounted MDP (S, A, gamma, P, r) with dense storage.
///
/// The constructor enforces shapes only; value-level checks (row sums,
/// reward range, discount range) are reported by validate_mdp().
class TabularMdp {
public:
    TabularMdp(std::size_t num_states, std::size_t num_actions, std::vector<double> transition,
               std::vector<double> reward, double discount)
        : num_states_(num_states),
          num_actions_(num_actions),
          transition_(std::move(transition)),
          reward_(std::move(reward)),
          discount_(discount) {
        detail::require(num_states_ > 0, "num_states must be positive");
        detail::require(num_actions_ > 0, "num_actions must be positive");
        detail::require(transition_.size() == num_states_ * num_actions_ * num_states_,
                        "transition tensor must have shape S x A x S");
        detail::require(reward_.size() == num_states_ * num_actions_, "reward table must have shape S x A");
    }

    std::size_t num_states() const noexcept { return num_states_; }
    std::size_t num_actions() const noexcept { return num_actions_; }
    double discount() const noexcept { return discount_; }

    double reward(std::size_t s, std::size_t a) const { return reward_[s * num_actions_ + a]; }
    double transition(std::size_t s, std::size_t a, std::size_t next) const {
        return transition_[(s * num_actions_ + a) * num_states_ + next];
    }
    /// P(. | s, a).
    std::span<const double> row(std::size_t s, std::size_t a) const {
        return {transition_.data() + (s * num_actions_ + a) * num_states_, num_states_};
    }

    std::span<const double> transition_data() const noexcept { return transition_; }
    std::span<const double> reward_data() const noexcept { return reward_; }

    /// Same rewards and discount, different kernel.
    TabularMdp with_transition(std::vector<double> transition) const {
        return {num_states_, num_actions_, std::move(transition), reward_, discount_};
    }

    friend bool operator==(const TabularMdp&, const TabularMdp&) = default;

private:
    std::size_t num_states_;
    std::size_t num_actions_;
    std::vector<double> transition_;
    std::vector<double> reward_;
    double discount_;
};

struct Violation {
    enum class Kind { RowSum, NegativeProbability, RewardRange, Discount };

    Kind kind;
    std::size_t state = 0;
    std::size_t action = 0;
    std::size_t next_state = 0;
    double magnitude = 0.0;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const noexcept { return violations.empty(); }

    std::string summary() const {
        std::ostringstream out;
        for (std::size_t i = 0; i < violations.size(); ++i) {
            if (i) out << "; ";
            out << violations[i].message;
        }
        return out.str();
    }
};

inline ValidationReport validate_mdp(const TabularMdp& mdp) {
    ValidationReport report;
    const auto S = mdp.num_states();
    const auto A = mdp.num_actions();

    const double gamma = mdp.discount();
    if (!(std::isfinite(gamma) && gamma >= 0.0 && gamma < 1.0)) {
        report.violations.push_back({Violation::Kind::Discount, 0, 0, 0, gamma,
                                     "discount must lie in [0, 1), got " + std::to_string(gamma)});
    }

    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t a = 0; a < A; ++a) {
            auto row = mdp.row(s, a);
            double total = 0.0;
            for (std::size_t next = 0; next < S; ++next) {
                const double p = row[next];
                if (!(p >= 0.0) || !std::isfinite(p)) {
                    std::ostringstream msg;
                    msg << "negative or non-finite probability " << p << " at (" << s << "," << a << ","
                        << next << ")";
                    report.violations.push_back(
                        {Violation::Kind::NegativeProbability, s, a, next, p, msg.str()});
                }
                total += p;
            }
            const double deviation = std::abs(total - 1.0);
            if (!(deviation <= kProbabilityTolerance)) {
                std::ostringstream msg;
                msg << "row (" << s << "," << a << ") sums to " << total << " (deviation " << deviation << ")";
                report.violations.push_back({Violation::Kind::RowSum, s, a, 0, deviation, msg.str()});
            }

            const double r = mdp.reward(s, a);
            if (!(r >= 0.0 && r <= 1.0)) {
                std::ostringstream msg;
                msg << "reward out of [0,1] at (" << s << "," << a << "): " << r;
                const double excess = r > 1.0 ? r - 1.0 : -r;
                report.violations.push_back({Violation::Kind::RewardRange, s, a, 0, excess, msg.str()});
            }
        }
    }
    return report;
}

/// Throws ValidationError listing every violation.
inline void require_valid(const TabularMdp& mdp) {
    auto report = validate_mdp(mdp);
    if (!report.ok()) {
        throw ValidationError("invalid MDP: " + report.summary());
    }
}

inline double max_abs_difference(std::span<const double> x, std::span<const double> y) {
    detail::require(x.size() == y.size(), "size mismatch in max-norm difference");
    double m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        m = std::max(m, std::abs(x[i] - y[i]));
    }
    return m;
}

} // namespace icvar
