#pragma once

// Experiment harness: single trials (sample -> learn -> score under the true
// kernel), grid sweeps over (tau, gamma, p_min, n) x seeds, aggregation and
// log-log rate fits.

#include "icvar/bellman.hpp"
#include "icvar/errors.hpp"
#include "icvar/generative.hpp"
#include "icvar/instances.hpp"
#include "icvar/keyed_random.hpp"
#include "icvar/mdp.hpp"
#include "icvar/solver.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace icvar {

enum class TrialMode { Cvar, WorstPath };

inline const char* to_string(TrialMode mode) { return mode == TrialMode::Cvar ? "cvar" : "worst-path"; }

inline TrialMode parse_trial_mode(const std::string& text) {
    if (text == "cvar") return TrialMode::Cvar;
    if (text == "worst-path") return TrialMode::WorstPath;
    throw ValidationError("mode must be 'cvar' or 'worst-path', got '" + text + "'");
}

/// An MDP loaded from a JSON document.
struct MdpFileInstance {
    std::string path;
    std::shared_ptr<const TabularMdp> mdp; // filled on first use when null
};

using InstanceDescriptor = std::variant<CvarHardParams, WorstPathHardParams, MdpFileInstance>;

struct TrialSpec {
    InstanceDescriptor instance = CvarHardParams{};
    double tau = 1.0;
    std::size_t n = 1;
    Seed seed{};
    double solver_tolerance = kDefaultTolerance;
    /// Target accuracy; caps the solver tolerance at epsilon / 100.
    std::optional<double> target_epsilon;
    /// Hard instances only: draw phi from the trial seed instead of using the
    /// descriptor's value, so the learner faces an unknown hypothesis.
    bool randomize_phi = false;
    /// Defaults to worst-path for worst-path instances, CVaR otherwise.
    std::optional<TrialMode> mode;
    std::string instance_id;
};

struct TrialResult {
    std::string instance_id;
    double tau = 1.0;
    double gamma = 0.0;
    std::size_t n = 0;
    Seed seed{};
    /// max_s V*(s) - V^learned(s) under the true kernel.
    double gap = 0.0;
    double gap_state0 = 0.0;
    DeterministicPolicy learned_policy;
    /// Hard instances only.
    std::optional<int> phi;
    std::optional<bool> picked_phi;
    /// Empirical supports equal the true supports at every (s,a).
    bool support_complete = false;
    std::size_t iterations = 0;
    double wall_ms = 0.0;
};

inline constexpr std::uint64_t kPhiStream = 0x706869ULL;

inline int phi_from_seed(Seed seed) { return static_cast<int>(keyed_hash({kPhiStream, seed.value}) & 1ULL); }

inline double effective_tolerance(const TrialSpec& spec) {
    double tol = std::min(spec.solver_tolerance, kDefaultTolerance);
    if (spec.target_epsilon) tol = std::min(tol, *spec.target_epsilon / 100.0);
    return tol;
}

namespace detail {

struct ResolvedInstance {
    TabularMdp mdp;
    std::optional<int> phi;
    TrialMode default_mode;
    std::string default_id;
};

inline ResolvedInstance resolve(const TrialSpec& spec) {
    return std::visit(
        [&](const auto& desc) -> ResolvedInstance {
            using T = std::decay_t<decltype(desc)>;
            if constexpr (std::is_same_v<T, CvarHardParams>) {
                CvarHardParams params = desc;
                params.tau = spec.tau;
                if (spec.randomize_phi) params.phi = phi_from_seed(spec.seed);
                return {build_cvar_hard_mdp(params), params.phi, TrialMode::Cvar, "cvar-hard"};
            } else if constexpr (std::is_same_v<T, WorstPathHardParams>) {
                WorstPathHardParams params = desc;
                if (spec.randomize_phi) params.phi = phi_from_seed(spec.seed);
                return {build_worst_path_hard_mdp(params), params.phi, TrialMode::WorstPath, "worst-path-hard"};
            } else {
                if (desc.mdp) return {*desc.mdp, std::nullopt, TrialMode::Cvar, desc.path};
                throw ValidationError("MDP file instance '" + desc.path + "' has not been loaded");
            }
        },
        spec.instance);
}

} // namespace detail

/// Builds the instance, samples an empirical model, learns a policy on it and
/// scores that policy under the true kernel against the true-model optimum.
inline TrialResult run_trial(const TrialSpec& spec) {
    const auto start = std::chrono::steady_clock::now();
    detail::require(spec.n >= 1, "samples per pair must be at least 1");
    auto inst = detail::resolve(spec);
    const TabularMdp& truth = inst.mdp;
    require_valid(truth);
    const TrialMode mode = spec.mode.value_or(inst.default_mode);
    const double tol = effective_tolerance(spec);
    const auto stop = StopRule::certified(tol);

    const auto model = sample_empirical_model(truth, spec.n, spec.seed);
    const auto truth_supports = true_supports(truth);
    const auto learned_supports = empirical_supports(model);

    TrialResult out;
    out.instance_id = spec.instance_id.empty() ? inst.default_id : spec.instance_id;
    out.tau = spec.tau;
    out.gamma = truth.discount();
    out.n = spec.n;
    out.seed = spec.seed;
    out.phi = inst.phi;
    out.support_complete = learned_supports == truth_supports;

    ValueVector gap;
    if (mode == TrialMode::Cvar) {
        const RiskLevel tau(spec.tau);
        const auto reference = icvar_vi(truth, tau, stop);
        const auto learned = icvar_vi(model.kernel(), tau, stop);
        gap = suboptimality_by_state(truth, tau, learned.policy, reference, tol);
        out.learned_policy = learned.policy;
        out.iterations = learned.iterations;
    } else {
        const auto reference = worst_path_vi(truth, truth_supports, stop);
        const auto learned = worst_path_vi(truth, learned_supports, stop);
        gap = worst_path_suboptimality_by_state(truth, truth_supports, learned.policy, reference, tol);
        out.learned_policy = learned.policy;
        out.iterations = learned.iterations;
    }
    out.gap = *std::max_element(gap.values.begin(), gap.values.end());
    out.gap_state0 = gap[0];
    if (inst.phi) out.picked_phi = static_cast<int>(out.learned_policy[0]) == *inst.phi;

    out.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return out;
}

// ---------------------------------------------------------------------------
// Statistics

struct LogLogFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

/// Least squares of log y on log x (natural logs).
inline LogLogFit fit_loglog_slope(std::span<const std::pair<double, double>> points) {
    detail::require(points.size() >= 3, "log-log fit needs at least 3 points");
    double mx = 0.0;
    double my = 0.0;
    std::vector<double> lx;
    std::vector<double> ly;
    for (const auto& [x, y] : points) {
        detail::require(x > 0.0 && y > 0.0 && std::isfinite(x) && std::isfinite(y),
                        "log-log fit needs positive coordinates");
        lx.push_back(std::log(x));
        ly.push_back(std::log(y));
        mx += lx.back();
        my += ly.back();
    }
    const double k = static_cast<double>(points.size());
    mx /= k;
    my /= k;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    detail::require(sxx > 0.0, "log-log fit needs at least two distinct x values");
    LogLogFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        const double e = ly[i] - (fit.intercept + fit.slope * lx[i]);
        ss_res += e * e;
    }
    fit.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    return fit;
}

/// Linear-interpolation quantile of already sorted data.
inline double sorted_quantile(std::span<const double> sorted, double q) {
    detail::require(!sorted.empty(), "quantile of empty data");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepCell {
    std::string instance_id;
    double tau = 1.0;
    double gamma = 0.0;
    std::optional<double> p_min;
    std::size_t n = 1;
};

struct CellAggregate {
    std::size_t num_seeds = 0;
    std::size_t num_errors = 0;
    double mean_gap = std::numeric_limits<double>::quiet_NaN();
    double median_gap = std::numeric_limits<double>::quiet_NaN();
    double q90_gap = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> success_rate;

    friend bool operator==(const CellAggregate&, const CellAggregate&) = default;
};

struct CellResult {
    SweepCell cell;
    std::vector<TrialResult> trials;
    std::vector<std::string> errors;
    CellAggregate aggregate;
};

/// Trials sharing instance_id, tau and gamma, ordered by n.
struct SeriesFit {
    std::string instance_id;
    double tau = 1.0;
    double gamma = 0.0;
    std::optional<LogLogFit> median_fit;
};

struct SweepResult {
    std::vector<CellResult> cells;
    std::vector<SeriesFit> fits;
    /// Series whose gap grows with n beyond Monte Carlo noise. Informational.
    std::vector<std::string> trend_warnings;
};

struct SweepSpec {
    InstanceDescriptor instance = CvarHardParams{};
    std::string instance_id;
    std::vector<double> taus;
    std::vector<double> gammas;
    std::vector<double> p_mins;
    std::vector<std::size_t> ns;
    std::size_t num_seeds = 1;
    Seed master_seed{};
    std::optional<double> target_epsilon;
    double solver_tolerance = kDefaultTolerance;
    bool randomize_phi = false;
    std::optional<TrialMode> mode;
    bool fit_slopes = true;
    bool record_wall_time = false;
    std::string trial_csv;
    std::string aggregate_csv;
    std::string svg;
};

inline CellAggregate aggregate_gaps(std::span<const TrialResult> trials, std::size_t num_errors,
                                    std::optional<double> target_epsilon) {
    CellAggregate agg;
    agg.num_seeds = trials.size();
    agg.num_errors = num_errors;
    if (trials.empty()) return agg;
    std::vector<double> gaps;
    gaps.reserve(trials.size());
    double total = 0.0;
    std::size_t hits = 0;
    for (const auto& t : trials) {
        gaps.push_back(t.gap);
        total += t.gap;
        if (target_epsilon && t.gap <= *target_epsilon) ++hits;
    }
    agg.mean_gap = total / static_cast<double>(gaps.size());
    std::sort(gaps.begin(), gaps.end());
    agg.median_gap = sorted_quantile(gaps, 0.5);
    agg.q90_gap = sorted_quantile(gaps, 0.9);
    if (target_epsilon) agg.success_rate = static_cast<double>(hits) / static_cast<double>(gaps.size());
    return agg;
}

namespace detail {

inline bool same_series(const SweepCell& a, const SweepCell& b) {
    return a.instance_id == b.instance_id && a.tau == b.tau && a.gamma == b.gamma;
}

inline double mean_of(std::span<const TrialResult> trials) {
    double m = 0.0;
    for (const auto& t : trials) m += t.gap;
    return m / static_cast<double>(trials.size());
}

inline double standard_error(std::span<const TrialResult> trials) {
    if (trials.size() < 2) return 0.0;
    const double m = mean_of(trials);
    double ss = 0.0;
    for (const auto& t : trials) ss += (t.gap - m) * (t.gap - m);
    return std::sqrt(ss / static_cast<double>(trials.size() - 1) / static_cast<double>(trials.size()));
}

} // namespace detail

/// Aggregates, per-series fits and trend checks from per-cell trials.
inline void finalize_sweep(SweepResult& result, std::optional<double> target_epsilon, bool fit_slopes) {
    result.fits.clear();
    result.trend_warnings.clear();
    for (auto& c : result.cells) {
        c.aggregate = aggregate_gaps(c.trials, c.errors.size(), target_epsilon);
    }
    std::vector<bool> used(result.cells.size(), false);
    for (std::size_t i = 0; i < result.cells.size(); ++i) {
        if (used[i]) continue;
        std::vector<const CellResult*> members;
        for (std::size_t j = i; j < result.cells.size(); ++j) {
            if (!used[j] && detail::same_series(result.cells[i].cell, result.cells[j].cell)) {
                used[j] = true;
                members.push_back(&result.cells[j]);
            }
        }
        std::stable_sort(members.begin(), members.end(),
                         [](const CellResult* a, const CellResult* b) { return a->cell.n < b->cell.n; });

        SeriesFit fit{result.cells[i].cell.instance_id, result.cells[i].cell.tau, result.cells[i].cell.gamma, {}};
        if (fit_slopes) {
            std::vector<std::pair<double, double>> points;
            for (const auto* m : members) {
                if (m->aggregate.num_seeds > 0 && m->aggregate.median_gap > 0.0) {
                    points.emplace_back(static_cast<double>(m->cell.n), m->aggregate.median_gap);
                }
            }
            if (points.size() >= 3) fit.median_fit = fit_loglog_slope(points);
        }
        result.fits.push_back(fit);

        for (std::size_t k = 1; k < members.size(); ++k) {
            const auto& prev = members[k - 1]->trials;
            const auto& next = members[k]->trials;
            if (prev.size() < 2 || next.size() < 2) continue;
            const double diff = detail::mean_of(next) - detail::mean_of(prev);
            const double se = std::hypot(detail::standard_error(prev), detail::standard_error(next));
            if (diff > 3.0 * se && diff > 0.0) {
                result.trend_warnings.push_back(fit.instance_id + " tau=" + std::to_string(fit.tau) +
                                                " gamma=" + std::to_string(fit.gamma) + ": mean gap rises from n=" +
                                                std::to_string(members[k - 1]->cell.n) + " to n=" +
                                                std::to_string(members[k]->cell.n));
            }
        }
    }
}

inline std::string default_instance_id(const InstanceDescriptor& instance) {
    if (std::holds_alternative<CvarHardParams>(instance)) return "cvar-hard";
    if (std::holds_alternative<WorstPathHardParams>(instance)) return "worst-path-hard";
    return std::get<MdpFileInstance>(instance).path;
}

/// Grid cells in a fixed order: tau, then gamma, then p_min, then n.
inline std::vector<SweepCell> sweep_cells(const SweepSpec& spec) {
    const std::string base_id = spec.instance_id.empty() ? default_instance_id(spec.instance) : spec.instance_id;

    std::vector<double> taus = spec.taus;
    std::vector<double> gammas = spec.gammas;
    std::vector<std::optional<double>> p_mins;
    double own_tau = 1.0;
    double own_gamma = 0.0;
    std::visit(
        [&](const auto& desc) {
            using T = std::decay_t<decltype(desc)>;
            if constexpr (std::is_same_v<T, CvarHardParams>) {
                own_tau = desc.tau;
                own_gamma = desc.gamma;
            } else if constexpr (std::is_same_v<T, WorstPathHardParams>) {
                own_gamma = desc.gamma;
            } else {
                detail::require(desc.mdp != nullptr, "MDP file instance '" + desc.path + "' has not been loaded");
                own_gamma = desc.mdp->discount();
                detail::require(spec.gammas.empty(), "a gamma axis is not supported for MDP file instances");
            }
        },
        spec.instance);
    if (taus.empty()) taus.push_back(own_tau);
    if (gammas.empty()) gammas.push_back(own_gamma);
    if (spec.p_mins.empty()) {
        p_mins.push_back(std::nullopt);
    } else {
        detail::require(std::holds_alternative<WorstPathHardParams>(spec.instance),
                        "a p_min axis needs a worst-path-hard instance");
        for (double p : spec.p_mins) p_mins.emplace_back(p);
    }

    std::vector<SweepCell> cells;
    for (double tau : taus) {
        for (double gamma : gammas) {
            for (const auto& p_min : p_mins) {
                for (std::size_t n : spec.ns) {
                    std::string id = base_id;
                    if (p_min) {
                        char buf[64];
                        std::snprintf(buf, sizeof buf, "/p_min=%.17g", *p_min);
                        id += buf;
                    }
                    cells.push_back({id, tau, gamma, p_min, n});
                }
            }
        }
    }
    return cells;
}

inline TrialSpec trial_for(const SweepSpec& spec, const SweepCell& cell, std::size_t cell_index,
                           std::size_t replicate) {
    TrialSpec t;
    t.instance = spec.instance;
    std::visit(
        [&](auto& desc) {
            using T = std::decay_t<decltype(desc)>;
            if constexpr (std::is_same_v<T, CvarHardParams>) {
                desc.gamma = cell.gamma;
            } else if constexpr (std::is_same_v<T, WorstPathHardParams>) {
                desc.gamma = cell.gamma;
                if (cell.p_min) desc.p_min = *cell.p_min;
            }
        },
        t.instance);
    t.tau = cell.tau;
    t.n = cell.n;
    t.seed = derive_seed(spec.master_seed, cell_index, replicate);
    t.solver_tolerance = spec.solver_tolerance;
    t.target_epsilon = spec.target_epsilon;
    t.randomize_phi = spec.randomize_phi;
    t.mode = spec.mode;
    t.instance_id = cell.instance_id;
    return t;
}

/// Runs every (cell, replicate) trial on up to `jobs` threads. Results are
/// stored by index, so the outcome does not depend on scheduling.
inline SweepResult sweep(const SweepSpec& spec, std::size_t jobs = 1) {
    detail::require(!spec.ns.empty(), "sweep grid needs at least one n");
    detail::require(spec.num_seeds >= 1, "sweep needs at least one seed");
    const auto cells = sweep_cells(spec);

    struct Task {
        std::size_t cell;
        std::size_t replicate;
    };
    std::vector<Task> tasks;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        for (std::size_t r = 0; r < spec.num_seeds; ++r) tasks.push_back({c, r});
    }

    std::vector<std::optional<TrialResult>> results(tasks.size());
    std::vector<std::string> failures(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            try {
                results[i] = run_trial(trial_for(spec, cells[tasks[i].cell], tasks[i].cell, tasks[i].replicate));
                if (!spec.record_wall_time) results[i]->wall_ms = 0.0;
            } catch (const std::exception& e) {
                failures[i] = e.what();
            }
        }
    };
    jobs = std::max<std::size_t>(1, std::min(jobs, tasks.size()));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    }

    SweepResult out;
    for (const auto& cell : cells) out.cells.push_back({cell, {}, {}, {}});
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        auto& dest = out.cells[tasks[i].cell];
        if (results[i]) {
            dest.trials.push_back(std::move(*results[i]));
        } else {
            dest.errors.push_back(failures[i]);
        }
    }
    finalize_sweep(out, spec.target_epsilon, spec.fit_slopes);
    return out;
}

} // namespace icvar
