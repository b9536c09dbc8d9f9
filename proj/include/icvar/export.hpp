#pragma once

// Sweep result files and sweep spec documents.
//
// Trial CSV, one row per (cell, replicate) in sweep order:
//   instance_id,tau,gamma,n,seed,gap,gap_state0,picked_phi,iterations,wall_ms
// picked_phi is 1/0, or empty for instances without a hidden action.
//
// Aggregate CSV, one row per cell in sweep order:
//   instance_id,tau,gamma,n,num_seeds,num_errors,mean_gap,median_gap,q90_gap,
//   success_rate,fit_slope,fit_intercept,fit_r2
// success_rate is empty without a target epsilon; the fit columns repeat the
// series fit on every row of the series and are empty when no fit exists.
//
// Reals are written with 17 significant digits so they parse back exactly.

#include "icvar/errors.hpp"
#include "icvar/harness.hpp"
#include "icvar/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace icvar {

namespace detail {

inline std::string real(double x) {
    if (std::isnan(x)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string short_real(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%g", x);
    return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_real(const std::string& text, const char* column) {
    try {
        std::size_t used = 0;
        const double x = std::stod(text, &used);
        if (used == text.size()) return x;
    } catch (const std::exception&) {
    }
    if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw ValidationError(std::string("bad value '") + text + "' in column " + column);
}

inline std::uint64_t parse_unsigned(const std::string& text, const char* column) {
    try {
        std::size_t used = 0;
        const auto x = std::stoull(text, &used);
        if (used == text.size() && !text.empty() && text[0] != '-') return x;
    } catch (const std::exception&) {
    }
    throw ValidationError(std::string("bad value '") + text + "' in column " + column);
}

} // namespace detail

inline constexpr const char* kTrialCsvHeader =
    "instance_id,tau,gamma,n,seed,gap,gap_state0,picked_phi,iterations,wall_ms";
inline constexpr const char* kAggregateCsvHeader =
    "instance_id,tau,gamma,n,num_seeds,num_errors,mean_gap,median_gap,q90_gap,success_rate,fit_slope,fit_intercept,"
    "fit_r2";

inline std::string trial_csv(const SweepResult& result) {
    std::string out = std::string(kTrialCsvHeader) + "\n";
    for (const auto& cell : result.cells) {
        for (const auto& t : cell.trials) {
            out += t.instance_id + "," + detail::real(t.tau) + "," + detail::real(t.gamma) + "," +
                   std::to_string(t.n) + "," + std::to_string(t.seed.value) + "," + detail::real(t.gap) + "," +
                   detail::real(t.gap_state0) + "," + (t.picked_phi ? (*t.picked_phi ? "1" : "0") : "") + "," +
                   std::to_string(t.iterations) + "," + detail::real(t.wall_ms) + "\n";
        }
    }
    return out;
}

inline const SeriesFit* find_fit(const SweepResult& result, const SweepCell& cell) {
    for (const auto& f : result.fits) {
        if (f.instance_id == cell.instance_id && f.tau == cell.tau && f.gamma == cell.gamma) return &f;
    }
    return nullptr;
}

inline std::string aggregate_csv(const SweepResult& result) {
    std::string out = std::string(kAggregateCsvHeader) + "\n";
    for (const auto& c : result.cells) {
        const auto& a = c.aggregate;
        out += c.cell.instance_id + "," + detail::real(c.cell.tau) + "," + detail::real(c.cell.gamma) + "," +
               std::to_string(c.cell.n) + "," + std::to_string(a.num_seeds) + "," + std::to_string(a.num_errors) +
               "," + detail::real(a.mean_gap) + "," + detail::real(a.median_gap) + "," + detail::real(a.q90_gap) + "," +
               (a.success_rate ? detail::real(*a.success_rate) : "");
        const auto* fit = find_fit(result, c.cell);
        if (fit && fit->median_fit) {
            out += "," + detail::real(fit->median_fit->slope) + "," + detail::real(fit->median_fit->intercept) + "," +
                   detail::real(fit->median_fit->r2);
        } else {
            out += ",,,";
        }
        out += "\n";
    }
    return out;
}

/// Rebuilds cells and aggregates from a trial CSV. Cells are keyed by
/// (instance_id, tau, gamma, n) in order of first appearance. Error counts
/// are not part of the trial CSV and come back as zero.
inline SweepResult parse_trial_csv(const std::string& text, std::optional<double> target_epsilon,
                                   bool fit_slopes = true) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kTrialCsvHeader) {
        throw ValidationError("trial CSV must start with the header: " + std::string(kTrialCsvHeader));
    }
    SweepResult result;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != 10) {
            throw ValidationError("trial CSV line " + std::to_string(line_no) + " has " + std::to_string(f.size()) +
                                  " columns, expected 10");
        }
        TrialResult t;
        t.instance_id = f[0];
        t.tau = detail::parse_real(f[1], "tau");
        t.gamma = detail::parse_real(f[2], "gamma");
        t.n = detail::parse_unsigned(f[3], "n");
        t.seed = Seed{detail::parse_unsigned(f[4], "seed")};
        t.gap = detail::parse_real(f[5], "gap");
        t.gap_state0 = detail::parse_real(f[6], "gap_state0");
        if (!f[7].empty()) t.picked_phi = detail::parse_unsigned(f[7], "picked_phi") != 0;
        t.iterations = detail::parse_unsigned(f[8], "iterations");
        t.wall_ms = detail::parse_real(f[9], "wall_ms");

        CellResult* home = nullptr;
        for (auto& c : result.cells) {
            if (c.cell.instance_id == t.instance_id && c.cell.tau == t.tau && c.cell.gamma == t.gamma &&
                c.cell.n == t.n) {
                home = &c;
                break;
            }
        }
        if (!home) {
            result.cells.push_back({{t.instance_id, t.tau, t.gamma, std::nullopt, t.n}, {}, {}, {}});
            home = &result.cells.back();
        }
        home->trials.push_back(std::move(t));
    }
    finalize_sweep(result, target_epsilon, fit_slopes);
    return result;
}

/// Log-log chart of median gap against n, one polyline per series. Cells with
/// a non-positive median are left out of their series.
inline std::string svg_chart(const SweepResult& result) {
    constexpr double width = 720.0;
    constexpr double height = 440.0;
    constexpr double left = 70.0;
    constexpr double right = 200.0;
    constexpr double top = 30.0;
    constexpr double bottom = 50.0;
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

    struct Series {
        std::string label;
        std::vector<std::pair<double, double>> points;
    };
    std::vector<Series> series;
    for (const auto& fit : result.fits) {
        Series s;
        s.label = fit.instance_id + " tau=" + detail::short_real(fit.tau) + " gamma=" + detail::short_real(fit.gamma);
        for (const auto& c : result.cells) {
            if (c.cell.instance_id == fit.instance_id && c.cell.tau == fit.tau && c.cell.gamma == fit.gamma &&
                c.aggregate.num_seeds > 0 && c.aggregate.median_gap > 0.0) {
                s.points.emplace_back(std::log10(static_cast<double>(c.cell.n)), std::log10(c.aggregate.median_gap));
            }
        }
        std::sort(s.points.begin(), s.points.end());
        series.push_back(std::move(s));
    }

    double x_lo = 0.0;
    double x_hi = 1.0;
    double y_lo = -1.0;
    double y_hi = 0.0;
    bool any = false;
    for (const auto& s : series) {
        for (const auto& [x, y] : s.points) {
            if (!any) {
                x_lo = x_hi = x;
                y_lo = y_hi = y;
                any = true;
            }
            x_lo = std::min(x_lo, x);
            x_hi = std::max(x_hi, x);
            y_lo = std::min(y_lo, y);
            y_hi = std::max(y_hi, y);
        }
    }
    x_lo = std::floor(x_lo);
    x_hi = std::max(std::ceil(x_hi), x_lo + 1.0);
    y_lo = std::floor(y_lo);
    y_hi = std::max(std::ceil(y_hi), y_lo + 1.0);

    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;
    auto px = [&](double x) { return left + (x - x_lo) / (x_hi - x_lo) * plot_w; };
    auto py = [&](double y) { return top + (y_hi - y) / (y_hi - y_lo) * plot_h; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\"" << plot_h
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double d = x_lo; d <= x_hi + 1e-9; d += 1.0) {
        svg << "<line x1=\"" << px(d) << "\" y1=\"" << top + plot_h << "\" x2=\"" << px(d) << "\" y2=\""
            << top + plot_h + 5 << "\" stroke=\"black\"/>";
        svg << "<text x=\"" << px(d) << "\" y=\"" << top + plot_h + 18 << "\" text-anchor=\"middle\">1e"
            << static_cast<int>(d) << "</text>\n";
    }
    for (double d = y_lo; d <= y_hi + 1e-9; d += 1.0) {
        svg << "<line x1=\"" << left - 5 << "\" y1=\"" << py(d) << "\" x2=\"" << left << "\" y2=\"" << py(d)
            << "\" stroke=\"black\"/>";
        svg << "<text x=\"" << left - 8 << "\" y=\"" << py(d) + 4 << "\" text-anchor=\"end\">1e"
            << static_cast<int>(d) << "</text>\n";
    }
    svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\">samples per pair n</text>\n";
    svg << "<text x=\"16\" y=\"" << top + plot_h / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << top + plot_h / 2 << ")\">median gap</text>\n";

    for (std::size_t i = 0; i < series.size(); ++i) {
        const char* color = palette[i % std::size(palette)];
        svg << "<polyline class=\"series\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t k = 0; k < series[i].points.size(); ++k) {
            if (k) svg << ' ';
            svg << px(series[i].points[k].first) << ',' << py(series[i].points[k].second);
        }
        svg << "\"/>\n";
        const double ly = top + 14.0 + 18.0 * static_cast<double>(i);
        svg << "<line x1=\"" << width - right + 12 << "\" y1=\"" << ly << "\" x2=\"" << width - right + 32
            << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>";
        svg << "<text x=\"" << width - right + 38 << "\" y=\"" << ly + 4 << "\">" << series[i].label << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

struct ExportPaths {
    std::string trial_csv;
    std::string aggregate_csv;
    std::string svg;
};

/// Writes whichever of the three files has a non-empty path.
inline void export_results(const SweepResult& result, const ExportPaths& paths) {
    if (!paths.trial_csv.empty()) write_text_file(paths.trial_csv, trial_csv(result));
    if (!paths.aggregate_csv.empty()) write_text_file(paths.aggregate_csv, aggregate_csv(result));
    if (!paths.svg.empty()) write_text_file(paths.svg, svg_chart(result));
}

// ---------------------------------------------------------------------------
// Sweep spec documents
//
// {
//   "instance": {"kind": "cvar-hard", "tau": 0.5, "gamma": 0.9, "epsilon": 0.01,
//                "c": 0.5, "phi": 0 | "random", "num_states": 3, "num_actions": 2}
//             | {"kind": "worst-path-hard", "p_min": 0.1, "gamma": 0.9, "phi": ...}
//             | {"kind": "file", "path": "mdp.json"},
//   "instance_id": "...",                       optional
//   "mode": "cvar" | "worst-path",              optional
//   "grid": {"n": [...], "tau": [...], "gamma": [...], "p_min": [...]},
//   "seeds": 50, "master_seed": 1,
//   "target_epsilon": 0.01, "solver_tolerance": 1e-9,
//   "fit": true, "record_wall_time": false,
//   "outputs": {"trial_csv": "...", "aggregate_csv": "...", "svg": "..."}
// }
//
// A relative instance path resolves against the spec file's directory;
// output paths are taken as given.

namespace detail {

template <class T>
T field_or(const json& doc, const char* key, T fallback) {
    if (!doc.contains(key)) return fallback;
    return field<T>(doc, key);
}

inline std::string resolve_path(const std::string& path, const std::string& base_dir) {
    if (path.empty() || base_dir.empty() || std::filesystem::path(path).is_absolute()) return path;
    return (std::filesystem::path(base_dir) / path).lexically_normal().string();
}

inline void read_phi(const json& inst, int& phi, bool& randomize) {
    if (!inst.contains("phi")) return;
    const auto& v = inst.at("phi");
    if (v.is_string()) {
        require(v.get<std::string>() == "random", "phi must be 0, 1 or \"random\"");
        randomize = true;
    } else {
        phi = field<int>(inst, "phi");
    }
}

} // namespace detail

inline SweepSpec parse_sweep_spec(const json& doc, const std::string& base_dir = "") {
    using detail::field;
    using detail::field_or;
    detail::require(doc.is_object(), "sweep spec must be a JSON object");
    SweepSpec spec;
    const auto inst = field<json>(doc, "instance");
    const auto kind = field<std::string>(inst, "kind");
    if (kind == "cvar-hard") {
        CvarHardParams p;
        p.tau = field_or(inst, "tau", p.tau);
        p.gamma = field_or(inst, "gamma", p.gamma);
        p.epsilon = field_or(inst, "epsilon", p.epsilon);
        p.c = field_or(inst, "c", p.c);
        p.num_states = field_or(inst, "num_states", p.num_states);
        p.num_actions = field_or(inst, "num_actions", p.num_actions);
        detail::read_phi(inst, p.phi, spec.randomize_phi);
        validate_cvar_hard_params(p);
        spec.instance = p;
    } else if (kind == "worst-path-hard") {
        WorstPathHardParams p;
        p.p_min = field_or(inst, "p_min", p.p_min);
        p.gamma = field_or(inst, "gamma", p.gamma);
        p.num_states = field_or(inst, "num_states", p.num_states);
        p.num_actions = field_or(inst, "num_actions", p.num_actions);
        detail::read_phi(inst, p.phi, spec.randomize_phi);
        validate_worst_path_hard_params(p);
        spec.instance = p;
    } else if (kind == "file") {
        MdpFileInstance f;
        f.path = detail::resolve_path(field<std::string>(inst, "path"), base_dir);
        f.mdp = std::make_shared<const TabularMdp>(load_mdp(f.path));
        require_valid(*f.mdp);
        spec.instance = f;
    } else {
        throw ValidationError("instance kind must be cvar-hard, worst-path-hard or file, got '" + kind + "'");
    }

    spec.instance_id = field_or<std::string>(doc, "instance_id", "");
    if (doc.contains("mode")) spec.mode = parse_trial_mode(field<std::string>(doc, "mode"));
    const auto grid = field<json>(doc, "grid");
    spec.ns = field<std::vector<std::size_t>>(grid, "n");
    spec.taus = field_or<std::vector<double>>(grid, "tau", {});
    spec.gammas = field_or<std::vector<double>>(grid, "gamma", {});
    spec.p_mins = field_or<std::vector<double>>(grid, "p_min", {});
    detail::require(!spec.ns.empty(), "grid.n must be a nonempty list");
    for (auto n : spec.ns) detail::require(n >= 1, "grid.n entries must be at least 1");
    for (double t : spec.taus) RiskLevel{t};

    spec.num_seeds = field<std::size_t>(doc, "seeds");
    detail::require(spec.num_seeds >= 1, "seeds must be at least 1");
    spec.master_seed = Seed{field_or<std::uint64_t>(doc, "master_seed", 0)};
    if (doc.contains("target_epsilon")) {
        spec.target_epsilon = field<double>(doc, "target_epsilon");
        detail::require(*spec.target_epsilon > 0.0, "target_epsilon must be positive");
    }
    spec.solver_tolerance = field_or(doc, "solver_tolerance", kDefaultTolerance);
    detail::require(spec.solver_tolerance > 0.0, "solver_tolerance must be positive");
    spec.fit_slopes = field_or(doc, "fit", true);
    spec.record_wall_time = field_or(doc, "record_wall_time", false);
    if (doc.contains("outputs")) {
        const auto out = field<json>(doc, "outputs");
        spec.trial_csv = field_or<std::string>(out, "trial_csv", "");
        spec.aggregate_csv = field_or<std::string>(out, "aggregate_csv", "");
        spec.svg = field_or<std::string>(out, "svg", "");
    }
    return spec;
}

inline SweepSpec load_sweep_spec(const std::string& path) {
    const auto dir = std::filesystem::path(path).parent_path().string();
    return parse_sweep_spec(load_json(path), dir);
}

inline json trial_result_to_json(const TrialResult& t) {
    json doc{{"instance_id", t.instance_id},
             {"tau", t.tau},
             {"gamma", t.gamma},
             {"n", t.n},
             {"seed", t.seed.value},
             {"gap", t.gap},
             {"gap_state0", t.gap_state0},
             {"learned_policy", policy_to_json(t.learned_policy)},
             {"support_complete", t.support_complete},
             {"iterations", t.iterations},
             {"wall_ms", t.wall_ms}};
    doc["phi"] = t.phi ? json(*t.phi) : json(nullptr);
    doc["picked_phi"] = t.picked_phi ? json(*t.picked_phi) : json(nullptr);
    return doc;
}

} // namespace icvar
