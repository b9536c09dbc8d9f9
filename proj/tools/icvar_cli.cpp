// icvar: command-line front end for the iterated-CVaR toolkit.
//
// Exit codes: 0 ok, 2 validation failure, 3 I/O failure, 4 a sweep cell
// failed for every seed. Errors are printed to stderr as one JSON object.

#include "icvar/icvar.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <sstream>
#include <string>

using namespace icvar;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;
constexpr int kExitCellFailed = 4;

void print_error(const char* kind, const std::string& message, const std::string& path = "") {
    json err{{"error", kind}, {"message", message}};
    if (!path.empty()) err["path"] = path;
    std::cerr << err.dump() << '\n';
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        std::cout.flush();
    } else {
        write_text_file(out_path, text);
    }
}

/// Options that select an MDP: a JSON document or a generated instance.
struct InstanceOptions {
    std::string mdp_path;
    std::string kind;
    double gamma = 0.9;
    double epsilon = 0.01;
    double c = 0.5;
    int phi = 0;
    double p_min = 0.1;
    std::size_t num_states = 3;
    std::size_t num_actions = 2;
    double sparsity = 2.0;
    double reward_density = 0.5;
    double min_probability = 0.0;
    std::uint64_t seed = 0;

    void add_generator_flags(CLI::App* app) {
        app->add_option("--gamma", gamma, "Discount factor")->capture_default_str();
        app->add_option("--epsilon", epsilon, "Target accuracy of the cvar-hard instance")->capture_default_str();
        app->add_option("--c", c, "Constant c of the cvar-hard instance, in (0,1)")->capture_default_str();
        app->add_option("--phi", phi, "Better action at state 0 (0 or 1)")->capture_default_str();
        app->add_option("--p-min", p_min, "Rare-branch probability of the worst-path instance")->capture_default_str();
        app->add_option("--num-states", num_states, "Number of states")->capture_default_str();
        app->add_option("--num-actions", num_actions, "Number of actions")->capture_default_str();
        app->add_option("--sparsity", sparsity, "Random MDP: average support size")->capture_default_str();
        app->add_option("--reward-density", reward_density, "Random MDP: fraction of rewarded pairs")
            ->capture_default_str();
        app->add_option("--min-probability", min_probability, "Random MDP: floor on positive probabilities")
            ->capture_default_str();
    }

    void add_flags(CLI::App* app) {
        auto* mdp = app->add_option("--mdp", mdp_path, "MDP JSON document");
        app->add_option("--instance", kind, "Generate instead: cvar-hard | worst-path-hard | random")
            ->excludes(mdp)
            ->check(CLI::IsMember({"cvar-hard", "worst-path-hard", "random"}));
        add_generator_flags(app);
    }

    CvarHardParams cvar_params(double tau) const {
        CvarHardParams p;
        p.tau = tau;
        p.gamma = gamma;
        p.epsilon = epsilon;
        p.c = c;
        p.phi = phi;
        p.num_states = num_states;
        p.num_actions = num_actions;
        return p;
    }

    WorstPathHardParams worst_path_params() const {
        WorstPathHardParams p;
        p.p_min = p_min;
        p.gamma = gamma;
        p.phi = phi;
        p.num_states = num_states;
        p.num_actions = num_actions;
        return p;
    }

    RandomMdpSpec random_spec() const {
        RandomMdpSpec spec;
        spec.num_states = num_states;
        spec.num_actions = num_actions;
        spec.sparsity = sparsity;
        spec.reward_density = reward_density;
        spec.min_probability = min_probability;
        spec.gamma = gamma;
        spec.seed = Seed{seed};
        return spec;
    }

    /// The MDP plus, for generated instances, the meta block.
    std::pair<TabularMdp, json> build(double tau) const {
        if (!mdp_path.empty()) return {load_mdp(mdp_path), json()};
        if (kind == "cvar-hard") {
            const auto p = cvar_params(tau);
            return {build_cvar_hard_mdp(p), cvar_hard_meta(p)};
        }
        if (kind == "worst-path-hard") {
            const auto p = worst_path_params();
            return {build_worst_path_hard_mdp(p), worst_path_meta(p)};
        }
        if (kind == "random") {
            const auto spec = random_spec();
            return {random_mdp(spec), random_meta(spec)};
        }
        throw ValidationError("choose an MDP with --mdp or --instance");
    }

    InstanceDescriptor descriptor(double tau) const {
        if (!mdp_path.empty()) {
            return MdpFileInstance{mdp_path, std::make_shared<const TabularMdp>(load_mdp(mdp_path))};
        }
        if (kind == "cvar-hard") return cvar_params(tau);
        if (kind == "worst-path-hard") return worst_path_params();
        if (kind == "random") {
            return MdpFileInstance{"random", std::make_shared<const TabularMdp>(random_mdp(random_spec()))};
        }
        throw ValidationError("choose an MDP with --mdp or --instance");
    }
};

DeterministicPolicy parse_policy(const std::string& text) {
    DeterministicPolicy pi;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            std::size_t used = 0;
            const long long a = std::stoll(item, &used);
            if (used != item.size() || a < 0) throw std::invalid_argument(item);
            pi.action.push_back(static_cast<std::size_t>(a));
        } catch (const std::exception&) {
            throw ValidationError("policy must be a comma-separated list of action indices, got '" + text + "'");
        }
    }
    return pi;
}

void check_policy(const DeterministicPolicy& pi, const TabularMdp& mdp) {
    detail::require(pi.size() == mdp.num_states(), "policy must list one action per state");
    for (auto a : pi.action) detail::require(a < mdp.num_actions(), "policy action out of range");
}

std::string format_cell_summary(const CellResult& c) {
    std::ostringstream line;
    line << c.cell.instance_id << " tau=" << c.cell.tau << " gamma=" << c.cell.gamma << " n=" << c.cell.n
         << " seeds=" << c.aggregate.num_seeds << " errors=" << c.aggregate.num_errors
         << " median_gap=" << c.aggregate.median_gap << " mean_gap=" << c.aggregate.mean_gap;
    if (c.aggregate.success_rate) line << " success=" << *c.aggregate.success_rate;
    return line.str();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Iterated CVaR value iteration, worst-path variant, hard instances and sweeps"};
    app.require_subcommand(1, 1);

    double tau = 1.0;
    double tolerance = kDefaultTolerance;
    std::string mode_text;
    std::string out_path;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    std::string spec_path;
    std::size_t n = 1;
    std::optional<double> target_epsilon;
    bool random_phi = false;
    std::string policy_text;
    std::string trials_path;
    InstanceOptions inst;

    auto add_common = [&](CLI::App* cmd, bool with_tau, bool with_mode) {
        inst.add_flags(cmd);
        cmd->add_option("--out", out_path, "Write output here instead of stdout");
        if (with_tau) cmd->add_option("--tau", tau, "Risk level in (0, 1]")->capture_default_str();
        if (with_mode) {
            cmd->add_option("--mode", mode_text, "cvar | worst-path")->check(CLI::IsMember({"cvar", "worst-path"}));
        }
    };

    auto* solve = app.add_subcommand("solve", "Run ICVaR-VI (or worst-path VI) and print V, Q, policy");
    add_common(solve, true, true);
    solve->add_option("--tolerance", tolerance, "Certified-gap tolerance")->capture_default_str();

    auto* eval = app.add_subcommand("eval", "Evaluate a deterministic policy");
    add_common(eval, true, true);
    eval->add_option("--tolerance", tolerance, "Certified-gap tolerance")->capture_default_str();
    eval->add_option("--policy", policy_text, "Comma-separated action per state")->required();

    auto* gen = app.add_subcommand("gen-instance", "Emit a hard or random MDP as JSON");
    std::string gen_kind;
    gen->add_option("kind", gen_kind, "cvar-hard | worst-path-hard | random")
        ->required()
        ->check(CLI::IsMember({"cvar-hard", "worst-path-hard", "random"}));
    inst.add_generator_flags(gen);
    gen->add_option("--tau", tau, "Risk level (cvar-hard)")->capture_default_str();
    gen->add_option("--seed", inst.seed, "Seed (random)")->capture_default_str();
    gen->add_option("--out", out_path, "Write output here instead of stdout");

    auto* sample = app.add_subcommand("sample", "Draw n samples per pair and print the empirical model");
    add_common(sample, false, false);
    sample->add_option("--n", n, "Samples per state-action pair")->required();
    sample->add_option("--seed", seed, "Sampling seed")->capture_default_str();

    auto* trial = app.add_subcommand("trial", "Sample, learn, and score one trial under the true kernel");
    add_common(trial, true, true);
    trial->add_option("--n", n, "Samples per state-action pair")->required();
    trial->add_option("--seed", seed, "Trial seed")->capture_default_str();
    trial->add_option("--tolerance", tolerance, "Solver tolerance")->capture_default_str();
    trial->add_option("--target-epsilon", target_epsilon, "Target accuracy; caps tolerance at epsilon/100");
    trial->add_flag("--random-phi", random_phi, "Draw the better action from the seed");

    auto* sweep_cmd = app.add_subcommand("sweep", "Run a sweep spec and write CSVs and SVG");
    sweep_cmd->add_option("--spec", spec_path, "Sweep spec JSON")->required();
    sweep_cmd->add_option("--jobs", jobs, "Worker threads")->capture_default_str();

    auto* plot = app.add_subcommand("plot", "Rebuild the SVG chart from a trial CSV");
    plot->add_option("--trials", trials_path, "Trial CSV from a sweep")->required();
    plot->add_option("--target-epsilon", target_epsilon, "Target accuracy for success rates");
    plot->add_option("--out", out_path, "Write output here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("validation", e.what());
        return kExitValidation;
    }

    try {
        const auto mode = mode_text.empty() ? std::optional<TrialMode>{} : parse_trial_mode(mode_text);

        if (*solve) {
            const auto [mdp, meta] = inst.build(tau);
            const auto stop = StopRule::certified(tolerance);
            const bool worst = mode == TrialMode::WorstPath ||
                               (!mode && inst.kind == "worst-path-hard" && inst.mdp_path.empty());
            auto result = worst ? worst_path_vi(mdp, true_supports(mdp), stop)
                                : icvar_vi(mdp, RiskLevel(tau), stop);
            auto doc = solve_result_to_json(result);
            doc["mode"] = worst ? "worst-path" : "cvar";
            if (!worst) doc["tau"] = tau;
            emit(doc.dump(2) + "\n", out_path);
        } else if (*eval) {
            const auto [mdp, meta] = inst.build(tau);
            const auto pi = parse_policy(policy_text);
            check_policy(pi, mdp);
            const bool worst = mode == TrialMode::WorstPath;
            const auto v = worst ? policy_eval_worst_path(mdp, true_supports(mdp), pi, tolerance)
                                 : policy_eval_cvar(mdp, RiskLevel(tau), pi, tolerance);
            json doc{{"v", values_to_json(v)}, {"policy", policy_to_json(pi)}, {"mode", worst ? "worst-path" : "cvar"}};
            emit(doc.dump(2) + "\n", out_path);
        } else if (*gen) {
            inst.kind = gen_kind;
            const auto [mdp, meta] = inst.build(tau);
            auto doc = mdp_to_json(mdp);
            doc["meta"] = meta;
            emit(doc.dump(2) + "\n", out_path);
        } else if (*sample) {
            const auto [mdp, meta] = inst.build(tau);
            emit(empirical_model_to_json(sample_empirical_model(mdp, n, Seed{seed})).dump(2) + "\n", out_path);
        } else if (*trial) {
            TrialSpec spec;
            spec.instance = inst.descriptor(tau);
            spec.tau = tau;
            spec.n = n;
            spec.seed = Seed{seed};
            spec.solver_tolerance = tolerance;
            spec.target_epsilon = target_epsilon;
            spec.randomize_phi = random_phi;
            spec.mode = mode;
            emit(trial_result_to_json(run_trial(spec)).dump(2) + "\n", out_path);
        } else if (*sweep_cmd) {
            const auto spec = load_sweep_spec(spec_path);
            const auto result = sweep(spec, jobs);
            export_results(result, {spec.trial_csv, spec.aggregate_csv, spec.svg});
            bool wholly_failed = false;
            for (const auto& c : result.cells) {
                std::cout << format_cell_summary(c) << '\n';
                if (c.aggregate.num_seeds == 0) {
                    wholly_failed = true;
                    print_error("cell-failed", format_cell_summary(c) + ": " + c.errors.front());
                }
            }
            for (const auto& f : result.fits) {
                if (f.median_fit) {
                    std::cout << "fit " << f.instance_id << " tau=" << f.tau << " gamma=" << f.gamma
                              << " slope=" << f.median_fit->slope << " r2=" << f.median_fit->r2 << '\n';
                }
            }
            for (const auto& w : result.trend_warnings) std::cerr << "warning: " << w << '\n';
            if (wholly_failed) return kExitCellFailed;
        } else if (*plot) {
            const auto result = parse_trial_csv(read_text_file(trials_path), target_epsilon);
            emit(svg_chart(result), out_path);
        }
    } catch (const IoError& e) {
        print_error("io", e.what(), e.path());
        return kExitIo;
    } catch (const ValidationError& e) {
        print_error("validation", e.what());
        return kExitValidation;
    }
    return 0;
}
