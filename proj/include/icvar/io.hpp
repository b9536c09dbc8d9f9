#pragma once

// JSON interchange: the MDP document, empirical models, solve results and
// instance metadata.
//
// MDP document:
//   { "num_states": S, "num_actions": A, "discount": gamma,
//     "reward":     [[r(0,0), ...], ...],            // S x A
//     "transition": [[[P(0|0,0), ...], ...], ...],   // S x A x S
//     "meta": {...} }                                 // optional
//
// An empirical model adds "counts" (S x A x S integers), "n" and "seed".

#include "icvar/errors.hpp"
#include "icvar/generative.hpp"
#include "icvar/instances.hpp"
#include "icvar/mdp.hpp"
#include "icvar/solver.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace icvar {

using json = nlohmann::json;

namespace detail {

template <class T>
T field(const json& doc, const char* key) {
    if (!doc.is_object() || !doc.contains(key)) {
        throw ValidationError(std::string("missing field '") + key + "'");
    }
    try {
        return doc.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad field '") + key + "': " + e.what());
    }
}

} // namespace detail

inline json mdp_to_json(const TabularMdp& mdp) {
    const auto S = mdp.num_states();
    const auto A = mdp.num_actions();
    json reward = json::array();
    json transition = json::array();
    for (std::size_t s = 0; s < S; ++s) {
        json r_row = json::array();
        json p_block = json::array();
        for (std::size_t a = 0; a < A; ++a) {
            r_row.push_back(mdp.reward(s, a));
            auto row = mdp.row(s, a);
            p_block.push_back(std::vector<double>(row.begin(), row.end()));
        }
        reward.push_back(std::move(r_row));
        transition.push_back(std::move(p_block));
    }
    return json{{"num_states", S},
                {"num_actions", A},
                {"discount", mdp.discount()},
                {"reward", std::move(reward)},
                {"transition", std::move(transition)}};
}

/// Parses the MDP document. Shape problems raise ValidationError; value
/// problems (row sums, reward range) are left to validate_mdp().
inline TabularMdp mdp_from_json(const json& doc) {
    const auto S = detail::field<std::size_t>(doc, "num_states");
    const auto A = detail::field<std::size_t>(doc, "num_actions");
    const auto gamma = detail::field<double>(doc, "discount");
    const auto reward = detail::field<std::vector<std::vector<double>>>(doc, "reward");
    const auto transition = detail::field<std::vector<std::vector<std::vector<double>>>>(doc, "transition");

    detail::require(S > 0 && A > 0, "num_states and num_actions must be positive");
    detail::require(reward.size() == S, "reward must have num_states rows");
    detail::require(transition.size() == S, "transition must have num_states blocks");
    std::vector<double> r_flat;
    std::vector<double> p_flat;
    r_flat.reserve(S * A);
    p_flat.reserve(S * A * S);
    for (std::size_t s = 0; s < S; ++s) {
        detail::require(reward[s].size() == A, "reward row " + std::to_string(s) + " must have num_actions entries");
        detail::require(transition[s].size() == A,
                        "transition block " + std::to_string(s) + " must have num_actions rows");
        for (std::size_t a = 0; a < A; ++a) {
            r_flat.push_back(reward[s][a]);
            detail::require(transition[s][a].size() == S, "transition row (" + std::to_string(s) + "," +
                                                              std::to_string(a) + ") must have num_states entries");
            p_flat.insert(p_flat.end(), transition[s][a].begin(), transition[s][a].end());
        }
    }
    return {S, A, std::move(p_flat), std::move(r_flat), gamma};
}

inline json parse_json_text(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("malformed JSON: ") + e.what());
    }
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file for reading", path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) throw IoError("failed reading file", path);
    return buffer.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open file for writing", path);
    out << text;
    out.flush();
    if (!out) throw IoError("failed writing file", path);
}

inline json load_json(const std::string& path) { return parse_json_text(read_text_file(path)); }

inline TabularMdp load_mdp(const std::string& path) { return mdp_from_json(load_json(path)); }

inline json empirical_model_to_json(const EmpiricalModel& model) {
    json doc = mdp_to_json(model.kernel());
    const auto S = model.num_states();
    const auto A = model.num_actions();
    json counts = json::array();
    for (std::size_t s = 0; s < S; ++s) {
        json block = json::array();
        for (std::size_t a = 0; a < A; ++a) {
            auto c = model.counts(s, a);
            block.push_back(std::vector<std::uint64_t>(c.begin(), c.end()));
        }
        counts.push_back(std::move(block));
    }
    doc["counts"] = std::move(counts);
    doc["n"] = model.samples_per_pair();
    doc["seed"] = model.seed().value;
    return doc;
}

/// Rebuilds the model from counts; the stored transition is recomputed.
inline EmpiricalModel empirical_model_from_json(const json& doc) {
    const TabularMdp source = mdp_from_json(doc);
    const auto n = detail::field<std::size_t>(doc, "n");
    const auto seed = detail::field<std::uint64_t>(doc, "seed");
    const auto counts = detail::field<std::vector<std::vector<std::vector<std::uint64_t>>>>(doc, "counts");
    const auto S = source.num_states();
    const auto A = source.num_actions();
    detail::require(counts.size() == S, "counts must have num_states blocks");
    std::vector<std::uint64_t> flat;
    flat.reserve(S * A * S);
    for (const auto& block : counts) {
        detail::require(block.size() == A, "counts block must have num_actions rows");
        for (const auto& row : block) {
            detail::require(row.size() == S, "counts row must have num_states entries");
            flat.insert(flat.end(), row.begin(), row.end());
        }
    }
    return {source, std::move(flat), n, Seed{seed}};
}

inline json policy_to_json(const DeterministicPolicy& pi) { return json(pi.action); }

inline json values_to_json(const ValueVector& v) { return json(v.values); }

inline json q_to_json(const QTable& q) {
    json rows = json::array();
    for (std::size_t s = 0; s < q.num_states(); ++s) {
        auto r = q.row(s);
        rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    return rows;
}

inline json solve_result_to_json(const SolveResult& r) {
    return json{{"v", values_to_json(r.v)},
                {"q", q_to_json(r.q)},
                {"policy", policy_to_json(r.policy)},
                {"iterations", r.iterations},
                {"final_residual", r.final_residual},
                {"certified_gap", r.certified_gap}};
}

inline json cvar_hard_meta(const CvarHardParams& params) {
    const auto d = derive_cvar_hard(params);
    return json{{"kind", "cvar-hard"},
                {"tau", params.tau},
                {"gamma", params.gamma},
                {"epsilon", params.epsilon},
                {"c", params.c},
                {"phi", params.phi},
                {"num_states", params.num_states},
                {"num_actions", params.num_actions},
                {"p", d.p},
                {"q", d.q},
                {"delta", d.delta},
                {"p_low", d.p_low},
                {"q_low", d.q_low},
                {"initial_state", 0},
                {"optimal_value_state0", cvar_hard_value(params, 1.0)},
                {"action_layout", "all states have num_actions actions; actions >= 2 at state 0 copy action 1-phi"}};
}

inline json worst_path_meta(const WorstPathHardParams& params) {
    return json{{"kind", "worst-path-hard"},
                {"p_min", params.p_min},
                {"gamma", params.gamma},
                {"phi", params.phi},
                {"num_states", params.num_states},
                {"num_actions", params.num_actions},
                {"initial_state", 0},
                {"optimal_value_state0", params.gamma / (1.0 - params.gamma)},
                {"action_layout", "all states have num_actions actions; actions >= 2 at state 0 copy action 1-phi"}};
}

inline json random_meta(const RandomMdpSpec& spec) {
    return json{{"kind", "random"},
                {"num_states", spec.num_states},
                {"num_actions", spec.num_actions},
                {"sparsity", spec.sparsity},
                {"reward_density", spec.reward_density},
                {"min_probability", spec.min_probability},
                {"gamma", spec.gamma},
                {"seed", spec.seed.value}};
}

} // namespace icvar
