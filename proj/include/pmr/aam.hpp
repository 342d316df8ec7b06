#pragma once

#include <cstddef>
#include <vector>

#include "pmr/nn.hpp"
#include "pmr/params.hpp"
#include "pmr/tape.hpp"

namespace pmr {

// Adaptive attention over candidate entities: score each entity against
// the environment, hard-select those whose normalized score exceeds 1/M,
// fuse the survivors with self-attention and mean pooling.
struct AamOutcome {
    std::vector<double> scores;        // softmax-normalized, sums to 1
    std::vector<std::size_t> selected; // indices of survivors
    bool fallback = false;             // set when the strict selection was empty
    Matrix fused;                      // 1 x d
};

struct AamSpec {
    MlpSpec entity_mlp;      // theta_a
    MlpSpec env_mlp;         // theta_e
    AttentionSpec attention; // fusion over survivors

    void init(ParamStore& params, Rng& rng) const {
        entity_mlp.init(params, rng);
        env_mlp.init(params, rng);
        attention.init(params, rng);
    }
};

// h_i = || MLP_a(f_i) + MLP_e(f_env) ||_2, normalized with softmax.
inline ad::Var aam_scores(ad::Tape& t, const ParamStore& params, const AamSpec& spec,
                          ad::Var entity_feats, ad::Var env_feat) {
    check_shape(t.value(entity_feats).rows >= 1, "aam_scores needs at least one entity");
    const ad::Var projected_entities = mlp_forward(t, params, spec.entity_mlp, entity_feats);
    const ad::Var projected_env = mlp_forward(t, params, spec.env_mlp, env_feat);
    // Broadcast the single env row over all M entity rows.
    const std::size_t m = t.value(entity_feats).rows;
    const ad::Var env_rows = t.take_rows(projected_env, std::vector<std::size_t>(m, 0));
    const ad::Var h = t.rows_l2norm(t.add(projected_entities, env_rows));
    return t.softmax_flat(h);  // M x 1
}

inline std::vector<double> aam_scores(const ParamStore& params, const AamSpec& spec,
                                      const Matrix& entity_feats, const Matrix& env_feat) {
    ad::Tape t;
    return t.value(aam_scores(t, params, spec, t.constant(entity_feats), t.constant(env_feat))).data;
}

// Strict threshold tau = 1/M. An all-tied (uniform) score vector selects
// nothing under the strict inequality; the fallback keeps the argmax
// (lowest index on ties) and reports it via the flag.
inline std::vector<std::size_t> aam_select(const std::vector<double>& scores, bool* fallback = nullptr) {
    const double tau = 1.0 / static_cast<double>(scores.size());
    std::vector<std::size_t> selected;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (scores[i] > tau) selected.push_back(i);
    if (fallback) *fallback = false;
    if (selected.empty()) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < scores.size(); ++i)
            if (scores[i] > scores[best]) best = i;
        selected.push_back(best);
        if (fallback) *fallback = true;
    }
    return selected;
}

// Fuse the selected entities. The hard selection mask is treated as a
// constant; gradients reach the scoring MLPs through soft weights: each
// survivor row is scaled by its score renormalized over the survivor set
// (scale 1 when survivor scores are equal, so inference values match the
// plain fuse of Algorithm 1 in the symmetric cases).
inline ad::Var aam_fuse(ad::Tape& t, const ParamStore& params, const AamSpec& spec,
                        ad::Var entity_feats, ad::Var scores,
                        const std::vector<std::size_t>& selected) {
    check_shape(!selected.empty(), "aam_fuse: empty selection");
    const ad::Var rows = t.take_rows(entity_feats, selected);
    const ad::Var sel_scores = t.take_rows(scores, selected);
    const std::size_t n = selected.size();
    // weights = n * s_i / sum(s) over the survivor set; sum is strictly
    // positive since scores come out of a softmax.
    const ad::Var sum = t.sum_all(sel_scores);
    const ad::Var sum_rows = t.take_rows(sum, std::vector<std::size_t>(n, 0));
    const ad::Var weights = t.div(t.scale(sel_scores, static_cast<double>(n)), sum_rows);
    const ad::Var weighted = t.row_scale(rows, weights);
    const ad::Var fused = self_attention(t, params, spec.attention, weighted);
    return t.mean_rows(fused);
}

inline AamOutcome aam_apply(const ParamStore& params, const AamSpec& spec,
                            const Matrix& entity_feats, const Matrix& env_feat) {
    ad::Tape t;
    const ad::Var scores = aam_scores(t, params, spec, t.constant(entity_feats), t.constant(env_feat));
    AamOutcome out;
    out.scores = t.value(scores).data;
    out.selected = aam_select(out.scores, &out.fallback);
    out.fused = t.value(aam_fuse(t, params, spec, t.constant(entity_feats), scores, out.selected));
    return out;
}

}  // namespace pmr
