#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "pmr/aam.hpp"
#include "pmr/synthetic.hpp"

namespace pmr {

// Channel-wise spatial mean of the environment map -> 1 x C.
inline Matrix environment_beholder(const SnippetBundle& bundle) {
    check_shape(bundle.height >= 1 && bundle.width >= 1, "environment_beholder spatial dims");
    Matrix f(1, bundle.channels);
    const double inv = 1.0 / static_cast<double>(bundle.height * bundle.width);
    for (std::size_t c = 0; c < bundle.channels; ++c) {
        double s = 0.0;
        for (std::size_t y = 0; y < bundle.height; ++y)
            for (std::size_t x = 0; x < bundle.width; ++x) s += bundle.env_at(c, y, x);
        f.at(0, c) = s * inv;
    }
    return f;
}

namespace detail {

// Bilinear sample at continuous pixel coordinates; pixel (ix, iy) has its
// center at (ix + 0.5, iy + 0.5). Coordinates are border-clamped.
inline double bilinear_sample(const SnippetBundle& bundle, std::size_t c, double x, double y) {
    const double w = static_cast<double>(bundle.width);
    const double h = static_cast<double>(bundle.height);
    double u = std::min(std::max(x - 0.5, 0.0), w - 1.0);
    double v = std::min(std::max(y - 0.5, 0.0), h - 1.0);
    const auto u0 = static_cast<std::size_t>(u);
    const auto v0 = static_cast<std::size_t>(v);
    const std::size_t u1 = std::min(u0 + 1, bundle.width - 1);
    const std::size_t v1 = std::min(v0 + 1, bundle.height - 1);
    const double du = u - static_cast<double>(u0);
    const double dv = v - static_cast<double>(v0);
    return (1.0 - dv) * ((1.0 - du) * bundle.env_at(c, v0, u0) + du * bundle.env_at(c, v0, u1)) +
           dv * ((1.0 - du) * bundle.env_at(c, v1, u0) + du * bundle.env_at(c, v1, u1));
}

}  // namespace detail

// RoIAlign with one bilinear sample per bin center, mean-pooled over the
// P x P bins -> 1 x C.
inline Matrix roi_align(const SnippetBundle& bundle, const Box& box, std::size_t bins) {
    if (!(box.x1 < box.x2 && box.y1 < box.y2))
        throw std::invalid_argument("roi_align: degenerate box");
    const double px1 = box.x1 * static_cast<double>(bundle.width);
    const double px2 = box.x2 * static_cast<double>(bundle.width);
    const double py1 = box.y1 * static_cast<double>(bundle.height);
    const double py2 = box.y2 * static_cast<double>(bundle.height);
    const double bw = (px2 - px1) / static_cast<double>(bins);
    const double bh = (py2 - py1) / static_cast<double>(bins);
    Matrix f(1, bundle.channels);
    for (std::size_t c = 0; c < bundle.channels; ++c) {
        double s = 0.0;
        for (std::size_t by = 0; by < bins; ++by)
            for (std::size_t bx = 0; bx < bins; ++bx)
                s += detail::bilinear_sample(bundle, c,
                                             px1 + (static_cast<double>(bx) + 0.5) * bw,
                                             py1 + (static_cast<double>(by) + 0.5) * bh);
        f.at(0, c) = s / static_cast<double>(bins * bins);
    }
    return f;
}

// All trainable pieces of the snippet encoder.
struct BeholderSpec {
    std::size_t d_model = 32;
    std::size_t channels = 8;  // C
    std::size_t embed = 16;    // E
    std::size_t top_k = 10;    // object candidates
    std::size_t roi_bins = 2;  // P

    MlpSpec env_proj;    // C -> d
    MlpSpec actor_proj;  // C -> d
    MlpSpec object_proj; // E -> d
    AamSpec actor_aam;
    AamSpec object_aam;
    AttentionSpec aoe_attention;

    static BeholderSpec make(std::size_t d_model, std::size_t channels, std::size_t embed,
                             std::size_t top_k = 10, std::size_t roi_bins = 2) {
        BeholderSpec s;
        s.d_model = d_model;
        s.channels = channels;
        s.embed = embed;
        s.top_k = top_k;
        s.roi_bins = roi_bins;
        s.env_proj = {"beholder.env_proj", {channels, d_model}};
        s.actor_proj = {"beholder.actor_proj", {channels, d_model}};
        s.object_proj = {"beholder.object_proj", {embed, d_model}};
        s.actor_aam = {{"beholder.actor_aam.entity", {d_model, d_model}},
                       {"beholder.actor_aam.env", {d_model, d_model}},
                       {"beholder.actor_aam.attn", d_model}};
        s.object_aam = {{"beholder.object_aam.entity", {d_model, d_model}},
                        {"beholder.object_aam.env", {d_model, d_model}},
                        {"beholder.object_aam.attn", d_model}};
        s.aoe_attention = {"beholder.aoe.attn", d_model};
        return s;
    }

    void init(ParamStore& params, Rng& rng) const {
        env_proj.init(params, rng);
        actor_proj.init(params, rng);
        object_proj.init(params, rng);
        actor_aam.init(params, rng);
        object_aam.init(params, rng);
        aoe_attention.init(params, rng);
        params.add_weight("beholder.no_actor", 1, d_model, rng);
    }
};

// Selected actor indices and vocabulary words for one snippet.
struct SnippetProvenance {
    std::vector<std::size_t> actor_indices;
    std::vector<std::size_t> word_indices;
};

// Top-K vocabulary rows by cosine similarity to frame_embed; ties break
// toward the lower vocabulary index.
inline std::vector<std::size_t> top_k_words(const Matrix& frame_embed, const Vocabulary& vocab,
                                            std::size_t k) {
    check_shape(k >= 1 && k <= vocab.embeddings.rows, "top_k_words: K out of range");
    std::vector<std::pair<double, std::size_t>> sims;
    sims.reserve(vocab.embeddings.rows);
    for (std::size_t i = 0; i < vocab.embeddings.rows; ++i) {
        Matrix row(1, vocab.embeddings.cols);
        for (std::size_t j = 0; j < row.cols; ++j) row.at(0, j) = vocab.embeddings.at(i, j);
        sims.emplace_back(cosine_similarity(frame_embed, row), i);
    }
    std::stable_sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<std::size_t> idx(k);
    for (std::size_t i = 0; i < k; ++i) idx[i] = sims[i].second;
    return idx;
}

// f_act: RoIAlign each box, project to d_model, AAM against the projected
// environment. Zero boxes -> the learned no-actor embedding.
inline ad::Var actors_beholder(ad::Tape& t, const ParamStore& params, const BeholderSpec& spec,
                               const SnippetBundle& bundle, ad::Var env_proj,
                               SnippetProvenance* prov = nullptr) {
    if (bundle.actor_boxes.empty()) {
        if (prov) prov->actor_indices.clear();
        return t.param("beholder.no_actor", params.at("beholder.no_actor"));
    }
    Matrix feats(bundle.actor_boxes.size(), bundle.channels);
    for (std::size_t i = 0; i < bundle.actor_boxes.size(); ++i) {
        const Matrix f = roi_align(bundle, bundle.actor_boxes[i], spec.roi_bins);
        for (std::size_t j = 0; j < bundle.channels; ++j) feats.at(i, j) = f.at(0, j);
    }
    const ad::Var projected = mlp_forward(t, params, spec.actor_proj, t.constant(feats));
    const ad::Var scores = aam_scores(t, params, spec.actor_aam, projected, env_proj);
    const auto selected = aam_select(t.value(scores).data);
    if (prov) prov->actor_indices = selected;
    return aam_fuse(t, params, spec.actor_aam, projected, scores, selected);
}

// f_obj: top-K vocabulary candidates by cosine similarity, projected to
// d_model, AAM against the projected environment.
inline ad::Var objects_beholder(ad::Tape& t, const ParamStore& params, const BeholderSpec& spec,
                                const Matrix& frame_embed, const Vocabulary& vocab,
                                ad::Var env_proj, SnippetProvenance* prov = nullptr) {
    const auto idx = top_k_words(frame_embed, vocab, spec.top_k);
    if (prov) prov->word_indices = idx;
    Matrix cand(idx.size(), vocab.embeddings.cols);
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < cand.cols; ++j) cand.at(i, j) = vocab.embeddings.at(idx[i], j);
    const ad::Var projected = mlp_forward(t, params, spec.object_proj, t.constant(cand));
    const ad::Var scores = aam_scores(t, params, spec.object_aam, projected, env_proj);
    const auto selected = aam_select(t.value(scores).data);
    return aam_fuse(t, params, spec.object_aam, projected, scores, selected);
}

// f_i: self-attention over the stacked [f_act; f_obj; f_env] tokens, mean
// pooled.
inline ad::Var aoe_beholder(ad::Tape& t, const ParamStore& params, const BeholderSpec& spec,
                            ad::Var f_act, ad::Var f_obj, ad::Var f_env_proj) {
    const ad::Var stacked = t.concat_rows({f_act, f_obj, f_env_proj});
    return t.mean_rows(self_attention(t, params, spec.aoe_attention, stacked));
}

inline ad::Var encode_snippet(ad::Tape& t, const ParamStore& params, const BeholderSpec& spec,
                              const SnippetBundle& bundle, const Vocabulary& vocab,
                              SnippetProvenance* prov = nullptr) {
    const ad::Var env_proj =
        mlp_forward(t, params, spec.env_proj, t.constant(environment_beholder(bundle)));
    const ad::Var f_act = actors_beholder(t, params, spec, bundle, env_proj, prov);
    const ad::Var f_obj = objects_beholder(t, params, spec, bundle.frame_embed, vocab, env_proj, prov);
    return aoe_beholder(t, params, spec, f_act, f_obj, env_proj);
}

// The full snippet feature sequence F = {f_i}: T x d_model.
inline ad::Var encode_video(ad::Tape& t, const ParamStore& params, const BeholderSpec& spec,
                            const std::vector<SnippetBundle>& bundles, const Vocabulary& vocab) {
    check_shape(!bundles.empty(), "encode_video: empty video");
    std::vector<ad::Var> rows;
    rows.reserve(bundles.size());
    for (const SnippetBundle& b : bundles) rows.push_back(encode_snippet(t, params, spec, b, vocab));
    return t.concat_rows(rows);
}

inline Matrix encode_video(const ParamStore& params, const BeholderSpec& spec,
                           const std::vector<SnippetBundle>& bundles, const Vocabulary& vocab) {
    ad::Tape t;
    return t.value(encode_video(t, params, spec, bundles, vocab));
}

}  // namespace pmr
