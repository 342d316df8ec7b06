#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "pmr/annotations.hpp"
#include "pmr/nn.hpp"

namespace pmr {

// Temporal intersection-over-union of two closed intervals in seconds.
inline double tiou(double a_start, double a_end, double b_start, double b_end) {
    if (!(a_start < a_end) || !(b_start < b_end))
        throw std::invalid_argument("tiou: degenerate interval");
    const double inter = std::min(a_end, b_end) - std::max(a_start, b_start);
    if (inter <= 0.0) return 0.0;
    const double uni = std::max(a_end, b_end) - std::min(a_start, b_start);
    return inter / uni;
}

// Binary training targets for one video: start/end vectors (length T) and
// the D x T duration map with D = T.
struct LabelSet {
    std::vector<int> starts;  // L^S
    std::vector<int> ends;    // L^E
    Matrix durations;         // L^A, row d-1 = duration d snippets
};

// Nearest-snippet-center boundary snap; lowest index wins exact ties.
inline void gen_boundary_labels(const VideoAnnotation& ann, std::size_t t_count,
                                std::vector<int>& starts, std::vector<int>& ends) {
    starts.assign(t_count, 0);
    ends.assign(t_count, 0);
    const double delta = ann.duration_s / static_cast<double>(t_count);
    auto nearest = [&](double time) {
        std::size_t best = 0;
        double best_dist = std::abs((0.5) * delta - time);
        for (std::size_t i = 1; i < t_count; ++i) {
            const double dist = std::abs((static_cast<double>(i) + 0.5) * delta - time);
            if (dist < best_dist) {
                best = i;
                best_dist = dist;
            }
        }
        return best;
    };
    for (const auto& [s, e] : ann.actions) {
        starts[nearest(s)] = 1;
        ends[nearest(e)] = 1;
    }
}

// Valid cells of the (duration d in 1..T, start index i in 0..T-1) grid
// satisfy i + d <= T; cell (d, i) spans [i*delta, (i+d)*delta] seconds.
inline bool duration_cell_valid(std::size_t d, std::size_t i, std::size_t t_count) {
    return d >= 1 && d <= t_count && i + d <= t_count;
}

// For each ground-truth action, cells whose tIoU against it is positive
// and a local maximum over the 4-neighborhood (ties count) get label 1.
inline Matrix gen_duration_labels(const VideoAnnotation& ann, std::size_t t_count) {
    const double delta = ann.duration_s / static_cast<double>(t_count);
    Matrix labels(t_count, t_count);
    for (const auto& [gs, ge] : ann.actions) {
        Matrix iou(t_count, t_count);
        for (std::size_t d = 1; d <= t_count; ++d)
            for (std::size_t i = 0; i + d <= t_count; ++i)
                iou.at(d - 1, i) = tiou(static_cast<double>(i) * delta,
                                        static_cast<double>(i + d) * delta, gs, ge);
        for (std::size_t d = 1; d <= t_count; ++d)
            for (std::size_t i = 0; i + d <= t_count; ++i) {
                const double v = iou.at(d - 1, i);
                if (v <= 0.0) continue;
                bool is_max = true;
                const long dd = static_cast<long>(d), ii = static_cast<long>(i);
                const long offsets[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
                for (const auto& off : offsets) {
                    const long nd = dd + off[0], ni = ii + off[1];
                    if (nd < 1 || ni < 0) continue;
                    if (!duration_cell_valid(static_cast<std::size_t>(nd),
                                             static_cast<std::size_t>(ni), t_count))
                        continue;
                    if (iou.at(static_cast<std::size_t>(nd - 1), static_cast<std::size_t>(ni)) > v)
                        is_max = false;
                }
                if (is_max) labels.at(d - 1, i) = 1.0;
            }
    }
    return labels;
}

inline LabelSet gen_labels(const VideoAnnotation& ann, std::size_t t_count) {
    LabelSet ls;
    gen_boundary_labels(ann, t_count, ls.starts, ls.ends);
    ls.durations = gen_duration_labels(ann, t_count);
    return ls;
}

// Mask of valid duration cells (1 on valid, 0 on the invalid triangle).
inline Matrix duration_valid_mask(std::size_t t_count) {
    Matrix m(t_count, t_count);
    for (std::size_t d = 1; d <= t_count; ++d)
        for (std::size_t i = 0; i + d <= t_count; ++i) m.at(d - 1, i) = 1.0;
    return m;
}

// Simplified boundary-matching head: learned positional encodings, one
// self-attention layer for temporal context, a shared boundary MLP
// (d -> h -> 2, sigmoid) and a proposal MLP over pooled interval context
// concatenated with the endpoint features (3d -> h -> 1, sigmoid).
struct HeadSpec {
    std::size_t d_model = 32;
    std::size_t t_count = 32;
    std::size_t hidden = 32;

    AttentionSpec context;
    MlpSpec boundary;
    MlpSpec proposal;

    static HeadSpec make(std::size_t d_model, std::size_t t_count, std::size_t hidden = 32) {
        HeadSpec s;
        s.d_model = d_model;
        s.t_count = t_count;
        s.hidden = hidden;
        s.context = {"head.context", d_model};
        s.boundary = {"head.boundary", {d_model, hidden, 2}};
        s.proposal = {"head.proposal", {3 * d_model, hidden, 1}};
        return s;
    }

    void init(ParamStore& params, Rng& rng) const {
        context.init(params, rng);
        boundary.init(params, rng);
        proposal.init(params, rng);
        params.add_weight("head.pos", t_count, d_model, rng);
    }
};

struct HeadOutput {
    ad::Var p_start;     // T x 1
    ad::Var p_end;       // T x 1
    ad::Var p_action;    // T x T (row d-1, col i); invalid cells are 0
};

inline HeadOutput head_forward(ad::Tape& t, const ParamStore& params, const HeadSpec& spec,
                               ad::Var features) {
    const Matrix& f = t.value(features);
    check_shape(f.rows >= 2, "head_forward: need T >= 2");
    check_shape(f.rows == spec.t_count && f.cols == spec.d_model, "head_forward feature shape");
    const std::size_t tc = f.rows;

    const ad::Var pos = t.param("head.pos", params.at("head.pos"));
    const ad::Var ctx = self_attention(t, params, spec.context, t.add(features, pos));

    const ad::Var boundary = t.sigmoid(mlp_forward(t, params, spec.boundary, ctx));  // T x 2
    auto column = [&](std::size_t which) {  // T x 2 -> T x 1
        Matrix sel(2, 1);
        sel.at(which, 0) = 1.0;
        return t.matmul(boundary, t.constant(sel));
    };
    HeadOutput out{column(0), column(1), 0};

    // Proposal branch over all valid (d, i) cells, batched as rows.
    std::vector<ad::Var> cell_rows;
    std::vector<std::pair<std::size_t, std::size_t>> cell_pos;
    for (std::size_t d = 1; d <= tc; ++d)
        for (std::size_t i = 0; i + d <= tc; ++i) {
            const ad::Var pooled = t.mean_rows_range(ctx, i, i + d);
            const ad::Var first = t.take_rows(ctx, {i});
            const ad::Var last = t.take_rows(ctx, {i + d - 1});
            cell_rows.push_back(t.concat_cols({pooled, first, last}));
            cell_pos.emplace_back(d - 1, i);
        }
    const ad::Var cells = t.concat_rows(cell_rows);
    const ad::Var scores = t.sigmoid(mlp_forward(t, params, spec.proposal, cells));  // n x 1
    out.p_action = t.scatter_to_matrix(scores, cell_pos, tc, tc);
    return out;
}

struct HeadMaps {
    std::vector<double> p_start, p_end;
    Matrix p_action;
};

inline HeadMaps head_forward(const ParamStore& params, const HeadSpec& spec, const Matrix& features) {
    ad::Tape t;
    const HeadOutput out = head_forward(t, params, spec, t.constant(features));
    return HeadMaps{t.value(out.p_start).data, t.value(out.p_end).data, t.value(out.p_action)};
}

struct Proposal {
    double t_start_s = 0.0;
    double t_end_s = 0.0;
    double p_start = 0.0;
    double p_end = 0.0;
    double p_action = 0.0;
    double score = 0.0;
};

struct ProposalSet {
    std::string video_id;
    std::vector<Proposal> proposals;
};

// Gaussian-decay soft NMS. Keeps picking the highest-scoring remaining
// proposal (lowest start time breaks ties) and decays the rest by
// exp(-tIoU^2 / sigma); proposals falling below score_floor are dropped.
inline ProposalSet soft_nms(ProposalSet set, double sigma = 0.5, double score_floor = 1e-4) {
    std::vector<Proposal> pending = std::move(set.proposals);
    std::vector<Proposal> kept;
    while (!pending.empty()) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < pending.size(); ++i) {
            if (pending[i].score > pending[best].score ||
                (pending[i].score == pending[best].score &&
                 pending[i].t_start_s < pending[best].t_start_s))
                best = i;
        }
        Proposal top = pending[best];
        pending.erase(pending.begin() + static_cast<long>(best));
        kept.push_back(top);
        std::vector<Proposal> next;
        next.reserve(pending.size());
        for (Proposal& p : pending) {
            const double overlap = tiou(top.t_start_s, top.t_end_s, p.t_start_s, p.t_end_s);
            p.score *= std::exp(-(overlap * overlap) / sigma);
            if (p.score >= score_floor) next.push_back(p);
        }
        pending = std::move(next);
    }
    set.proposals = std::move(kept);
    return set;
}

// Every valid cell becomes a candidate scored P_S[i] * P_E[i+d-1] *
// P_A[d-1, i], then soft-NMS and truncation to max_per_video.
inline ProposalSet extract_proposals(const HeadMaps& maps, const std::string& video_id,
                                     double duration_s, std::size_t max_per_video,
                                     double nms_sigma = 0.5, double score_floor = 1e-4) {
    const std::size_t tc = maps.p_start.size();
    const double delta = duration_s / static_cast<double>(tc);
    ProposalSet set;
    set.video_id = video_id;
    for (std::size_t d = 1; d <= tc; ++d)
        for (std::size_t i = 0; i + d <= tc; ++i) {
            Proposal p;
            p.t_start_s = static_cast<double>(i) * delta;
            p.t_end_s = static_cast<double>(i + d) * delta;
            p.p_start = maps.p_start[i];
            p.p_end = maps.p_end[i + d - 1];
            p.p_action = maps.p_action.at(d - 1, i);
            p.score = p.p_start * p.p_end * p.p_action;
            set.proposals.push_back(p);
        }
    set = soft_nms(std::move(set), nms_sigma, score_floor);
    if (set.proposals.size() > max_per_video) set.proposals.resize(max_per_video);
    return set;
}

}  // namespace pmr
