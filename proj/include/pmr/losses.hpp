#pragma once

#include <cmath>
#include <cstddef>
#include <set>
#include <vector>

#include "pmr/tape.hpp"

namespace pmr {

constexpr double kProbClamp = 1e-7;     // probabilities entering logs
constexpr double kCaptionClamp = 1e-9;  // caption distribution entries

// Weighted binary log-likelihood, negated so minimization is correct:
//   loss = -sum_i [ (L_i/N+) log P_i + ((1-L_i)/N-) log(1-P_i) ]
// over entries where mask is nonzero. A class with zero members gets
// weight 0 instead of a division by zero.
inline ad::Var l_wb(ad::Tape& t, ad::Var predictions, const Matrix& labels,
                    const Matrix* mask = nullptr) {
    const Matrix& p = t.value(predictions);
    check_shape(p.same_shape(labels), "l_wb shapes");
    if (mask) check_shape(p.same_shape(*mask), "l_wb mask shape");

    double n_pos = 0.0, n_neg = 0.0;
    for (std::size_t i = 0; i < labels.data.size(); ++i) {
        if (mask && mask->data[i] == 0.0) continue;
        (labels.data[i] != 0.0 ? n_pos : n_neg) += 1.0;
    }
    Matrix w_pos(p.rows, p.cols), w_neg(p.rows, p.cols);
    for (std::size_t i = 0; i < labels.data.size(); ++i) {
        if (mask && mask->data[i] == 0.0) continue;
        if (labels.data[i] != 0.0) {
            if (n_pos > 0.0) w_pos.data[i] = 1.0 / n_pos;
        } else {
            if (n_neg > 0.0) w_neg.data[i] = 1.0 / n_neg;
        }
    }
    const ad::Var clamped = t.clamp(predictions, kProbClamp, 1.0 - kProbClamp);
    const ad::Var pos_term = t.sum_all(t.cmul(t.log(clamped), std::move(w_pos)));
    const ad::Var neg_term =
        t.sum_all(t.cmul(t.log(t.affine(clamped, -1.0, 1.0)), std::move(w_neg)));
    return t.scale(t.add(pos_term, neg_term), -1.0);
}

inline double l_wb(const std::vector<double>& predictions, const std::vector<int>& labels) {
    check_shape(predictions.size() == labels.size(), "l_wb lengths");
    ad::Tape t;
    Matrix p(1, predictions.size(), std::vector<double>(predictions.begin(), predictions.end()));
    Matrix l(1, labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) l.data[i] = labels[i];
    return t.value(l_wb(t, t.constant(std::move(p)), l)).at(0, 0);
}

// L_act = L_wb + lambda * MSE, both restricted to valid cells; lambda=10.
inline ad::Var l_act(ad::Tape& t, ad::Var p_action, const Matrix& labels, const Matrix& valid_mask,
                     double lambda = 10.0) {
    const ad::Var wb = l_wb(t, p_action, labels, &valid_mask);
    double n_valid = 0.0;
    for (double d : valid_mask.data) n_valid += (d != 0.0) ? 1.0 : 0.0;
    const ad::Var diff = t.sub(p_action, t.constant(labels));
    const ad::Var sq = t.mul(diff, diff);
    const ad::Var mse = t.scale(t.sum_all(t.cmul(sq, valid_mask)), 1.0 / n_valid);
    return t.add(wb, t.scale(mse, lambda));
}

inline double l_act(const Matrix& p_action, const Matrix& labels, const Matrix& valid_mask,
                    double lambda = 10.0) {
    ad::Tape t;
    return t.value(l_act(t, t.constant(p_action), labels, valid_mask, lambda)).at(0, 0);
}

// Reference token ids plus the per-step predicted distributions over the
// vocabulary (rows sum to 1).
struct CaptionBatch {
    std::vector<std::size_t> token_ids;
    Matrix step_distributions;  // n x V

    void validate() const {
        check_shape(token_ids.size() == step_distributions.rows, "CaptionBatch rows");
        for (std::size_t t = 0; t < token_ids.size(); ++t)
            check_shape(token_ids[t] < step_distributions.cols, "CaptionBatch token id");
        for (std::size_t i = 0; i < step_distributions.rows; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < step_distributions.cols; ++j) {
                const double p = step_distributions.at(i, j);
                if (p < 0.0) throw std::invalid_argument("CaptionBatch: negative probability");
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-9)
                throw std::invalid_argument("CaptionBatch: row does not sum to 1");
        }
    }
};

// tau(C) = -(1/|C|) sum_i sum_{c in distinct tokens of C_{<i}}
//          log(1 - p_theta(c at step i)), probabilities clamped away from 1.
inline ad::Var repetition_penalty(ad::Tape& t, ad::Var distributions,
                                  const std::vector<std::size_t>& token_ids) {
    const Matrix& p = t.value(distributions);
    const std::size_t n = token_ids.size();
    Matrix prefix_mask(p.rows, p.cols);
    std::set<std::size_t> seen;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c : seen) prefix_mask.at(i, c) = 1.0;
        seen.insert(token_ids[i]);
    }
    const ad::Var one_minus = t.clamp(t.affine(distributions, -1.0, 1.0), kCaptionClamp, 1.0);
    const ad::Var sum = t.sum_all(t.cmul(t.log(one_minus), std::move(prefix_mask)));
    return t.scale(sum, -1.0 / static_cast<double>(n));
}

inline double repetition_penalty(const CaptionBatch& batch) {
    batch.validate();
    ad::Tape t;
    return t.value(repetition_penalty(t, t.constant(batch.step_distributions), batch.token_ids))
        .at(0, 0);
}

struct CaptionLossResult {
    double loss = 0.0;
    std::size_t clamp_warnings = 0;  // reference tokens with ~zero probability
};

// Mean NLL of the reference tokens plus lambda * repetition penalty;
// lambda = 0.1.
inline ad::Var caption_loss(ad::Tape& t, ad::Var distributions,
                            const std::vector<std::size_t>& token_ids, double lambda = 0.1,
                            std::size_t* clamp_warnings = nullptr) {
    const Matrix& p = t.value(distributions);
    const std::size_t n = token_ids.size();
    check_shape(n == p.rows, "caption_loss rows");
    Matrix ref_mask(p.rows, p.cols);
    std::size_t warnings = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ref_mask.at(i, token_ids[i]) = 1.0;
        if (p.at(i, token_ids[i]) < kCaptionClamp) ++warnings;
    }
    if (clamp_warnings) *clamp_warnings = warnings;
    const ad::Var clamped = t.clamp(distributions, kCaptionClamp, 1.0);
    const ad::Var nll = t.scale(t.sum_all(t.cmul(t.log(clamped), std::move(ref_mask))),
                                -1.0 / static_cast<double>(n));
    if (lambda == 0.0) return nll;
    return t.add(nll, t.scale(repetition_penalty(t, distributions, token_ids), lambda));
}

inline CaptionLossResult caption_loss(const CaptionBatch& batch, double lambda = 0.1) {
    batch.validate();
    ad::Tape t;
    CaptionLossResult r;
    const ad::Var loss = caption_loss(t, t.constant(batch.step_distributions), batch.token_ids,
                                      lambda, &r.clamp_warnings);
    r.loss = t.value(loss).at(0, 0);
    return r;
}

}  // namespace pmr
