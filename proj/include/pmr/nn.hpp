#pragma once

#include <string>
#include <vector>

#include "pmr/params.hpp"
#include "pmr/tape.hpp"

namespace pmr {

// Layer sizes of a dense network: sizes[0] is the input width, the rest
// are layer output widths. Hidden layers use relu; the final layer is
// linear. Parameters live in a ParamStore under
// "<prefix>.<layer>.weight" / "<prefix>.<layer>.bias".
struct MlpSpec {
    std::string prefix;
    std::vector<std::size_t> sizes;

    void init(ParamStore& params, Rng& rng) const {
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
            params.add_weight(layer_name(l) + ".weight", sizes[l], sizes[l + 1], rng);
            params.add_bias(layer_name(l) + ".bias", sizes[l + 1]);
        }
    }

    std::string layer_name(std::size_t l) const { return prefix + "." + std::to_string(l); }
};

inline ad::Var mlp_forward(ad::Tape& t, const ParamStore& params, const MlpSpec& spec, ad::Var x) {
    check_shape(t.value(x).cols == spec.sizes.front(), "mlp_forward input width");
    ad::Var h = x;
    for (std::size_t l = 0; l + 1 < spec.sizes.size(); ++l) {
        const ad::Var w = t.param(spec.layer_name(l) + ".weight", params.at(spec.layer_name(l) + ".weight"));
        const ad::Var b = t.param(spec.layer_name(l) + ".bias", params.at(spec.layer_name(l) + ".bias"));
        h = t.add_row_broadcast(t.matmul(h, w), b);
        if (l + 2 < spec.sizes.size()) h = t.relu(h);
    }
    return h;
}

inline Matrix mlp_forward(const ParamStore& params, const MlpSpec& spec, const Matrix& x) {
    ad::Tape t;
    return t.value(mlp_forward(t, params, spec, t.constant(x)));
}

// Single-head scaled dot-product self-attention with an output
// projection. Parameters: "<prefix>.{wq,wk,wv,wo}" (d x d) and
// "<prefix>.{bq,bv,bo}" (1 x d). The key projection carries no bias: a
// key bias shifts every logit in a row equally, so softmax ignores it.
struct AttentionSpec {
    std::string prefix;
    std::size_t d = 0;

    void init(ParamStore& params, Rng& rng) const {
        for (const char* n : {"wq", "wk", "wv", "wo"})
            params.add_weight(prefix + "." + n, d, d, rng);
        for (const char* n : {"bq", "bv", "bo"})
            params.add_bias(prefix + "." + n, d);
    }
};

inline ad::Var self_attention(ad::Tape& t, const ParamStore& params, const AttentionSpec& spec,
                              ad::Var x) {
    check_shape(t.value(x).cols == spec.d, "self_attention token width");
    auto proj = [&](const char* w, const char* b) {
        return t.add_row_broadcast(
            t.matmul(x, t.param(spec.prefix + "." + w, params.at(spec.prefix + "." + w))),
            t.param(spec.prefix + "." + b, params.at(spec.prefix + "." + b)));
    };
    const ad::Var q = proj("wq", "bq");
    const ad::Var k = t.matmul(x, t.param(spec.prefix + ".wk", params.at(spec.prefix + ".wk")));
    const ad::Var v = proj("wv", "bv");
    const ad::Var logits = t.scale(t.matmul_bt(q, k), 1.0 / std::sqrt(static_cast<double>(spec.d)));
    const ad::Var weights = t.row_softmax(logits);
    const ad::Var mixed = t.matmul(weights, v);
    return t.add_row_broadcast(
        t.matmul(mixed, t.param(spec.prefix + ".wo", params.at(spec.prefix + ".wo"))),
        t.param(spec.prefix + ".bo", params.at(spec.prefix + ".bo")));
}

inline Matrix self_attention(const ParamStore& params, const AttentionSpec& spec, const Matrix& x) {
    ad::Tape t;
    return t.value(self_attention(t, params, spec, t.constant(x)));
}

}  // namespace pmr
