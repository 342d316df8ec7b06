#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "pmr/beholders.hpp"

using namespace pmr;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
    Matrix m(r, c);
    for (double& d : m.data) d = scale * rng.gaussian();
    return m;
}

SnippetBundle make_bundle(std::size_t c, std::size_t h, std::size_t w, double fill = 0.0) {
    SnippetBundle b;
    b.channels = c;
    b.height = h;
    b.width = w;
    b.env_map.assign(c * h * w, fill);
    b.frame_embed = Matrix(1, 4, {1.0, 0.0, 0.0, 0.0});
    return b;
}

SnippetBundle random_bundle(std::size_t c, std::size_t h, std::size_t w, std::size_t e, Rng& rng) {
    SnippetBundle b = make_bundle(c, h, w);
    for (double& d : b.env_map) d = rng.gaussian();
    b.frame_embed = random_matrix(1, e, rng);
    return b;
}

Box random_box(Rng& rng) {
    const double x = 0.5 * rng.uniform();
    const double y = 0.5 * rng.uniform();
    return Box{x, y, x + 0.1 + 0.35 * rng.uniform(), y + 0.1 + 0.35 * rng.uniform()};
}

Vocabulary random_vocab(std::size_t n, std::size_t e, Rng& rng) {
    Vocabulary v;
    v.embeddings = Matrix(n, e);
    for (std::size_t i = 0; i < n; ++i) {
        v.words.push_back("w" + std::to_string(i));
        double norm = 0.0;
        for (std::size_t j = 0; j < e; ++j) {
            v.embeddings.at(i, j) = rng.gaussian();
            norm += v.embeddings.at(i, j) * v.embeddings.at(i, j);
        }
        norm = std::sqrt(norm);
        for (std::size_t j = 0; j < e; ++j) v.embeddings.at(i, j) /= norm;
    }
    return v;
}

// Independent bilinear interpolation used as the roi_align oracle: clamp
// the continuous coordinate to the valid center range, then interpolate
// between the four surrounding pixel centers.
double oracle_bilinear(const SnippetBundle& b, std::size_t c, double x, double y) {
    const double u = std::clamp(x - 0.5, 0.0, static_cast<double>(b.width) - 1.0);
    const double v = std::clamp(y - 0.5, 0.0, static_cast<double>(b.height) - 1.0);
    const std::size_t x0 = static_cast<std::size_t>(std::floor(u));
    const std::size_t y0 = static_cast<std::size_t>(std::floor(v));
    const std::size_t x1 = std::min(x0 + 1, b.width - 1);
    const std::size_t y1 = std::min(y0 + 1, b.height - 1);
    const double fx = u - static_cast<double>(x0);
    const double fy = v - static_cast<double>(y0);
    const double top = (1 - fx) * b.env_at(c, y0, x0) + fx * b.env_at(c, y0, x1);
    const double bot = (1 - fx) * b.env_at(c, y1, x0) + fx * b.env_at(c, y1, x1);
    return (1 - fy) * top + fy * bot;
}

Matrix oracle_roi(const SnippetBundle& b, const Box& box, std::size_t bins) {
    Matrix out(1, b.channels);
    for (std::size_t c = 0; c < b.channels; ++c) {
        double s = 0.0;
        for (std::size_t by = 0; by < bins; ++by)
            for (std::size_t bx = 0; bx < bins; ++bx) {
                const double x = (box.x1 + (box.x2 - box.x1) * (bx + 0.5) / bins) * b.width;
                const double y = (box.y1 + (box.y2 - box.y1) * (by + 0.5) / bins) * b.height;
                s += oracle_bilinear(b, c, x, y);
            }
        out.at(0, c) = s / static_cast<double>(bins * bins);
    }
    return out;
}

}  // namespace

TEST(EnvironmentBeholder, ConstantMap) {
    const SnippetBundle b = make_bundle(3, 4, 5, 3.0);
    const Matrix f = environment_beholder(b);
    ASSERT_EQ(f.cols, 3u);
    for (double d : f.data) EXPECT_DOUBLE_EQ(d, 3.0);
}

TEST(EnvironmentBeholder, OneByOneIsIdentity) {
    SnippetBundle b = make_bundle(4, 1, 1);
    for (std::size_t c = 0; c < 4; ++c) b.env_at(c, 0, 0) = 0.25 * static_cast<double>(c) - 1.0;
    const Matrix f = environment_beholder(b);
    for (std::size_t c = 0; c < 4; ++c) EXPECT_DOUBLE_EQ(f.at(0, c), b.env_at(c, 0, 0));
}

TEST(EnvironmentBeholder, HandMean) {
    SnippetBundle b = make_bundle(1, 2, 2);
    b.env_map = {1.0, 2.0, 3.0, 4.0};
    EXPECT_DOUBLE_EQ(environment_beholder(b).at(0, 0), 2.5);
}

TEST(RoiAlign, ConstantMapAnyBox) {
    const SnippetBundle b = make_bundle(2, 6, 6, 3.0);
    Rng rng(1);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix f = roi_align(b, random_box(rng), 2);
        for (double d : f.data) EXPECT_NEAR(d, 3.0, 1e-12);
    }
}

TEST(RoiAlign, WholeMapCenterSample) {
    SnippetBundle b = make_bundle(1, 2, 2);
    b.env_map = {1.0, 2.0, 3.0, 4.0};
    // whole-map box with a single bin samples the map center -> mean 2.5
    EXPECT_NEAR(roi_align(b, Box{0, 0, 1, 1}, 1).at(0, 0), 2.5, 1e-12);
}

TEST(RoiAlign, ClampedBoxHitsCornerPixel) {
    SnippetBundle b = make_bundle(1, 4, 4);
    for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 4; ++x) b.env_at(0, y, x) = static_cast<double>(y * 4 + x);
    // a tiny box in the top-left clamp region samples only pixel (0,0)
    EXPECT_NEAR(roi_align(b, Box{0.0, 0.0, 0.05, 0.05}, 2).at(0, 0), 0.0, 1e-12);
}

TEST(RoiAlign, DegenerateBoxThrows) {
    const SnippetBundle b = make_bundle(1, 4, 4, 1.0);
    EXPECT_THROW(roi_align(b, Box{0.5, 0.2, 0.5, 0.8}, 2), std::invalid_argument);
}

TEST(RoiAlign, MatchesDenseOracle) {
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        const SnippetBundle b = random_bundle(2, 4, 4, 4, rng);
        const Box box = random_box(rng);
        const std::size_t bins = 1 + rng.index(3);
        const Matrix got = roi_align(b, box, bins);
        const Matrix want = oracle_roi(b, box, bins);
        for (std::size_t c = 0; c < b.channels; ++c) EXPECT_NEAR(got.at(0, c), want.at(0, c), 1e-10);
    }
}

TEST(ActorsBeholder, EmptyBoxesYieldNoActorParam) {
    Rng rng(3);
    ParamStore params;
    const BeholderSpec spec = BeholderSpec::make(4, 2, 4, 2, 2);
    spec.init(params, rng);
    SnippetBundle b = random_bundle(2, 4, 4, 4, rng);
    b.actor_boxes.clear();
    ad::Tape t;
    const ad::Var env = mlp_forward(t, params, spec.env_proj, t.constant(environment_beholder(b)));
    SnippetProvenance prov;
    const Matrix f = t.value(actors_beholder(t, params, spec, b, env, &prov));
    EXPECT_TRUE(prov.actor_indices.empty());
    EXPECT_EQ(f.data, params.at("beholder.no_actor").data);
}

TEST(ActorsBeholder, SingleBoxIsAttentionOfOne) {
    Rng rng(4);
    ParamStore params;
    const BeholderSpec spec = BeholderSpec::make(4, 2, 4, 2, 2);
    spec.init(params, rng);
    SnippetBundle b = random_bundle(2, 4, 4, 4, rng);
    b.actor_boxes = {random_box(rng)};
    ad::Tape t;
    const ad::Var env = mlp_forward(t, params, spec.env_proj, t.constant(environment_beholder(b)));
    const Matrix f = t.value(actors_beholder(t, params, spec, b, env));
    const Matrix proj =
        mlp_forward(params, spec.actor_proj, roi_align(b, b.actor_boxes[0], spec.roi_bins));
    const Matrix v = add(matmul(proj, params.at("beholder.actor_aam.attn.wv")),
                         params.at("beholder.actor_aam.attn.bv"));
    const Matrix expect = add(matmul(v, params.at("beholder.actor_aam.attn.wo")),
                              params.at("beholder.actor_aam.attn.bo"));
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(f.at(0, j), expect.at(0, j), 1e-12);
}

TEST(ActorsBeholder, BoxOrderInvariance) {
    Rng rng(5);
    ParamStore params;
    const BeholderSpec spec = BeholderSpec::make(4, 2, 4, 2, 2);
    spec.init(params, rng);
    for (int trial = 0; trial < 20; ++trial) {
        SnippetBundle b = random_bundle(2, 5, 5, 4, rng);
        const std::size_t n = 2 + rng.index(4);
        for (std::size_t i = 0; i < n; ++i) b.actor_boxes.push_back(random_box(rng));
        SnippetBundle shuffled = b;
        for (std::size_t i = n; i > 1; --i)
            std::swap(shuffled.actor_boxes[i - 1], shuffled.actor_boxes[rng.index(i)]);
        auto run = [&](const SnippetBundle& sb) {
            ad::Tape t;
            const ad::Var env =
                mlp_forward(t, params, spec.env_proj, t.constant(environment_beholder(sb)));
            return t.value(actors_beholder(t, params, spec, sb, env));
        };
        const Matrix f1 = run(b);
        const Matrix f2 = run(shuffled);
        for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(f1.at(0, j), f2.at(0, j), 1e-10);
    }
}

TEST(TopKWords, ExactMatchRanksFirst) {
    Rng rng(6);
    const Vocabulary vocab = random_vocab(8, 4, rng);
    Matrix probe(1, 4);
    for (std::size_t j = 0; j < 4; ++j) probe.at(0, j) = 3.0 * vocab.embeddings.at(5, j);
    const auto idx = top_k_words(probe, vocab, 3);
    EXPECT_EQ(idx[0], 5u);
    Matrix row(1, 4);
    for (std::size_t j = 0; j < 4; ++j) row.at(0, j) = vocab.embeddings.at(5, j);
    EXPECT_NEAR(cosine_similarity(probe, row), 1.0, 1e-12);
}

TEST(TopKWords, OrthogonalAllButOne) {
    // orthonormal vocabulary; the probe lies along row 2 only.
    Vocabulary vocab;
    vocab.embeddings = Matrix(4, 4);
    for (std::size_t i = 0; i < 4; ++i) {
        vocab.words.push_back("w" + std::to_string(i));
        vocab.embeddings.at(i, i) = 1.0;
    }
    const Matrix probe(1, 4, {0.0, 0.0, 2.0, 0.0});
    EXPECT_EQ(top_k_words(probe, vocab, 1)[0], 2u);
}

TEST(TopKWords, FullKMatchesBruteForceSort) {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const Vocabulary vocab = random_vocab(10, 4, rng);
        const Matrix probe = random_matrix(1, 4, rng);
        const auto idx = top_k_words(probe, vocab, 10);
        std::vector<std::size_t> brute(10);
        std::iota(brute.begin(), brute.end(), 0);
        auto sim = [&](std::size_t i) {
            Matrix row(1, 4);
            for (std::size_t j = 0; j < 4; ++j) row.at(0, j) = vocab.embeddings.at(i, j);
            return cosine_similarity(probe, row);
        };
        std::stable_sort(brute.begin(), brute.end(),
                         [&](std::size_t a, std::size_t b) { return sim(a) > sim(b); });
        EXPECT_EQ(idx, brute);
    }
}

TEST(TopKWords, TiesBreakTowardLowerIndex) {
    Vocabulary vocab;
    vocab.embeddings = Matrix(3, 2, {1.0, 0.0, 0.0, 1.0, 1.0, 0.0});
    vocab.words = {"a", "b", "c"};
    // rows 0 and 2 tie at similarity 1; 0 must come first.
    const auto idx = top_k_words(Matrix(1, 2, {2.0, 0.0}), vocab, 3);
    EXPECT_EQ(idx, (std::vector<std::size_t>{0, 2, 1}));
}

TEST(TopKWords, ZeroNormProbeThrows) {
    Rng rng(8);
    const Vocabulary vocab = random_vocab(4, 4, rng);
    EXPECT_THROW(top_k_words(Matrix(1, 4), vocab, 2), std::invalid_argument);
}

TEST(AoeBeholder, EqualTokensCollapseToSingle) {
    Rng rng(9);
    ParamStore params;
    const BeholderSpec spec = BeholderSpec::make(4, 2, 4, 2, 2);
    spec.init(params, rng);
    const Matrix f = random_matrix(1, 4, rng);
    ad::Tape t;
    const ad::Var tok = t.constant(f);
    const Matrix fused = t.value(aoe_beholder(t, params, spec, tok, tok, tok));
    const Matrix v = add(matmul(f, params.at("beholder.aoe.attn.wv")), params.at("beholder.aoe.attn.bv"));
    const Matrix expect = add(matmul(v, params.at("beholder.aoe.attn.wo")), params.at("beholder.aoe.attn.bo"));
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(fused.at(0, j), expect.at(0, j), 1e-12);
}

TEST(AoeBeholder, StackOrderInvariant) {
    Rng rng(10);
    ParamStore params;
    const BeholderSpec spec = BeholderSpec::make(4, 2, 4, 2, 2);
    spec.init(params, rng);
    const Matrix a = random_matrix(1, 4, rng);
    const Matrix b = random_matrix(1, 4, rng);
    const Matrix c = random_matrix(1, 4, rng);
    auto run = [&](const Matrix& x, const Matrix& y, const Matrix& z) {
        ad::Tape t;
        return t.value(aoe_beholder(t, params, spec, t.constant(x), t.constant(y), t.constant(z)));
    };
    const Matrix base = run(a, b, c);
    for (const Matrix& other : {run(b, a, c), run(c, b, a), run(b, c, a)})
        for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(other.at(0, j), base.at(0, j), 1e-12);
}

TEST(AoeBeholder, ZeroInputStaysFinite) {
    Rng rng(11);
    ParamStore params;
    const BeholderSpec spec = BeholderSpec::make(4, 2, 4, 2, 2);
    spec.init(params, rng);
    ad::Tape t;
    const Matrix fused = t.value(aoe_beholder(t, params, spec, t.constant(Matrix(1, 4)),
                                              t.constant(random_matrix(1, 4, rng)),
                                              t.constant(random_matrix(1, 4, rng))));
    EXPECT_TRUE(all_finite(fused));
}

TEST(EncodeVideo, SingleSnippetMatchesSnippetPath) {
    Rng rng(12);
    ParamStore params;
    const BeholderSpec spec = BeholderSpec::make(4, 2, 4, 2, 2);
    spec.init(params, rng);
    const Vocabulary vocab = random_vocab(6, 4, rng);
    SnippetBundle b = random_bundle(2, 4, 4, 4, rng);
    b.actor_boxes = {random_box(rng)};
    const Matrix f = encode_video(params, spec, {b}, vocab);
    ASSERT_EQ(f.rows, 1u);
    ad::Tape t;
    const Matrix single = t.value(encode_snippet(t, params, spec, b, vocab));
    for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(f.at(0, j), single.at(0, j));
}

TEST(EncodeVideo, SnippetLocality) {
    Rng rng(13);
    ParamStore params;
    const BeholderSpec spec = BeholderSpec::make(4, 2, 4, 2, 2);
    spec.init(params, rng);
    const Vocabulary vocab = random_vocab(6, 4, rng);
    std::vector<SnippetBundle> bundles;
    for (int i = 0; i < 4; ++i) bundles.push_back(random_bundle(2, 4, 4, 4, rng));
    const Matrix before = encode_video(params, spec, bundles, vocab);
    // perturb snippet 2 only
    bundles[2].env_map[5] += 1.0;
    bundles[2].frame_embed.at(0, 1) -= 0.5;
    const Matrix after = encode_video(params, spec, bundles, vocab);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            if (i == 2) continue;
            EXPECT_DOUBLE_EQ(after.at(i, j), before.at(i, j));
        }
    double diff = 0.0;
    for (std::size_t j = 0; j < 4; ++j) diff += std::abs(after.at(2, j) - before.at(2, j));
    EXPECT_GT(diff, 0.0);
}

TEST(EncodeVideo, DeterministicAcrossCalls) {
    Rng rng(14);
    ParamStore params;
    const BeholderSpec spec = BeholderSpec::make(4, 2, 4, 2, 2);
    spec.init(params, rng);
    const Vocabulary vocab = random_vocab(6, 4, rng);
    std::vector<SnippetBundle> bundles;
    for (int i = 0; i < 3; ++i) {
        SnippetBundle b = random_bundle(2, 4, 4, 4, rng);
        if (i % 2 == 0) b.actor_boxes = {random_box(rng), random_box(rng)};
        bundles.push_back(b);
    }
    const Matrix a = encode_video(params, spec, bundles, vocab);
    const Matrix b = encode_video(params, spec, bundles, vocab);
    EXPECT_EQ(a.data, b.data);
    EXPECT_TRUE(all_finite(a));
}
