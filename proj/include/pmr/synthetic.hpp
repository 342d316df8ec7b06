#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "pmr/annotations.hpp"
#include "pmr/matrix.hpp"
#include "pmr/params.hpp"

namespace pmr {

struct Box {
    double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;

    bool valid() const { return 0.0 <= x1 && x1 < x2 && x2 <= 1.0 && 0.0 <= y1 && y1 < y2 && y2 <= 1.0; }
};

// Per-snippet ingested features: environment feature map (C x H x W),
// detected actor boxes (normalized, possibly empty), embedded middle
// frame (1 x E).
struct SnippetBundle {
    std::size_t channels = 0, height = 0, width = 0;
    std::vector<double> env_map;  // row-major (c, h, w)
    std::vector<Box> actor_boxes;
    Matrix frame_embed;

    double env_at(std::size_t c, std::size_t y, std::size_t x) const {
        return env_map[(c * height + y) * width + x];
    }
    double& env_at(std::size_t c, std::size_t y, std::size_t x) {
        return env_map[(c * height + y) * width + x];
    }
};

struct SyntheticDataset {
    std::vector<std::vector<SnippetBundle>> videos;
    std::vector<VideoAnnotation> annotations;
    Vocabulary vocab;
};

struct SyntheticDims {
    std::size_t n_videos = 50;
    std::size_t snippets = 32;  // T
    std::size_t channels = 8, height = 8, width = 8;
    std::size_t embed = 16;  // E
    std::size_t vocab_size = 32;

    // Planted-signal strengths (configurable; see RunConfig gen.* keys).
    double noise_sigma = 0.5;
    double env_shift = 3.0;
    double actor_boost = 4.0;
    double embed_scale = 3.0;
    double boundary_shift = 6.0;
};

namespace detail {

inline std::string padded_id(const char* prefix, std::size_t i) {
    std::string n = std::to_string(i);
    return std::string(prefix) + std::string(n.size() < 4 ? 4 - n.size() : 0, '0') + n;
}

}  // namespace detail

// Deterministic desk-scale dataset. Inside each ground-truth interval the
// generator plants a learnable signal: the env map mean is shifted, one
// "main actor" box sits on a hot region of the map, and the frame
// embedding points at a fixed vocabulary word per action class. Outside
// the intervals everything is i.i.d. noise.
inline SyntheticDataset generate_synthetic(std::uint64_t seed, const SyntheticDims& dims) {
    if (dims.n_videos < 1 || dims.snippets < 4 || dims.channels < 1 || dims.height < 1 ||
        dims.width < 1 || dims.embed < 1 || dims.vocab_size < 1)
        throw std::invalid_argument("generate_synthetic: all counts >= 1 and T >= 4 required");

    if (!(dims.noise_sigma > 0.0) || !(dims.env_shift >= 0.0) || !(dims.actor_boost >= 0.0) ||
        !(dims.embed_scale > 0.0) || !(dims.boundary_shift >= 0.0))
        throw std::invalid_argument("generate_synthetic: bad signal constants");
    constexpr std::size_t kClasses = 3;

    Rng rng(seed);
    SyntheticDataset ds;

    // Vocabulary: unit-norm gaussian embeddings, distinct synthetic words.
    ds.vocab.words.reserve(dims.vocab_size);
    ds.vocab.embeddings = Matrix(dims.vocab_size, dims.embed);
    for (std::size_t i = 0; i < dims.vocab_size; ++i) {
        ds.vocab.words.push_back(detail::padded_id("word", i));
        double norm = 0.0;
        for (std::size_t j = 0; j < dims.embed; ++j) {
            const double v = rng.gaussian();
            ds.vocab.embeddings.at(i, j) = v;
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (std::size_t j = 0; j < dims.embed; ++j) ds.vocab.embeddings.at(i, j) /= norm;
    }

    const std::size_t t_count = dims.snippets;
    const double duration = static_cast<double>(t_count);  // 1 s per snippet

    for (std::size_t v = 0; v < dims.n_videos; ++v) {
        VideoAnnotation ann;
        ann.video_id = detail::padded_id("v", v);
        ann.duration_s = duration;

        // 1-3 non-overlapping snippet-aligned actions, each 2..T/2 long.
        const std::size_t want = 1 + rng.index(3);
        std::vector<std::pair<std::size_t, std::size_t>> spans;  // [start, end) snippets
        std::vector<std::size_t> classes;
        for (std::size_t a = 0; a < want; ++a) {
            for (int attempt = 0; attempt < 40; ++attempt) {
                const std::size_t max_len = std::max<std::size_t>(2, t_count / 2);
                const std::size_t len = 2 + rng.index(max_len - 1);
                const std::size_t start = rng.index(t_count - len + 1);
                bool clash = false;
                for (const auto& [s, e] : spans)
                    if (start < e + 1 && s < start + len + 1) clash = true;
                if (!clash) {
                    spans.emplace_back(start, start + len);
                    classes.push_back(rng.index(kClasses));
                    break;
                }
            }
        }
        std::vector<std::size_t> order(spans.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return spans[a].first < spans[b].first; });

        for (std::size_t oi : order) {
            // Anchor action times at the centers of the first and last
            // in-span snippets so the boundary labels land inside the span.
            ann.actions.emplace_back(static_cast<double>(spans[oi].first) + 0.5,
                                     static_cast<double>(spans[oi].second) - 0.5);
            const std::size_t cls = classes[oi];
            // Short caption per event with a deliberate repeat now and then.
            std::vector<std::string> cap = {ds.vocab.words[cls],
                                            ds.vocab.words[rng.index(dims.vocab_size)],
                                            ds.vocab.words[rng.index(dims.vocab_size)],
                                            ds.vocab.words[cls]};
            ann.captions.push_back(std::move(cap));
        }

        // Per-action hot region for the main actor box.
        std::vector<Box> hot(spans.size());
        for (auto& b : hot) {
            const double x = 0.1 + 0.5 * rng.uniform();
            const double y = 0.1 + 0.5 * rng.uniform();
            b = Box{x, y, x + 0.3, y + 0.3};
        }

        std::vector<SnippetBundle> snippets(t_count);
        for (std::size_t i = 0; i < t_count; ++i) {
            SnippetBundle& sb = snippets[i];
            sb.channels = dims.channels;
            sb.height = dims.height;
            sb.width = dims.width;
            sb.env_map.resize(dims.channels * dims.height * dims.width);

            int action = -1;
            for (std::size_t a = 0; a < spans.size(); ++a)
                if (i >= spans[a].first && i < spans[a].second) action = static_cast<int>(a);

            const double shift = action >= 0 ? dims.env_shift : 0.0;
            for (double& d : sb.env_map) d = shift + dims.noise_sigma * rng.gaussian();

            if (action >= 0) {
                // Channel-distinct boundary markers: the first in-span
                // snippet lights up even channels, the last odd channels,
                // so starts and ends are separable from interiors.
                const auto& sp = spans[static_cast<std::size_t>(action)];
                if (i == sp.first)
                    for (std::size_t c = 0; c < dims.channels; c += 2)
                        for (std::size_t y = 0; y < dims.height; ++y)
                            for (std::size_t x = 0; x < dims.width; ++x)
                                sb.env_at(c, y, x) += dims.boundary_shift;
                if (i == sp.second - 1)
                    for (std::size_t c = 1; c < dims.channels; c += 2)
                        for (std::size_t y = 0; y < dims.height; ++y)
                            for (std::size_t x = 0; x < dims.width; ++x)
                                sb.env_at(c, y, x) += dims.boundary_shift;
                // Boost the hot region so the aligned actor feature stands out.
                const Box& hb = hot[static_cast<std::size_t>(action)];
                const auto lo_x = static_cast<std::size_t>(hb.x1 * dims.width);
                const auto hi_x = static_cast<std::size_t>(hb.x2 * dims.width);
                const auto lo_y = static_cast<std::size_t>(hb.y1 * dims.height);
                const auto hi_y = static_cast<std::size_t>(hb.y2 * dims.height);
                for (std::size_t c = 0; c < dims.channels; ++c)
                    for (std::size_t y = lo_y; y < std::min(hi_y + 1, dims.height); ++y)
                        for (std::size_t x = lo_x; x < std::min(hi_x + 1, dims.width); ++x)
                            sb.env_at(c, y, x) += dims.actor_boost;
                sb.actor_boxes.push_back(hb);
            }

            // 0-2 distractor boxes over plain noise.
            const std::size_t distractors = rng.index(3);
            for (std::size_t b = 0; b < distractors; ++b) {
                const double x = 0.6 * rng.uniform();
                const double y = 0.6 * rng.uniform();
                sb.actor_boxes.push_back(Box{x, y, x + 0.2 + 0.2 * rng.uniform(),
                                             y + 0.2 + 0.2 * rng.uniform()});
            }

            sb.frame_embed = Matrix(1, dims.embed);
            if (action >= 0) {
                const std::size_t w = classes[static_cast<std::size_t>(action)];
                for (std::size_t j = 0; j < dims.embed; ++j)
                    sb.frame_embed.at(0, j) =
                        dims.embed_scale * ds.vocab.embeddings.at(w, j) + 0.3 * rng.gaussian();
            } else {
                for (std::size_t j = 0; j < dims.embed; ++j) sb.frame_embed.at(0, j) = rng.gaussian();
            }
        }

        ann.validate();
        ds.annotations.push_back(std::move(ann));
        ds.videos.push_back(std::move(snippets));
    }

    ds.vocab.validate();
    return ds;
}

// Snippet count for an N-frame video at delta frames per snippet.
inline std::size_t snippet_count(std::size_t n_frames, std::size_t delta) {
    return (n_frames + delta - 1) / delta;
}

}  // namespace pmr
