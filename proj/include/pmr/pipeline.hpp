#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "pmr/beholders.hpp"
#include "pmr/bmn.hpp"
#include "pmr/config.hpp"
#include "pmr/eval.hpp"
#include "pmr/gradcheck.hpp"
#include "pmr/losses.hpp"
#include "pmr/synthetic.hpp"

namespace pmr {

namespace fs = std::filesystem;

struct MissingInputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Model {
    BeholderSpec beholders;
    HeadSpec head;
    ParamStore params;
};

inline Model make_model(const RunConfig& cfg) {
    Model m;
    m.beholders = BeholderSpec::make(cfg.d_model, cfg.channels, cfg.embed, cfg.top_k, cfg.roi_bins);
    m.head = HeadSpec::make(cfg.d_model, cfg.snippets, cfg.head_hidden);
    Rng rng(cfg.seed);
    m.beholders.init(m.params, rng);
    m.head.init(m.params, rng);
    return m;
}

// ---- fixed file layout under the output directory ----
inline fs::path dataset_dir(const RunConfig& c) { return fs::path(c.out_dir) / "dataset"; }
inline fs::path features_dir(const RunConfig& c) { return fs::path(c.out_dir) / "features"; }
inline fs::path labels_dir(const RunConfig& c) { return fs::path(c.out_dir) / "labels"; }
inline fs::path train_dir(const RunConfig& c) { return fs::path(c.out_dir) / "train"; }
inline fs::path propose_dir(const RunConfig& c) { return fs::path(c.out_dir) / "propose"; }
inline fs::path eval_dir(const RunConfig& c) { return fs::path(c.out_dir) / "eval"; }

inline std::string annotations_path(const RunConfig& c) { return (dataset_dir(c) / "videos.jsonl").string(); }

// ---- dataset serialization ----

inline std::vector<TensorBlob> bundles_to_blobs(const std::vector<SnippetBundle>& bundles) {
    std::vector<TensorBlob> blobs;
    for (std::size_t i = 0; i < bundles.size(); ++i) {
        const SnippetBundle& b = bundles[i];
        const std::string prefix = detail::padded_id("s", i);
        TensorBlob env;
        env.name = prefix + ".env_map";
        env.shape = {static_cast<std::uint32_t>(b.channels), static_cast<std::uint32_t>(b.height),
                     static_cast<std::uint32_t>(b.width)};
        env.data.assign(b.env_map.begin(), b.env_map.end());
        blobs.push_back(std::move(env));
        if (!b.actor_boxes.empty()) {  // empty box sets are simply omitted
            TensorBlob boxes;
            boxes.name = prefix + ".boxes";
            boxes.shape = {static_cast<std::uint32_t>(b.actor_boxes.size()), 4};
            for (const Box& bx : b.actor_boxes) {
                boxes.data.push_back(static_cast<float>(bx.x1));
                boxes.data.push_back(static_cast<float>(bx.y1));
                boxes.data.push_back(static_cast<float>(bx.x2));
                boxes.data.push_back(static_cast<float>(bx.y2));
            }
            blobs.push_back(std::move(boxes));
        }
        blobs.push_back(matrix_to_blob(prefix + ".frame_embed", b.frame_embed));
    }
    return blobs;
}

inline std::vector<SnippetBundle> blobs_to_bundles(const std::vector<TensorBlob>& blobs) {
    std::map<std::string, const TensorBlob*> by_name;
    std::size_t count = 0;
    for (const TensorBlob& b : blobs) {
        by_name[b.name] = &b;
        if (b.name.size() > 8 && b.name.substr(b.name.size() - 8) == ".env_map") ++count;
    }
    std::vector<SnippetBundle> bundles(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::string prefix = detail::padded_id("s", i);
        SnippetBundle& sb = bundles[i];
        const TensorBlob* env = by_name.count(prefix + ".env_map") ? by_name[prefix + ".env_map"] : nullptr;
        if (!env || env->shape.size() != 3)
            throw ContainerError("video container: missing or malformed" + prefix + ".env_map");
        sb.channels = env->shape[0];
        sb.height = env->shape[1];
        sb.width = env->shape[2];
        sb.env_map.assign(env->data.begin(), env->data.end());
        if (by_name.count(prefix + ".boxes")) {
            const TensorBlob* bx = by_name[prefix + ".boxes"];
            for (std::size_t r = 0; r < bx->shape[0]; ++r)
                sb.actor_boxes.push_back(Box{bx->data[r * 4 + 0], bx->data[r * 4 + 1],
                                             bx->data[r * 4 + 2], bx->data[r * 4 + 3]});
        }
        if (!by_name.count(prefix + ".frame_embed"))
            throw ContainerError("video container: missing " + prefix + ".frame_embed");
        const TensorBlob* fe = by_name[prefix + ".frame_embed"];
        sb.frame_embed = Matrix(1, fe->element_count());
        for (std::size_t j = 0; j < fe->data.size(); ++j) sb.frame_embed.data[j] = fe->data[j];
    }
    return bundles;
}

inline void write_dataset(const SyntheticDataset& ds, const RunConfig& cfg) {
    fs::create_directories(dataset_dir(cfg));
    write_annotations(ds.annotations, annotations_path(cfg));
    write_vocabulary(ds.vocab, (dataset_dir(cfg) / "vocab_words.txt").string(),
                     (dataset_dir(cfg) / "vocab_embeddings.pmrf").string());
    for (std::size_t v = 0; v < ds.videos.size(); ++v)
        write_tensor_container(bundles_to_blobs(ds.videos[v]),
                               (dataset_dir(cfg) / (ds.annotations[v].video_id + ".pmrf")).string());
}

struct LoadedDataset {
    std::vector<std::vector<SnippetBundle>> videos;
    std::vector<VideoAnnotation> annotations;
    Vocabulary vocab;
};

inline LoadedDataset load_dataset(const RunConfig& cfg) {
    if (!fs::exists(annotations_path(cfg)))
        throw MissingInputError("dataset not found under " + dataset_dir(cfg).string() +
                                "; run stage gen first");
    LoadedDataset ds;
    ds.annotations = read_annotations(annotations_path(cfg));
    ds.vocab = read_vocabulary((dataset_dir(cfg) / "vocab_words.txt").string(),
                               (dataset_dir(cfg) / "vocab_embeddings.pmrf").string());
    for (const auto& ann : ds.annotations)
        ds.videos.push_back(
            blobs_to_bundles(read_tensor_container((dataset_dir(cfg) / (ann.video_id + ".pmrf")).string())));
    return ds;
}

// ---- parameter snapshots ----

inline void save_params(const ParamStore& params, const std::string& path) {
    std::vector<TensorBlob> blobs;
    for (const auto& [name, m] : params.values) blobs.push_back(matrix_to_blob(name, m));
    write_tensor_container(blobs, path);
}

inline void load_params(ParamStore& params, const std::string& path) {
    if (!fs::exists(path)) throw MissingInputError("params not found: " + path + "; run stage train first");
    for (const TensorBlob& b : read_tensor_container(path)) {
        Matrix& dst = params.at(b.name);
        const Matrix src = blob_to_matrix(b);
        check_shape(dst.same_shape(src), "load_params " + b.name);
        dst = src;
    }
}

// ---- stages ----

inline void run_gen(const RunConfig& cfg) {
    SyntheticDims dims;
    dims.n_videos = cfg.n_videos;
    dims.snippets = cfg.snippets;
    dims.channels = cfg.channels;
    dims.height = cfg.height;
    dims.width = cfg.width;
    dims.embed = cfg.embed;
    dims.vocab_size = cfg.vocab_size;
    dims.noise_sigma = cfg.noise_sigma;
    dims.env_shift = cfg.env_shift;
    dims.actor_boost = cfg.actor_boost;
    dims.embed_scale = cfg.embed_scale;
    dims.boundary_shift = cfg.boundary_shift;
    const SyntheticDataset ds = generate_synthetic(cfg.seed, dims);
    write_dataset(ds, cfg);
    std::size_t gt = 0;
    for (const auto& a : ds.annotations) gt += a.actions.size();
    std::printf("gen: %zu videos, %zu ground-truth actions, vocab %zu\n", ds.videos.size(), gt,
                ds.vocab.words.size());
}

// Per-video parallel map with deterministic output slots.
template <class Fn>
inline void parallel_videos(std::size_t n, std::size_t jobs, Fn&& fn) {
    if (jobs <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> workers;
    std::size_t stride = jobs;
    for (std::size_t w = 0; w < jobs; ++w)
        workers.emplace_back([&, w]() {
            for (std::size_t i = w; i < n; i += stride) fn(i);
        });
    for (auto& t : workers) t.join();
}

inline void run_encode(const RunConfig& cfg, const Model& model) {
    const LoadedDataset ds = load_dataset(cfg);
    fs::create_directories(features_dir(cfg));
    parallel_videos(ds.videos.size(), cfg.jobs, [&](std::size_t v) {
        const Matrix f = encode_video(model.params, model.beholders, ds.videos[v], ds.vocab);
        write_tensor_container({matrix_to_blob("features", f)},
                               (features_dir(cfg) / ("features_" + ds.annotations[v].video_id + ".pmrf")).string());
    });
    std::printf("encode: %zu videos -> %s\n", ds.videos.size(), features_dir(cfg).string().c_str());
}

inline void run_labels(const RunConfig& cfg) {
    if (!fs::exists(annotations_path(cfg)))
        throw MissingInputError("annotations not found; run stage gen first");
    const auto anns = read_annotations(annotations_path(cfg));
    fs::create_directories(labels_dir(cfg));
    for (const auto& ann : anns) {
        const LabelSet ls = gen_labels(ann, cfg.snippets);
        Matrix starts(1, ls.starts.size()), ends(1, ls.ends.size());
        for (std::size_t i = 0; i < ls.starts.size(); ++i) {
            starts.data[i] = ls.starts[i];
            ends.data[i] = ls.ends[i];
        }
        write_tensor_container({matrix_to_blob("L_S", starts), matrix_to_blob("L_E", ends),
                                matrix_to_blob("L_A", ls.durations)},
                               (labels_dir(cfg) / ("labels_" + ann.video_id + ".pmrf")).string());
    }
    std::printf("labels: %zu videos -> %s\n", anns.size(), labels_dir(cfg).string().c_str());
}

// Full training objective of one video on the tape.
inline ad::Var video_loss(ad::Tape& t, const ParamStore& params, const Model& model,
                          const std::vector<SnippetBundle>& bundles, const Vocabulary& vocab,
                          const LabelSet& labels, double lambda_act) {
    const ad::Var features = encode_video(t, params, model.beholders, bundles, vocab);
    const HeadOutput head = head_forward(t, params, model.head, features);
    Matrix ls(labels.starts.size(), 1), le(labels.ends.size(), 1);
    for (std::size_t i = 0; i < labels.starts.size(); ++i) {
        ls.data[i] = labels.starts[i];
        le.data[i] = labels.ends[i];
    }
    const Matrix mask = duration_valid_mask(labels.starts.size());
    ad::Var loss = t.add(l_wb(t, head.p_start, ls), l_wb(t, head.p_end, le));
    return t.add(loss, l_act(t, head.p_action, labels.durations, mask, lambda_act));
}

inline double dataset_loss(const Model& model, const LoadedDataset& ds,
                           const std::vector<LabelSet>& labels, double lambda_act) {
    double total = 0.0;
    for (std::size_t v = 0; v < ds.videos.size(); ++v) {
        ad::Tape t;
        total += t.value(video_loss(t, model.params, model, ds.videos[v], ds.vocab, labels[v], lambda_act))
                     .at(0, 0);
    }
    return total / static_cast<double>(ds.videos.size());
}

struct TrainResult {
    std::vector<double> loss_log;  // one entry per iteration
};

// Sequential mini-batch Adam over a seeded shuffle of the videos.
inline TrainResult train_model(Model& model, const LoadedDataset& ds,
                               const std::vector<LabelSet>& labels, const RunConfig& cfg) {
    TrainResult result;
    Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    std::vector<std::size_t> order(ds.videos.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::size_t cursor = order.size();
    const AdamConfig adam{cfg.lr};

    for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
        std::map<std::string, Matrix> grads;
        double batch_loss = 0.0;
        const std::size_t batch = std::min(cfg.batch_size, ds.videos.size());
        for (std::size_t b = 0; b < batch; ++b) {
            if (cursor == order.size()) {
                for (std::size_t i = order.size(); i > 1; --i)
                    std::swap(order[i - 1], order[shuffle_rng.index(i)]);
                cursor = 0;
            }
            const std::size_t v = order[cursor++];
            ad::Tape t;
            const ad::Var loss =
                video_loss(t, model.params, model, ds.videos[v], ds.vocab, labels[v], cfg.lambda_act);
            batch_loss += t.value(loss).at(0, 0);
            t.backward(loss);
            for (auto& [name, g] : t.param_grads()) {
                auto [it, fresh] = grads.emplace(name, g);
                if (!fresh)
                    for (std::size_t i = 0; i < g.data.size(); ++i) it->second.data[i] += g.data[i];
            }
        }
        const double inv = 1.0 / static_cast<double>(batch);
        for (auto& [name, g] : grads)
            for (double& d : g.data) d *= inv;
        batch_loss *= inv;
        if (!std::isfinite(batch_loss)) throw NumericError("training loss became non-finite");
        adam_step(model.params, grads, adam);
        result.loss_log.push_back(batch_loss);
    }
    return result;
}

inline std::vector<LabelSet> labels_for(const std::vector<VideoAnnotation>& anns, std::size_t t_count) {
    std::vector<LabelSet> out;
    out.reserve(anns.size());
    for (const auto& a : anns) out.push_back(gen_labels(a, t_count));
    return out;
}

inline void run_train(const RunConfig& cfg, Model& model) {
    const LoadedDataset ds = load_dataset(cfg);
    const auto labels = labels_for(ds.annotations, cfg.snippets);
    const TrainResult result = train_model(model, ds, labels, cfg);
    fs::create_directories(train_dir(cfg));
    save_params(model.params, (train_dir(cfg) / "params.pmrf").string());
    std::ofstream log((train_dir(cfg) / "loss_log.csv").string(), std::ios::trunc);
    log << "iteration,loss\n";
    char buf[64];
    for (std::size_t i = 0; i < result.loss_log.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.6f\n", i + 1, result.loss_log[i]);
        log << buf;
    }
    std::printf("train: %zu iterations, final loss %.6f\n", result.loss_log.size(),
                result.loss_log.back());
}

inline std::map<std::string, ProposalSet> propose_all(const Model& model, const LoadedDataset& ds,
                                                      const RunConfig& cfg) {
    std::map<std::string, ProposalSet> out;
    std::vector<ProposalSet> slots(ds.videos.size());
    parallel_videos(ds.videos.size(), cfg.jobs, [&](std::size_t v) {
        const Matrix f = encode_video(model.params, model.beholders, ds.videos[v], ds.vocab);
        const HeadMaps maps = head_forward(model.params, model.head, f);
        slots[v] = extract_proposals(maps, ds.annotations[v].video_id, ds.annotations[v].duration_s,
                                     cfg.max_per_video, cfg.nms_sigma, cfg.score_floor);
    });
    for (auto& s : slots) out.emplace(s.video_id, std::move(s));
    return out;
}

inline void write_proposals(const std::map<std::string, ProposalSet>& proposals,
                            const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path);
    char buf[160];
    for (const auto& [vid, set] : proposals)
        for (const Proposal& p : set.proposals) {
            std::snprintf(buf, sizeof buf, "%s %.6f %.6f %.6f\n", vid.c_str(), p.t_start_s,
                          p.t_end_s, p.score);
            f << buf;
        }
    if (!f) throw IoError("write failed: " + path);
}

inline std::map<std::string, ProposalSet> read_proposals(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw MissingInputError("proposals not found: " + path + "; run stage propose first");
    std::map<std::string, ProposalSet> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string vid;
        Proposal p;
        if (!(ss >> vid >> p.t_start_s >> p.t_end_s >> p.score))
            throw AnnotationError("malformed proposal line: " + line);
        auto& set = out[vid];
        set.video_id = vid;
        set.proposals.push_back(p);
    }
    return out;
}

inline void run_propose(const RunConfig& cfg, Model& model) {
    load_params(model.params, (train_dir(cfg) / "params.pmrf").string());
    const LoadedDataset ds = load_dataset(cfg);
    const auto proposals = propose_all(model, ds, cfg);
    fs::create_directories(propose_dir(cfg));
    write_proposals(proposals, (propose_dir(cfg) / "proposals.txt").string());
    std::size_t total = 0;
    for (const auto& [_, s] : proposals) total += s.proposals.size();
    std::printf("propose: %zu proposals over %zu videos\n", total, proposals.size());
}

inline void run_eval(const RunConfig& cfg) {
    const auto proposals = read_proposals((propose_dir(cfg) / "proposals.txt").string());
    if (!fs::exists(annotations_path(cfg)))
        throw MissingInputError("annotations not found; run stage gen first");
    const auto anns = read_annotations(annotations_path(cfg));
    MetricReport report = ar_at_an(proposals, anns, default_tiou_thresholds(), cfg.an_max);
    std::vector<std::vector<std::vector<std::string>>> paragraphs;
    for (const auto& a : anns)
        if (!a.captions.empty()) paragraphs.push_back(a.captions);
    if (!paragraphs.empty()) {
        report.div2 = diversity_div_n(paragraphs, 2);
        report.r4 = repetition_r_n(paragraphs, 4);
    }
    fs::create_directories(eval_dir(cfg));
    export_curve(report, (eval_dir(cfg) / "curve.csv").string(),
                 (eval_dir(cfg) / "summary.txt").string());
    std::printf("eval: AR@%zu=%.4f AUC=%.4f Div@2=%.4f R@4=%.4f\n", cfg.an_max,
                report.ar_at.back(), report.auc_percent, report.div2, report.r4);
}

}  // namespace pmr
