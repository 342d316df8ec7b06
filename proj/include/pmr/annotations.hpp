#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "pmr/container.hpp"

namespace pmr {

struct AnnotationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One ground-truth record: action intervals in seconds, optional caption
// token sequences (one per event) for the diversity metrics.
struct VideoAnnotation {
    std::string video_id;
    double duration_s = 0.0;
    std::vector<std::pair<double, double>> actions;
    std::vector<std::vector<std::string>> captions;

    void validate() const {
        if (!(duration_s > 0.0))
            throw AnnotationError(video_id + ": duration must be > 0");
        for (const auto& [s, e] : actions) {
            if (!(0.0 <= s && s < e && e <= duration_s))
                throw AnnotationError(video_id + ": invalid action interval [" +
                                      std::to_string(s) + ", " + std::to_string(e) + "]");
        }
    }
};

struct Vocabulary {
    std::vector<std::string> words;
    Matrix embeddings;  // D x E

    void validate() const {
        if (words.size() != embeddings.rows)
            throw AnnotationError("vocabulary: word count does not match embedding rows");
        std::set<std::string> seen;
        for (const auto& w : words)
            if (!seen.insert(w).second) throw AnnotationError("vocabulary: duplicate word " + w);
        for (std::size_t i = 0; i < embeddings.rows; ++i) {
            double norm = 0.0;
            for (std::size_t j = 0; j < embeddings.cols; ++j)
                norm += embeddings.at(i, j) * embeddings.at(i, j);
            if (norm == 0.0) throw AnnotationError("vocabulary: zero embedding for word " + words[i]);
        }
    }
};

// Line-delimited JSON, one video object per line; unknown keys ignored.
inline std::vector<VideoAnnotation> parse_annotations(std::istream& in) {
    std::vector<VideoAnnotation> out;
    std::set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw AnnotationError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
        }
        VideoAnnotation a;
        try {
            a.video_id = j.at("video_id").get<std::string>();
            a.duration_s = j.at("duration_s").get<double>();
            for (const auto& act : j.at("actions"))
                a.actions.emplace_back(act.at(0).get<double>(), act.at(1).get<double>());
            if (j.contains("captions"))
                for (const auto& cap : j.at("captions"))
                    a.captions.push_back(cap.get<std::vector<std::string>>());
        } catch (const nlohmann::json::exception& e) {
            throw AnnotationError("line " + std::to_string(line_no) + ": bad record: " + e.what());
        }
        try {
            a.validate();
        } catch (const AnnotationError& e) {
            throw AnnotationError("line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!ids.insert(a.video_id).second)
            throw AnnotationError("line " + std::to_string(line_no) + ": duplicate video_id " + a.video_id);
        out.push_back(std::move(a));
    }
    return out;
}

inline std::vector<VideoAnnotation> read_annotations(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open annotations: " + path);
    return parse_annotations(f);
}

inline void write_annotations(const std::vector<VideoAnnotation>& anns, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path);
    for (const auto& a : anns) {
        nlohmann::json j;
        j["video_id"] = a.video_id;
        j["duration_s"] = a.duration_s;
        auto acts = nlohmann::json::array();
        for (const auto& [s, e] : a.actions) acts.push_back({s, e});
        j["actions"] = acts;
        if (!a.captions.empty()) j["captions"] = a.captions;
        f << j.dump() << "\n";
    }
    if (!f) throw IoError("write failed: " + path);
}

// Vocabulary on disk: a words file (first line word count, then one word
// per line) plus a PMRF container holding blob "embeddings" (D x E).
inline void write_vocabulary(const Vocabulary& vocab, const std::string& words_path,
                             const std::string& embeddings_path) {
    std::ofstream f(words_path, std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + words_path);
    f << vocab.words.size() << "\n";
    for (const auto& w : vocab.words) f << w << "\n";
    if (!f) throw IoError("write failed: " + words_path);
    write_tensor_container({matrix_to_blob("embeddings", vocab.embeddings)}, embeddings_path);
}

inline Vocabulary read_vocabulary(const std::string& words_path, const std::string& embeddings_path) {
    std::ifstream f(words_path);
    if (!f) throw IoError("cannot open vocabulary: " + words_path);
    std::size_t count = 0;
    f >> count;
    Vocabulary vocab;
    for (std::size_t i = 0; i < count; ++i) {
        std::string w;
        if (!(f >> w)) throw AnnotationError("vocabulary: fewer words than declared in " + words_path);
        vocab.words.push_back(w);
    }
    const auto blobs = read_tensor_container(embeddings_path);
    if (blobs.empty() || blobs[0].name != "embeddings")
        throw AnnotationError("vocabulary: missing embeddings blob in " + embeddings_path);
    vocab.embeddings = blob_to_matrix(blobs[0]);
    vocab.validate();
    return vocab;
}

}  // namespace pmr
