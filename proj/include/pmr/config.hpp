#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

namespace pmr {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// All pipeline knobs. File format: flat dotted keys, one "key = value"
// per line, '#' comments. Unknown keys are rejected so typos surface.
struct RunConfig {
    std::string out_dir = "out";

    // dims
    std::size_t d_model = 32;
    std::size_t channels = 8;   // C
    std::size_t height = 8;     // H
    std::size_t width = 8;      // W
    std::size_t embed = 16;     // E
    std::size_t snippets = 32;  // T
    std::size_t top_k = 10;     // K
    std::size_t roi_bins = 2;   // P
    std::size_t head_hidden = 32;

    // gen
    std::size_t n_videos = 50;
    std::size_t vocab_size = 32;
    double noise_sigma = 0.5;
    double env_shift = 3.0;
    double actor_boost = 4.0;
    double embed_scale = 3.0;
    double boundary_shift = 6.0;

    // training
    std::uint64_t seed = 1;
    double lr = 1e-4;
    double lambda_act = 10.0;
    double lambda_cap = 0.1;
    std::size_t batch_size = 10;
    std::size_t iterations = 500;

    // eval
    std::size_t an_max = 100;
    std::size_t max_per_video = 100;
    double nms_sigma = 0.5;
    double score_floor = 1e-4;

    std::size_t jobs = 1;

    void validate() const {
        auto require = [](bool ok, const char* field) {
            if (!ok) throw ConfigError(std::string("config: invalid value for ") + field);
        };
        require(d_model >= 1, "dims.d_model");
        require(channels >= 1, "dims.channels");
        require(height >= 1, "dims.height");
        require(width >= 1, "dims.width");
        require(embed >= 1, "dims.embed");
        require(snippets >= 4, "dims.snippets");
        require(top_k >= 1 && top_k <= vocab_size, "dims.top_k");
        require(roi_bins >= 1, "dims.roi_bins");
        require(head_hidden >= 1, "dims.head_hidden");
        require(n_videos >= 1, "gen.n_videos");
        require(vocab_size >= 1, "gen.vocab_size");
        require(noise_sigma > 0.0, "gen.noise_sigma");
        require(env_shift >= 0.0, "gen.env_shift");
        require(actor_boost >= 0.0, "gen.actor_boost");
        require(embed_scale > 0.0, "gen.embed_scale");
        require(boundary_shift >= 0.0, "gen.boundary_shift");
        require(lr > 0.0, "train.lr");
        require(lambda_act >= 0.0, "train.lambda_act");
        require(lambda_cap >= 0.0, "train.lambda_cap");
        require(batch_size >= 1, "train.batch_size");
        require(iterations >= 1, "train.iterations");
        require(an_max >= 2, "eval.an_max");
        require(max_per_video >= 1, "eval.max_per_video");
        require(nms_sigma > 0.0, "eval.nms_sigma");
        require(score_floor > 0.0, "eval.score_floor");
        require(jobs >= 1, "jobs");
    }
};

inline void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
    auto to_size = [&](const std::string& v) -> std::size_t {
        try {
            return static_cast<std::size_t>(std::stoull(v));
        } catch (...) {
            throw ConfigError("config: bad integer for " + key + ": " + v);
        }
    };
    auto to_double = [&](const std::string& v) -> double {
        try {
            return std::stod(v);
        } catch (...) {
            throw ConfigError("config: bad number for " + key + ": " + v);
        }
    };
    if (key == "paths.out") cfg.out_dir = value;
    else if (key == "dims.d_model") cfg.d_model = to_size(value);
    else if (key == "dims.channels") cfg.channels = to_size(value);
    else if (key == "dims.height") cfg.height = to_size(value);
    else if (key == "dims.width") cfg.width = to_size(value);
    else if (key == "dims.embed") cfg.embed = to_size(value);
    else if (key == "dims.snippets") cfg.snippets = to_size(value);
    else if (key == "dims.top_k") cfg.top_k = to_size(value);
    else if (key == "dims.roi_bins") cfg.roi_bins = to_size(value);
    else if (key == "dims.head_hidden") cfg.head_hidden = to_size(value);
    else if (key == "gen.n_videos") cfg.n_videos = to_size(value);
    else if (key == "gen.vocab_size") cfg.vocab_size = to_size(value);
    else if (key == "gen.noise_sigma") cfg.noise_sigma = to_double(value);
    else if (key == "gen.env_shift") cfg.env_shift = to_double(value);
    else if (key == "gen.actor_boost") cfg.actor_boost = to_double(value);
    else if (key == "gen.embed_scale") cfg.embed_scale = to_double(value);
    else if (key == "gen.boundary_shift") cfg.boundary_shift = to_double(value);
    else if (key == "train.seed") cfg.seed = static_cast<std::uint64_t>(to_size(value));
    else if (key == "train.lr") cfg.lr = to_double(value);
    else if (key == "train.lambda_act") cfg.lambda_act = to_double(value);
    else if (key == "train.lambda_cap") cfg.lambda_cap = to_double(value);
    else if (key == "train.batch_size") cfg.batch_size = to_size(value);
    else if (key == "train.iterations") cfg.iterations = to_size(value);
    else if (key == "eval.an_max") cfg.an_max = to_size(value);
    else if (key == "eval.max_per_video") cfg.max_per_video = to_size(value);
    else if (key == "eval.nms_sigma") cfg.nms_sigma = to_double(value);
    else if (key == "eval.score_floor") cfg.score_floor = to_double(value);
    else if (key == "jobs") cfg.jobs = to_size(value);
    else throw ConfigError("config: unknown key " + key);
}

inline RunConfig parse_config(std::istream& in) {
    RunConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto eq = line.find('=');
        std::string trimmed = line;
        trimmed.erase(0, trimmed.find_first_not_of(" \t\r"));
        if (trimmed.empty()) continue;
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        auto trim = [](std::string s) {
            s.erase(0, s.find_first_not_of(" \t\r"));
            const auto end = s.find_last_not_of(" \t\r");
            s.erase(end == std::string::npos ? 0 : end + 1);
            return s;
        };
        apply_config_entry(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

inline RunConfig read_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config: " + path);
    return parse_config(f);
}

}  // namespace pmr
