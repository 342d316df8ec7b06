#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>

#include "pmr/matrix.hpp"

namespace pmr {

// Deterministic uniform/gaussian draws on top of mt19937_64. The
// distributions are spelled out here (not std::*_distribution) so that
// generated bytes are identical across standard libraries.
struct Rng {
    std::mt19937_64 engine;

    explicit Rng(std::uint64_t seed) : engine(seed) {}

    double uniform() {  // [0, 1)
        return static_cast<double>(engine() >> 11) * (1.0 / 9007199254740992.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::uint64_t next_u64() { return engine(); }

    // integer in [0, n)
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n; }

    double gaussian() {  // Box-Muller
        double u1 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }
};

// Named trainable matrices plus Adam moment accumulators.
struct ParamStore {
    std::map<std::string, Matrix> values;
    std::map<std::string, Matrix> m1;
    std::map<std::string, Matrix> m2;
    long step = 0;

    Matrix& at(const std::string& name) {
        auto it = values.find(name);
        if (it == values.end()) throw std::out_of_range("ParamStore: no parameter " + name);
        return it->second;
    }
    const Matrix& at(const std::string& name) const {
        auto it = values.find(name);
        if (it == values.end()) throw std::out_of_range("ParamStore: no parameter " + name);
        return it->second;
    }

    bool has(const std::string& name) const { return values.count(name) != 0; }

    // Weight init: uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)).
    void add_weight(const std::string& name, std::size_t rows, std::size_t cols, Rng& rng) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
        Matrix w(rows, cols);
        for (double& d : w.data) d = rng.uniform(-bound, bound);
        insert(name, std::move(w));
    }

    void add_bias(const std::string& name, std::size_t cols) { insert(name, Matrix(1, cols)); }

    void insert(const std::string& name, Matrix w) {
        if (values.count(name)) throw std::invalid_argument("ParamStore: duplicate " + name);
        m1.emplace(name, Matrix(w.rows, w.cols));
        m2.emplace(name, Matrix(w.rows, w.cols));
        values.emplace(name, std::move(w));
    }
};

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// One bias-corrected Adam update. Parameters absent from `grads` are
// treated as zero-gradient (their moments still decay).
inline void adam_step(ParamStore& params, const std::map<std::string, Matrix>& grads,
                      const AdamConfig& cfg = {}) {
    params.step += 1;
    const double t = static_cast<double>(params.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (auto& [name, w] : params.values) {
        Matrix& m = params.m1.at(name);
        Matrix& v = params.m2.at(name);
        auto git = grads.find(name);
        if (git != grads.end()) check_shape(git->second.same_shape(w), "adam_step gradient " + name);
        for (std::size_t i = 0; i < w.data.size(); ++i) {
            double g = 0.0;
            if (git != grads.end()) {
                g = git->second.data[i];
                if (!std::isfinite(g)) throw std::runtime_error("adam_step: non-finite gradient in " + name);
            }
            m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * g;
            v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * g * g;
            const double mhat = m.data[i] / c1;
            const double vhat = v.data[i] / c2;
            w.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
        }
    }
}

}  // namespace pmr
