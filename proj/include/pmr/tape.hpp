#pragma once

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pmr/matrix.hpp"

namespace pmr::ad {

// Recorded-computation reverse pass over Matrix values. Every forward op
// appends a node holding its result and a closure that scatters the
// node's gradient back to its inputs. A Var is just an index into the tape.
using Var = int;

class Tape {
  public:
    const Matrix& value(Var v) const { return nodes_[v].value; }
    Matrix& grad(Var v) { return nodes_[v].grad; }

    Var constant(Matrix v) { return push(std::move(v), {}); }

    Var param(const std::string& name, const Matrix& v) {
        Var idx = push(v, {});
        nodes_[idx].param_name = name;
        param_vars_.push_back(idx);
        return idx;
    }

    Var add(Var a, Var b) {
        Var out = push(pmr::add(value(a), value(b)),
                       [this, a, b](const Matrix& g) {
                           accumulate(a, g);
                           accumulate(b, g);
                       });
        return out;
    }

    Var sub(Var a, Var b) {
        const Matrix& va = value(a);
        const Matrix& vb = value(b);
        check_shape(va.same_shape(vb), "tape sub");
        Matrix c = va;
        for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] -= vb.data[i];
        return push(std::move(c), [this, a, b](const Matrix& g) {
            accumulate(a, g);
            Matrix ng = g;
            for (double& d : ng.data) d = -d;
            accumulate(b, ng);
        });
    }

    Var mul(Var a, Var b) {  // elementwise
        const Matrix& va = value(a);
        const Matrix& vb = value(b);
        check_shape(va.same_shape(vb), "tape mul");
        Matrix c = va;
        for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] *= vb.data[i];
        return push(std::move(c), [this, a, b](const Matrix& g) {
            Matrix ga = g, gb = g;
            const Matrix& va2 = value(a);
            const Matrix& vb2 = value(b);
            for (std::size_t i = 0; i < g.data.size(); ++i) {
                ga.data[i] *= vb2.data[i];
                gb.data[i] *= va2.data[i];
            }
            accumulate(a, ga);
            accumulate(b, gb);
        });
    }

    Var div(Var a, Var b) {  // elementwise; b must be nonzero
        const Matrix& va = value(a);
        const Matrix& vb = value(b);
        check_shape(va.same_shape(vb), "tape div");
        Matrix c = va;
        for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] /= vb.data[i];
        return push(std::move(c), [this, a, b](const Matrix& g) {
            const Matrix& va2 = value(a);
            const Matrix& vb2 = value(b);
            Matrix ga = g, gb = g;
            for (std::size_t i = 0; i < g.data.size(); ++i) {
                ga.data[i] /= vb2.data[i];
                gb.data[i] *= -va2.data[i] / (vb2.data[i] * vb2.data[i]);
            }
            accumulate(a, ga);
            accumulate(b, gb);
        });
    }

    Var matmul(Var a, Var b) {
        return push(pmr::matmul(value(a), value(b)), [this, a, b](const Matrix& g) {
            accumulate(a, pmr::matmul_bt(g, value(b)));
            accumulate(b, pmr::matmul(transpose(value(a)), g));
        });
    }

    // a * b^T
    Var matmul_bt(Var a, Var b) {
        return push(pmr::matmul_bt(value(a), value(b)), [this, a, b](const Matrix& g) {
            accumulate(a, pmr::matmul(g, value(b)));
            accumulate(b, pmr::matmul(transpose(g), value(a)));
        });
    }

    // X (n x d) + bias (1 x d) broadcast over rows.
    Var add_row_broadcast(Var x, Var bias) {
        const Matrix& vx = value(x);
        const Matrix& vb = value(bias);
        check_shape(vb.rows == 1 && vb.cols == vx.cols, "add_row_broadcast");
        Matrix c = vx;
        for (std::size_t i = 0; i < c.rows; ++i)
            for (std::size_t j = 0; j < c.cols; ++j) c.at(i, j) += vb.at(0, j);
        return push(std::move(c), [this, x, bias](const Matrix& g) {
            accumulate(x, g);
            Matrix gb(1, g.cols);
            for (std::size_t i = 0; i < g.rows; ++i)
                for (std::size_t j = 0; j < g.cols; ++j) gb.at(0, j) += g.at(i, j);
            accumulate(bias, gb);
        });
    }

    Var relu(Var x) {
        return push(pmr::relu(value(x)), [this, x](const Matrix& g) {
            Matrix gx = g;
            const Matrix& vx = value(x);
            for (std::size_t i = 0; i < gx.data.size(); ++i)
                if (vx.data[i] <= 0.0) gx.data[i] = 0.0;
            accumulate(x, gx);
        });
    }

    Var sigmoid(Var x) {
        Var out = push(pmr::sigmoid(value(x)), {});
        nodes_[out].backward = [this, x, out](const Matrix& g) {
            Matrix gx = g;
            const Matrix& s = value(out);
            for (std::size_t i = 0; i < gx.data.size(); ++i)
                gx.data[i] *= s.data[i] * (1.0 - s.data[i]);
            accumulate(x, gx);
        };
        return out;
    }

    Var row_softmax(Var x) {
        Var out = push(pmr::row_softmax(value(x)), {});
        nodes_[out].backward = [this, x, out](const Matrix& g) {
            const Matrix& s = value(out);
            Matrix gx(s.rows, s.cols);
            for (std::size_t i = 0; i < s.rows; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < s.cols; ++j) dot += g.at(i, j) * s.at(i, j);
                for (std::size_t j = 0; j < s.cols; ++j)
                    gx.at(i, j) = s.at(i, j) * (g.at(i, j) - dot);
            }
            accumulate(x, gx);
        };
        return out;
    }

    // Softmax over every entry of the matrix (used for AAM score vectors).
    Var softmax_flat(Var x) {
        const Matrix& vx = value(x);
        Matrix flat(1, vx.size(), vx.data);
        Matrix s = pmr::row_softmax(flat);
        Matrix y(vx.rows, vx.cols, std::move(s.data));
        Var out = push(std::move(y), {});
        nodes_[out].backward = [this, x, out](const Matrix& g) {
            const Matrix& s2 = value(out);
            double dot = 0.0;
            for (std::size_t i = 0; i < s2.data.size(); ++i) dot += g.data[i] * s2.data[i];
            Matrix gx = g;
            for (std::size_t i = 0; i < gx.data.size(); ++i)
                gx.data[i] = s2.data[i] * (g.data[i] - dot);
            accumulate(x, gx);
        };
        return out;
    }

    // Per-row L2 norm: (n x d) -> (n x 1). Gradient at a zero row is 0.
    Var rows_l2norm(Var x) {
        const Matrix& vx = value(x);
        Matrix y(vx.rows, 1);
        for (std::size_t i = 0; i < vx.rows; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < vx.cols; ++j) s += vx.at(i, j) * vx.at(i, j);
            y.at(i, 0) = std::sqrt(s);
        }
        Var out = push(std::move(y), {});
        nodes_[out].backward = [this, x, out](const Matrix& g) {
            const Matrix& vx2 = value(x);
            const Matrix& n = value(out);
            Matrix gx(vx2.rows, vx2.cols);
            for (std::size_t i = 0; i < vx2.rows; ++i) {
                if (n.at(i, 0) <= 0.0) continue;
                const double scale = g.at(i, 0) / n.at(i, 0);
                for (std::size_t j = 0; j < vx2.cols; ++j)
                    gx.at(i, j) = scale * vx2.at(i, j);
            }
            accumulate(x, gx);
        };
        return out;
    }

    Var mean_rows(Var x) { return mean_rows_range(x, 0, value(x).rows); }

    // Mean over rows [lo, hi) -> (1 x d).
    Var mean_rows_range(Var x, std::size_t lo, std::size_t hi) {
        const Matrix& vx = value(x);
        check_shape(lo < hi && hi <= vx.rows, "mean_rows_range");
        Matrix y(1, vx.cols);
        for (std::size_t i = lo; i < hi; ++i)
            for (std::size_t j = 0; j < vx.cols; ++j) y.at(0, j) += vx.at(i, j);
        const double inv = 1.0 / static_cast<double>(hi - lo);
        for (double& d : y.data) d *= inv;
        return push(std::move(y), [this, x, lo, hi, inv](const Matrix& g) {
            Matrix gx(value(x).rows, value(x).cols);
            for (std::size_t i = lo; i < hi; ++i)
                for (std::size_t j = 0; j < gx.cols; ++j) gx.at(i, j) = g.at(0, j) * inv;
            accumulate(x, gx);
        });
    }

    Var concat_rows(const std::vector<Var>& parts) {
        check_shape(!parts.empty(), "concat_rows empty");
        std::size_t rows = 0;
        const std::size_t cols = value(parts[0]).cols;
        for (Var p : parts) {
            check_shape(value(p).cols == cols, "concat_rows widths");
            rows += value(p).rows;
        }
        Matrix y(rows, cols);
        std::size_t r = 0;
        for (Var p : parts) {
            const Matrix& vp = value(p);
            std::copy(vp.data.begin(), vp.data.end(), y.data.begin() + r * cols);
            r += vp.rows;
        }
        return push(std::move(y), [this, parts](const Matrix& g) {
            std::size_t r2 = 0;
            for (Var p : parts) {
                const Matrix& vp = value(p);
                Matrix gp(vp.rows, vp.cols);
                std::copy(g.data.begin() + r2 * g.cols,
                          g.data.begin() + (r2 + vp.rows) * g.cols, gp.data.begin());
                accumulate(p, gp);
                r2 += vp.rows;
            }
        });
    }

    Var concat_cols(const std::vector<Var>& parts) {
        check_shape(!parts.empty(), "concat_cols empty");
        const std::size_t rows = value(parts[0]).rows;
        std::size_t cols = 0;
        for (Var p : parts) {
            check_shape(value(p).rows == rows, "concat_cols heights");
            cols += value(p).cols;
        }
        Matrix y(rows, cols);
        std::size_t c = 0;
        for (Var p : parts) {
            const Matrix& vp = value(p);
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < vp.cols; ++j) y.at(i, c + j) = vp.at(i, j);
            c += vp.cols;
        }
        return push(std::move(y), [this, parts](const Matrix& g) {
            std::size_t c2 = 0;
            for (Var p : parts) {
                const Matrix& vp = value(p);
                Matrix gp(vp.rows, vp.cols);
                for (std::size_t i = 0; i < vp.rows; ++i)
                    for (std::size_t j = 0; j < vp.cols; ++j) gp.at(i, j) = g.at(i, c2 + j);
                accumulate(p, gp);
                c2 += vp.cols;
            }
        });
    }

    // Gather rows by index; gradient scatter-adds back.
    Var take_rows(Var x, std::vector<std::size_t> idx) {
        const Matrix& vx = value(x);
        Matrix y(idx.size(), vx.cols);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            check_shape(idx[i] < vx.rows, "take_rows index");
            for (std::size_t j = 0; j < vx.cols; ++j) y.at(i, j) = vx.at(idx[i], j);
        }
        return push(std::move(y), [this, x, idx = std::move(idx)](const Matrix& g) {
            Matrix gx(value(x).rows, value(x).cols);
            for (std::size_t i = 0; i < idx.size(); ++i)
                for (std::size_t j = 0; j < gx.cols; ++j) gx.at(idx[i], j) += g.at(i, j);
            accumulate(x, gx);
        });
    }

    // Scatter a column vector of per-cell values (n x 1) into a zero
    // (rows x cols) matrix at the given positions.
    Var scatter_to_matrix(Var x, std::vector<std::pair<std::size_t, std::size_t>> pos,
                          std::size_t rows, std::size_t cols) {
        const Matrix& vx = value(x);
        check_shape(vx.cols == 1 && vx.rows == pos.size(), "scatter_to_matrix");
        Matrix y(rows, cols);
        for (std::size_t i = 0; i < pos.size(); ++i) y.at(pos[i].first, pos[i].second) = vx.at(i, 0);
        return push(std::move(y), [this, x, pos = std::move(pos)](const Matrix& g) {
            Matrix gx(value(x).rows, 1);
            for (std::size_t i = 0; i < pos.size(); ++i)
                gx.at(i, 0) = g.at(pos[i].first, pos[i].second);
            accumulate(x, gx);
        });
    }

    // Row-wise scale of X (n x d) by a column vector s (n x 1);
    // differentiable in both arguments.
    Var row_scale(Var x, Var s) {
        const Matrix& vx = value(x);
        const Matrix& vs = value(s);
        check_shape(vs.rows == vx.rows && vs.cols == 1, "row_scale");
        Matrix y = vx;
        for (std::size_t i = 0; i < y.rows; ++i)
            for (std::size_t j = 0; j < y.cols; ++j) y.at(i, j) *= vs.at(i, 0);
        return push(std::move(y), [this, x, s](const Matrix& g) {
            const Matrix& vx2 = value(x);
            const Matrix& vs2 = value(s);
            Matrix gx = g;
            Matrix gs(vs2.rows, 1);
            for (std::size_t i = 0; i < g.rows; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < g.cols; ++j) {
                    dot += g.at(i, j) * vx2.at(i, j);
                    gx.at(i, j) *= vs2.at(i, 0);
                }
                gs.at(i, 0) = dot;
            }
            accumulate(x, gx);
            accumulate(s, gs);
        });
    }

    Var scale(Var x, double c) {
        Matrix y = value(x);
        for (double& d : y.data) d *= c;
        return push(std::move(y), [this, x, c](const Matrix& g) {
            Matrix gx = g;
            for (double& d : gx.data) d *= c;
            accumulate(x, gx);
        });
    }

    Var affine(Var x, double a, double b) {  // a*x + b elementwise
        Matrix y = value(x);
        for (double& d : y.data) d = a * d + b;
        return push(std::move(y), [this, x, a](const Matrix& g) {
            Matrix gx = g;
            for (double& d : gx.data) d *= a;
            accumulate(x, gx);
        });
    }

    // Clamp to [lo, hi]; gradient is zero where the clamp is active.
    Var clamp(Var x, double lo, double hi) {
        Matrix y = value(x);
        for (double& d : y.data) d = std::min(std::max(d, lo), hi);
        return push(std::move(y), [this, x, lo, hi](const Matrix& g) {
            Matrix gx = g;
            const Matrix& vx = value(x);
            for (std::size_t i = 0; i < gx.data.size(); ++i)
                if (vx.data[i] < lo || vx.data[i] > hi) gx.data[i] = 0.0;
            accumulate(x, gx);
        });
    }

    Var log(Var x) {
        Matrix y = value(x);
        for (double& d : y.data) d = std::log(d);
        return push(std::move(y), [this, x](const Matrix& g) {
            Matrix gx = g;
            const Matrix& vx = value(x);
            for (std::size_t i = 0; i < gx.data.size(); ++i) gx.data[i] /= vx.data[i];
            accumulate(x, gx);
        });
    }

    Var cmul(Var x, Matrix weights) {  // elementwise product with a constant
        const Matrix& vx = value(x);
        check_shape(vx.same_shape(weights), "cmul");
        Matrix y = vx;
        for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] *= weights.data[i];
        return push(std::move(y), [this, x, weights = std::move(weights)](const Matrix& g) {
            Matrix gx = g;
            for (std::size_t i = 0; i < gx.data.size(); ++i) gx.data[i] *= weights.data[i];
            accumulate(x, gx);
        });
    }

    Var sum_all(Var x) {
        double s = 0.0;
        for (double d : value(x).data) s += d;
        Matrix y(1, 1);
        y.at(0, 0) = s;
        return push(std::move(y), [this, x](const Matrix& g) {
            Matrix gx(value(x).rows, value(x).cols, std::vector<double>(value(x).size(), g.at(0, 0)));
            accumulate(x, gx);
        });
    }

    // Reverse pass from a scalar (1x1) loss node.
    void backward(Var loss) {
        check_shape(value(loss).rows == 1 && value(loss).cols == 1, "backward: loss must be scalar");
        for (auto& n : nodes_)
            n.grad = Matrix(n.value.rows, n.value.cols);
        nodes_[loss].grad.at(0, 0) = 1.0;
        for (int i = loss; i >= 0; --i)
            if (nodes_[i].backward && has_nonzero(nodes_[i].grad)) nodes_[i].backward(nodes_[i].grad);
    }

    // Gradients of all params registered via param(), keyed by name.
    std::map<std::string, Matrix> param_grads() const {
        std::map<std::string, Matrix> out;
        for (Var v : param_vars_) {
            const auto& n = nodes_[v];
            auto [it, fresh] = out.emplace(n.param_name, n.grad);
            if (!fresh) it->second = pmr::add(it->second, n.grad);
        }
        return out;
    }

  private:
    struct Node {
        Matrix value;
        Matrix grad;
        std::function<void(const Matrix&)> backward;
        std::string param_name;
    };

    static bool has_nonzero(const Matrix& m) {
        for (double d : m.data)
            if (d != 0.0) return true;
        return false;
    }

    Var push(Matrix v, std::function<void(const Matrix&)> bw) {
        nodes_.push_back(Node{std::move(v), Matrix{}, std::move(bw), {}});
        return static_cast<Var>(nodes_.size() - 1);
    }

    void accumulate(Var v, const Matrix& g) {
        Matrix& dst = nodes_[v].grad;
        if (dst.size() == 0) dst = Matrix(g.rows, g.cols);
        for (std::size_t i = 0; i < g.data.size(); ++i) dst.data[i] += g.data[i];
    }

    std::vector<Node> nodes_;
    std::vector<Var> param_vars_;
};

}  // namespace pmr::ad
