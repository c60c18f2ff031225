#pragma once

// Shared forward kernels for the inference and training paths.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "steerlab/model/model.hpp"

namespace steerlab::model::detail {

constexpr double kLnEps = 1e-5;

inline double mlp_act(double x) {
    return x > 0.0 ? x : 0.0;
}

inline double mlp_act_deriv(double x) {
    return x > 0.0 ? 1.0 : 0.0;
}

// out = a @ w, overwriting out.
inline void mm(const numcore::Tensor2D& a, const numcore::Tensor2D& w, numcore::Tensor2D& out) {
    out.rows = a.rows;
    out.cols = w.cols;
    out.data.assign(a.rows * w.cols, 0.0);
    numcore::matmul_acc(a, w, out);
}

inline void add_row_bias(numcore::Tensor2D& x, const numcore::Tensor2D& bias) {
    for (std::size_t r = 0; r < x.rows; ++r) {
        double* row = x.row(r);
        const double* b = bias.row(0);
        for (std::size_t c = 0; c < x.cols; ++c) {
            row[c] += b[c];
        }
    }
}

inline void layer_norm_rows(const numcore::Tensor2D& x, const numcore::Tensor2D& g,
                            const numcore::Tensor2D& b, numcore::Tensor2D& out,
                            std::vector<double>* means = nullptr,
                            std::vector<double>* rstds = nullptr) {
    const std::size_t t = x.rows, d = x.cols;
    out.rows = t;
    out.cols = d;
    out.data.resize(t * d);
    if (means) {
        means->resize(t);
        rstds->resize(t);
    }
    for (std::size_t i = 0; i < t; ++i) {
        const double* xi = x.row(i);
        double mu = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            mu += xi[c];
        }
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            const double dv = xi[c] - mu;
            var += dv * dv;
        }
        var /= static_cast<double>(d);
        const double rstd = 1.0 / std::sqrt(var + kLnEps);
        double* oi = out.row(i);
        const double* gr = g.row(0);
        const double* br = b.row(0);
        for (std::size_t c = 0; c < d; ++c) {
            oi[c] = gr[c] * (xi[c] - mu) * rstd + br[c];
        }
        if (means) {
            (*means)[i] = mu;
            (*rstds)[i] = rstd;
        }
    }
}

// dx/dg/db given upstream dy; uses the stashed per-row mean/rstd.
inline void layer_norm_backward_rows(const numcore::Tensor2D& x, const numcore::Tensor2D& g,
                                     const std::vector<double>& means,
                                     const std::vector<double>& rstds,
                                     const numcore::Tensor2D& dy, numcore::Tensor2D& dx_acc,
                                     numcore::Tensor2D* dg_acc, numcore::Tensor2D* db_acc) {
    const std::size_t t = x.rows, d = x.cols;
    for (std::size_t i = 0; i < t; ++i) {
        const double* xi = x.row(i);
        const double* dyi = dy.row(i);
        const double* gr = g.row(0);
        const double mu = means[i];
        const double rstd = rstds[i];
        double sum_dyg = 0.0;
        double sum_dyg_xhat = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            const double xhat = (xi[c] - mu) * rstd;
            const double dyg = dyi[c] * gr[c];
            sum_dyg += dyg;
            sum_dyg_xhat += dyg * xhat;
        }
        const double inv_d = 1.0 / static_cast<double>(d);
        double* dxi = dx_acc.row(i);
        for (std::size_t c = 0; c < d; ++c) {
            const double xhat = (xi[c] - mu) * rstd;
            const double dyg = dyi[c] * gr[c];
            dxi[c] += rstd * (dyg - inv_d * sum_dyg - xhat * inv_d * sum_dyg_xhat);
        }
        if (dg_acc) {
            double* dgr = dg_acc->row(0);
            double* dbr = db_acc->row(0);
            for (std::size_t c = 0; c < d; ++c) {
                const double xhat = (xi[c] - mu) * rstd;
                dgr[c] += dyi[c] * xhat;
                dbr[c] += dyi[c];
            }
        }
    }
}

inline std::pair<std::size_t, std::size_t> window_rows(std::size_t t, int window) {
    if (window > 0) {
        throw std::invalid_argument("intervention window must be 0 or negative");
    }
    if (window == 0) {
        return {0, t};
    }
    const std::size_t w = static_cast<std::size_t>(-window);
    return {w >= t ? 0 : t - w, t};
}

inline void apply_intervention(numcore::Tensor2D& x, const Intervention& iv) {
    if (iv.vector.size() != x.cols) {
        throw std::invalid_argument("intervention vector dimension mismatch");
    }
    const auto [r0, r1] = window_rows(x.rows, iv.window);
    for (std::size_t r = r0; r < r1; ++r) {
        double* row = x.row(r);
        for (std::size_t c = 0; c < x.cols; ++c) {
            row[c] += iv.coefficient * iv.vector[c];
        }
    }
}

// Causal multi-head attention. q/k/v are T×d; the context for row i is
// rows 0..i. Output overwrites `concat`. When probs_stash is non-null it
// receives one T×T lower-triangular matrix per head.
inline void causal_attention(const ModelConfig& cfg, const numcore::Tensor2D& q,
                             const numcore::Tensor2D& k, const numcore::Tensor2D& v,
                             numcore::Tensor2D& concat,
                             std::vector<numcore::Tensor2D>* probs_stash = nullptr) {
    const std::size_t t = q.rows;
    const std::size_t hd = cfg.head_dim();
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
    concat.rows = t;
    concat.cols = cfg.model_dim;
    concat.data.assign(t * cfg.model_dim, 0.0);
    if (probs_stash) {
        probs_stash->assign(cfg.head_count, numcore::Tensor2D(t, t, 0.0));
    }
    std::vector<double> row(t);
    for (std::size_t h = 0; h < cfg.head_count; ++h) {
        const std::size_t off = h * hd;
        for (std::size_t i = 0; i < t; ++i) {
            const double* qi = q.row(i) + off;
            double maxv = -1e300;
            for (std::size_t j = 0; j <= i; ++j) {
                const double* kj = k.row(j) + off;
                double acc = 0.0;
                for (std::size_t p = 0; p < hd; ++p) {
                    acc += qi[p] * kj[p];
                }
                row[j] = acc * inv_sqrt;
                maxv = row[j] > maxv ? row[j] : maxv;
            }
            double denom = 0.0;
            for (std::size_t j = 0; j <= i; ++j) {
                row[j] = std::exp(row[j] - maxv);
                denom += row[j];
            }
            const double inv_denom = 1.0 / denom;
            double* out = concat.row(i) + off;
            for (std::size_t j = 0; j <= i; ++j) {
                const double p = row[j] * inv_denom;
                row[j] = p;
                const double* vj = v.row(j) + off;
                for (std::size_t c = 0; c < hd; ++c) {
                    out[c] += p * vj[c];
                }
            }
            if (probs_stash) {
                double* pr = (*probs_stash)[h].row(i);
                for (std::size_t j = 0; j <= i; ++j) {
                    pr[j] = row[j];
                }
            }
        }
    }
}

inline void embed_tokens(const ModelWeights& w, const std::vector<TokenId>& tokens,
                         numcore::Tensor2D& x) {
    const std::size_t t = tokens.size();
    const std::size_t d = w.config.model_dim;
    x.rows = t;
    x.cols = d;
    x.data.resize(t * d);
    for (std::size_t i = 0; i < t; ++i) {
        const double* te = w.tok_emb.row(tokens[i]);
        const double* pe = w.pos_emb.row(i);
        double* xi = x.row(i);
        for (std::size_t c = 0; c < d; ++c) {
            xi[c] = te[c] + pe[c];
        }
    }
}

inline void validate_tokens(const ModelConfig& cfg, const std::vector<TokenId>& tokens) {
    if (tokens.empty()) {
        throw std::invalid_argument("model forward: empty token sequence");
    }
    if (tokens.size() > cfg.context_length) {
        throw std::invalid_argument("model forward: sequence exceeds context length");
    }
    for (TokenId id : tokens) {
        if (id >= cfg.vocab_size) {
            throw std::invalid_argument("model forward: token id out of range");
        }
    }
}

inline void validate_interventions(const ModelConfig& cfg, const std::vector<Intervention>& ivs) {
    for (const auto& iv : ivs) {
        if (iv.layer >= cfg.layer_count) {
            throw std::invalid_argument("intervention layer out of range");
        }
        if (iv.vector.size() != cfg.model_dim) {
            throw std::invalid_argument("intervention vector dimension mismatch");
        }
        if (iv.window > 0) {
            throw std::invalid_argument("intervention window must be 0 or negative");
        }
    }
}

}  // namespace steerlab::model::detail
