#include "steerlab/model/train.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>

#include "model_kernels.hpp"
#include "steerlab/numcore/adam.hpp"
#include "steerlab/numcore/ops.hpp"
#include "steerlab/numcore/rng.hpp"

namespace steerlab::model {

using numcore::AdamState;
using numcore::SeededRng;
using namespace detail;

ModelWeights zeros_like(const ModelWeights& w) {
    ModelWeights z = w;
    for (Tensor2D* t : z.parameters()) {
        t->fill(0.0);
    }
    return z;
}

namespace {

struct BlockStash {
    Tensor2D x_in;
    Tensor2D n1;
    std::vector<double> ln1_mean, ln1_rstd;
    Tensor2D q, k, v;
    std::vector<Tensor2D> probs;
    Tensor2D concat;
    Tensor2D x_mid;
    Tensor2D n2;
    std::vector<double> ln2_mean, ln2_rstd;
    Tensor2D h_pre, h_act;
};

void col_sum_acc(const Tensor2D& x, Tensor2D& acc) {
    for (std::size_t r = 0; r < x.rows; ++r) {
        const double* xr = x.row(r);
        double* a = acc.row(0);
        for (std::size_t c = 0; c < x.cols; ++c) {
            a[c] += xr[c];
        }
    }
}

// dq/dk/dv from stashed attention probabilities.
void attention_backward(const ModelConfig& cfg, const BlockStash& st, const Tensor2D& dconcat,
                        Tensor2D& dq, Tensor2D& dk, Tensor2D& dv) {
    const std::size_t t = st.q.rows;
    const std::size_t hd = cfg.head_dim();
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
    std::vector<double> dP(t);
    for (std::size_t h = 0; h < cfg.head_count; ++h) {
        const std::size_t off = h * hd;
        const Tensor2D& probs = st.probs[h];
        for (std::size_t i = 0; i < t; ++i) {
            const double* dci = dconcat.row(i) + off;
            const double* pi = probs.row(i);
            double sum_dpp = 0.0;
            for (std::size_t j = 0; j <= i; ++j) {
                const double* vj = st.v.row(j) + off;
                double acc = 0.0;
                for (std::size_t p = 0; p < hd; ++p) {
                    acc += dci[p] * vj[p];
                }
                dP[j] = acc;
                sum_dpp += acc * pi[j];
                double* dvj = dv.row(j) + off;
                const double pij = pi[j];
                for (std::size_t p = 0; p < hd; ++p) {
                    dvj[p] += pij * dci[p];
                }
            }
            double* dqi = dq.row(i) + off;
            const double* qi = st.q.row(i) + off;
            for (std::size_t j = 0; j <= i; ++j) {
                const double ds = pi[j] * (dP[j] - sum_dpp) * inv_sqrt;
                const double* kj = st.k.row(j) + off;
                double* dkj = dk.row(j) + off;
                for (std::size_t p = 0; p < hd; ++p) {
                    dqi[p] += ds * kj[p];
                    dkj[p] += ds * qi[p];
                }
            }
        }
    }
}

}  // namespace

double lm_loss_and_grads(const ModelWeights& w, const std::vector<TokenId>& tokens,
                         std::size_t loss_start, const std::vector<Intervention>& interventions,
                         ModelWeights* weight_grads,
                         std::vector<std::vector<double>>* intervention_grads, double grad_scale,
                         std::size_t* target_count) {
    const ModelConfig& cfg = w.config;
    validate_tokens(cfg, tokens);
    validate_interventions(cfg, interventions);
    const std::size_t t = tokens.size();
    if (loss_start < 1 || loss_start >= t) {
        throw std::invalid_argument("lm_loss_and_grads: loss_start out of range");
    }
    if (intervention_grads && intervention_grads->size() != interventions.size()) {
        throw std::invalid_argument("lm_loss_and_grads: intervention grad sink size mismatch");
    }

    const std::size_t d = cfg.model_dim;
    const std::size_t layers = cfg.layer_count;

    // ---- forward with stashes ----
    std::vector<BlockStash> stash(layers);
    Tensor2D x;
    embed_tokens(w, tokens, x);
    for (std::size_t l = 0; l < layers; ++l) {
        BlockStash& st = stash[l];
        const BlockWeights& b = w.blocks[l];
        st.x_in = x;
        layer_norm_rows(x, b.ln1_g, b.ln1_b, st.n1, &st.ln1_mean, &st.ln1_rstd);
        mm(st.n1, b.wq, st.q);
        add_row_bias(st.q, b.bq);
        mm(st.n1, b.wk, st.k);
        add_row_bias(st.k, b.bk);
        mm(st.n1, b.wv, st.v);
        add_row_bias(st.v, b.bv);
        causal_attention(cfg, st.q, st.k, st.v, st.concat, &st.probs);
        Tensor2D attn_out;
        mm(st.concat, b.wo, attn_out);
        add_row_bias(attn_out, b.bo);
        numcore::axpy(1.0, attn_out, x);
        st.x_mid = x;
        layer_norm_rows(x, b.ln2_g, b.ln2_b, st.n2, &st.ln2_mean, &st.ln2_rstd);
        mm(st.n2, b.w1, st.h_pre);
        add_row_bias(st.h_pre, b.b1);
        st.h_act.rows = st.h_pre.rows;
        st.h_act.cols = st.h_pre.cols;
        st.h_act.data.resize(st.h_pre.data.size());
        for (std::size_t i = 0; i < st.h_pre.data.size(); ++i) {
            st.h_act.data[i] = mlp_act(st.h_pre.data[i]);
        }
        Tensor2D mlp_out;
        mm(st.h_act, b.w2, mlp_out);
        add_row_bias(mlp_out, b.b2);
        numcore::axpy(1.0, mlp_out, x);
        for (const auto& iv : interventions) {
            if (iv.layer == l) {
                apply_intervention(x, iv);
            }
        }
    }
    const Tensor2D x_final = x;
    Tensor2D n_f;
    std::vector<double> lnf_mean, lnf_rstd;
    layer_norm_rows(x_final, w.lnf_g, w.lnf_b, n_f, &lnf_mean, &lnf_rstd);

    // ---- loss over target rows, dlogits folded straight into dn_f ----
    const std::size_t vocab = cfg.vocab_size;
    std::vector<double> logits(vocab);
    Tensor2D dn_f(t, d, 0.0);
    double loss_sum = 0.0;
    const std::size_t n_targets = t - loss_start;
    if (target_count) {
        *target_count = n_targets;
    }
    const bool need_backward = weight_grads != nullptr ||
                               (intervention_grads != nullptr && !interventions.empty());
    for (std::size_t pos = loss_start; pos < t; ++pos) {
        const std::size_t r = pos - 1;
        const double* nr = n_f.row(r);
        for (std::size_t c = 0; c < vocab; ++c) {
            logits[c] = w.bu.at(0, c);
        }
        for (std::size_t p = 0; p < d; ++p) {
            const double np = nr[p];
            const double* wr = w.wu.row(p);
            for (std::size_t c = 0; c < vocab; ++c) {
                logits[c] += np * wr[c];
            }
        }
        const double lse = numcore::log_sum_exp(logits);
        loss_sum += lse - logits[tokens[pos]];
        if (!need_backward) {
            continue;
        }
        // dlogits = softmax - onehot, scaled
        for (std::size_t c = 0; c < vocab; ++c) {
            logits[c] = std::exp(logits[c] - lse) * grad_scale;
        }
        logits[tokens[pos]] -= grad_scale;
        if (weight_grads) {
            double* dbu = weight_grads->bu.row(0);
            for (std::size_t c = 0; c < vocab; ++c) {
                dbu[c] += logits[c];
            }
        }
        double* dnr = dn_f.row(r);
        for (std::size_t p = 0; p < d; ++p) {
            const double* wr = w.wu.row(p);
            double acc = 0.0;
            for (std::size_t c = 0; c < vocab; ++c) {
                acc += logits[c] * wr[c];
            }
            dnr[p] = acc;
            if (weight_grads) {
                double* dwr = weight_grads->wu.row(p);
                const double np = nr[p];
                for (std::size_t c = 0; c < vocab; ++c) {
                    dwr[c] += np * logits[c];
                }
            }
        }
    }
    if (!need_backward) {
        return loss_sum;
    }

    // ---- backward ----
    Tensor2D dx(t, d, 0.0);
    layer_norm_backward_rows(x_final, w.lnf_g, lnf_mean, lnf_rstd, dn_f, dx,
                             weight_grads ? &weight_grads->lnf_g : nullptr,
                             weight_grads ? &weight_grads->lnf_b : nullptr);

    std::size_t lowest_needed = 0;
    if (!weight_grads) {
        lowest_needed = layers;  // stop as soon as vector grads are collected
        for (const auto& iv : interventions) {
            lowest_needed = std::min(lowest_needed, iv.layer);
        }
    }

    for (std::size_t li = layers; li-- > 0;) {
        // Interventions sit after block li; additive, so dx passes through
        // while the vector collects the window-summed gradient.
        if (intervention_grads) {
            for (std::size_t ii = 0; ii < interventions.size(); ++ii) {
                const auto& iv = interventions[ii];
                if (iv.layer != li) {
                    continue;
                }
                const auto [r0, r1] = window_rows(t, iv.window);
                auto& sink = (*intervention_grads)[ii];
                for (std::size_t r = r0; r < r1; ++r) {
                    const double* dxr = dx.row(r);
                    for (std::size_t c = 0; c < d; ++c) {
                        sink[c] += iv.coefficient * dxr[c];
                    }
                }
            }
        }
        if (!weight_grads && li == lowest_needed) {
            return loss_sum;
        }

        const BlockStash& st = stash[li];
        const BlockWeights& b = w.blocks[li];
        BlockWeights* gb = weight_grads ? &weight_grads->blocks[li] : nullptr;

        // MLP: x_out = x_mid + W2 act(W1 n2 + b1) + b2
        Tensor2D dh_act(t, cfg.mlp_dim(), 0.0);
        numcore::matmul_nt_acc(dx, b.w2, dh_act);
        if (gb) {
            numcore::matmul_tn_acc(st.h_act, dx, gb->w2);
            col_sum_acc(dx, gb->b2);
        }
        for (std::size_t i = 0; i < dh_act.data.size(); ++i) {
            dh_act.data[i] *= mlp_act_deriv(st.h_pre.data[i]);
        }
        Tensor2D dn2(t, d, 0.0);
        numcore::matmul_nt_acc(dh_act, b.w1, dn2);
        if (gb) {
            numcore::matmul_tn_acc(st.n2, dh_act, gb->w1);
            col_sum_acc(dh_act, gb->b1);
        }
        // dx currently holds the gradient at x_out; residual passthrough
        // keeps it as the base for x_mid, LN2 adds its contribution.
        layer_norm_backward_rows(st.x_mid, b.ln2_g, st.ln2_mean, st.ln2_rstd, dn2, dx,
                                 gb ? &gb->ln2_g : nullptr, gb ? &gb->ln2_b : nullptr);

        // Attention: x_mid = x_in + Wo concat + bo
        Tensor2D dconcat(t, d, 0.0);
        numcore::matmul_nt_acc(dx, b.wo, dconcat);
        if (gb) {
            numcore::matmul_tn_acc(st.concat, dx, gb->wo);
            col_sum_acc(dx, gb->bo);
        }
        Tensor2D dq(t, d, 0.0), dk(t, d, 0.0), dv(t, d, 0.0);
        attention_backward(cfg, st, dconcat, dq, dk, dv);
        Tensor2D dn1(t, d, 0.0);
        numcore::matmul_nt_acc(dq, b.wq, dn1);
        numcore::matmul_nt_acc(dk, b.wk, dn1);
        numcore::matmul_nt_acc(dv, b.wv, dn1);
        if (gb) {
            numcore::matmul_tn_acc(st.n1, dq, gb->wq);
            col_sum_acc(dq, gb->bq);
            numcore::matmul_tn_acc(st.n1, dk, gb->wk);
            col_sum_acc(dk, gb->bk);
            numcore::matmul_tn_acc(st.n1, dv, gb->wv);
            col_sum_acc(dv, gb->bv);
        }
        layer_norm_backward_rows(st.x_in, b.ln1_g, st.ln1_mean, st.ln1_rstd, dn1, dx,
                                 gb ? &gb->ln1_g : nullptr, gb ? &gb->ln1_b : nullptr);
    }

    if (weight_grads) {
        for (std::size_t i = 0; i < t; ++i) {
            const double* dxr = dx.row(i);
            double* dte = weight_grads->tok_emb.row(tokens[i]);
            double* dpe = weight_grads->pos_emb.row(i);
            for (std::size_t c = 0; c < d; ++c) {
                dte[c] += dxr[c];
                dpe[c] += dxr[c];
            }
        }
    }
    return loss_sum;
}

TrainLmResult train_lm(ModelWeights& w, const std::vector<std::vector<TokenId>>& sequences,
                       const TrainLmConfig& cfg, const std::vector<std::size_t>* loss_starts) {
    if (sequences.empty()) {
        throw std::invalid_argument("train_lm: empty corpus");
    }
    if (loss_starts && loss_starts->size() != sequences.size()) {
        throw std::invalid_argument("train_lm: loss_starts size mismatch");
    }
    for (std::size_t i = 0; i < sequences.size(); ++i) {
        const auto& s = sequences[i];
        if (s.size() < 2) {
            throw std::invalid_argument("train_lm: sequence too short to train on");
        }
        if (s.size() > w.config.context_length) {
            throw std::invalid_argument("train_lm: sequence exceeds context length");
        }
        if (loss_starts && ((*loss_starts)[i] < 1 || (*loss_starts)[i] >= s.size())) {
            throw std::invalid_argument("train_lm: loss start out of range");
        }
    }
    auto start_of = [&](std::size_t i) { return loss_starts ? (*loss_starts)[i] : 1; };

    TrainLmResult result;
    if (cfg.steps == 0) {
        return result;
    }

    SeededRng rng(cfg.seed);
    std::vector<std::size_t> order = rng.permutation(sequences.size());
    std::size_t cursor = 0;

    ModelWeights grads = zeros_like(w);
    auto params = w.parameters();
    auto gparams = grads.parameters();
    std::vector<AdamState> opt(params.size());

    // cosine decay to 10% of the peak rate
    auto lr_at = [&](std::size_t step) {
        const double t = static_cast<double>(step) / static_cast<double>(cfg.steps);
        return cfg.lr * (0.55 + 0.45 * std::cos(3.141592653589793 * t));
    };

    for (std::size_t step = 0; step < cfg.steps; ++step) {
        std::vector<std::size_t> batch;
        for (std::size_t i = 0; i < cfg.batch_size; ++i) {
            if (cursor >= order.size()) {
                order = rng.permutation(sequences.size());
                cursor = 0;
            }
            batch.push_back(order[cursor++]);
        }
        std::size_t total_targets = 0;
        for (std::size_t b : batch) {
            total_targets += sequences[b].size() - start_of(b);
        }
        const double scale = 1.0 / static_cast<double>(total_targets);

        for (Tensor2D* g : gparams) {
            g->fill(0.0);
        }
        double loss_sum = 0.0;
        for (std::size_t b : batch) {
            loss_sum += lm_loss_and_grads(w, sequences[b], start_of(b), {}, &grads, nullptr,
                                          scale, nullptr);
        }
        const double loss = loss_sum * scale;
        if (!std::isfinite(loss)) {
            throw std::runtime_error("train_lm: loss diverged at step " + std::to_string(step));
        }
        result.loss_curve.push_back(loss);
        for (std::size_t i = 0; i < params.size(); ++i) {
            numcore::adam_step(*params[i], *gparams[i], opt[i], lr_at(step));
        }
        if (cfg.log_every != 0 && (step % cfg.log_every == 0 || step + 1 == cfg.steps)) {
            std::fprintf(stderr, "[train_lm] step %zu/%zu loss %.4f\n", step + 1, cfg.steps, loss);
        }
    }
    return result;
}

}  // namespace steerlab::model
