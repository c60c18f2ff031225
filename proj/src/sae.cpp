#include "steerlab/sae/sae.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

#include "steerlab/numcore/adam.hpp"
#include "steerlab/numcore/ops.hpp"
#include "steerlab/numcore/rng.hpp"
#include "steerlab/util/common.hpp"

namespace steerlab::sae {

using numcore::AdamState;
using numcore::SeededRng;

void SaeParams::validate() const {
    if (input_dim == 0 || dict_size == 0 || k == 0 || k > dict_size) {
        throw std::invalid_argument("sae: need 0 < k <= dict_size and input_dim > 0");
    }
    if (w_enc.rows != dict_size || w_enc.cols != input_dim || w_dec.rows != input_dim ||
        w_dec.cols != dict_size || b_enc.cols != input_dim || b_dec.cols != input_dim) {
        throw std::invalid_argument("sae: parameter shapes inconsistent");
    }
}

namespace {

// pre-activation W_enc (x - b_enc); shared by encode and training.
void pre_activation(const SaeParams& sae, const double* x, std::vector<double>& centered,
                    std::vector<double>& pre) {
    const std::size_t d = sae.input_dim, n = sae.dict_size;
    centered.resize(d);
    for (std::size_t c = 0; c < d; ++c) {
        centered[c] = x[c] - sae.b_enc.at(0, c);
    }
    pre.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        const double* wr = sae.w_enc.row(j);
        double acc = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            acc += wr[c] * centered[c];
        }
        pre[j] = acc;
    }
}

}  // namespace

std::vector<double> encode(const SaeParams& sae, const std::vector<double>& x) {
    if (x.size() != sae.input_dim) {
        throw std::invalid_argument("sae encode: dimension mismatch");
    }
    std::vector<double> centered, pre;
    pre_activation(sae, x.data(), centered, pre);
    return numcore::apply_topk(pre, sae.k);
}

std::vector<double> decode(const SaeParams& sae, const std::vector<double>& z) {
    if (z.size() != sae.dict_size) {
        throw std::invalid_argument("sae decode: dimension mismatch");
    }
    std::vector<double> x_hat(sae.input_dim);
    for (std::size_t c = 0; c < sae.input_dim; ++c) {
        x_hat[c] = sae.b_dec.at(0, c);
    }
    for (std::size_t j = 0; j < sae.dict_size; ++j) {
        const double zj = z[j];
        if (zj == 0.0) {
            continue;
        }
        for (std::size_t c = 0; c < sae.input_dim; ++c) {
            x_hat[c] += sae.w_dec.at(c, j) * zj;
        }
    }
    return x_hat;
}

double loss(const SaeParams& sae, const Tensor2D& batch) {
    if (batch.rows == 0) {
        throw std::invalid_argument("sae loss: empty batch");
    }
    if (batch.cols != sae.input_dim) {
        throw std::invalid_argument("sae loss: dimension mismatch");
    }
    double total = 0.0;
    std::vector<double> x(sae.input_dim);
    for (std::size_t r = 0; r < batch.rows; ++r) {
        std::memcpy(x.data(), batch.row(r), sae.input_dim * sizeof(double));
        const auto x_hat = decode(sae, encode(sae, x));
        for (std::size_t c = 0; c < sae.input_dim; ++c) {
            const double diff = x[c] - x_hat[c];
            total += diff * diff;
        }
    }
    return total / static_cast<double>(batch.rows);
}

double learning_rate_for_dict_size(std::size_t n) {
    return 2e-4 / std::sqrt(static_cast<double>(n) / 16384.0);
}

std::optional<SentenceLabel> label_sentence(const SaeParams& sae, const std::vector<double>& x) {
    const auto z = encode(sae, x);
    std::size_t best = 0;
    bool any = false;
    for (std::size_t j = 0; j < z.size(); ++j) {
        if (z[j] != 0.0 && (!any || z[j] > z[best])) {
            best = j;
            any = true;
        }
    }
    if (!any) {
        return std::nullopt;
    }
    return SentenceLabel{best, z[best]};
}

double decoder_norm_deviation(const SaeParams& sae) {
    double worst = 0.0;
    for (std::size_t j = 0; j < sae.dict_size; ++j) {
        double norm2 = 0.0;
        for (std::size_t c = 0; c < sae.input_dim; ++c) {
            const double v = sae.w_dec.at(c, j);
            norm2 += v * v;
        }
        worst = std::max(worst, std::fabs(std::sqrt(norm2) - 1.0));
    }
    return worst;
}

namespace {

void renormalize_decoder(SaeParams& sae) {
    for (std::size_t j = 0; j < sae.dict_size; ++j) {
        double norm2 = 0.0;
        for (std::size_t c = 0; c < sae.input_dim; ++c) {
            const double v = sae.w_dec.at(c, j);
            norm2 += v * v;
        }
        const double norm = std::sqrt(norm2);
        if (norm == 0.0) {
            throw std::runtime_error("train_sae: decoder column collapsed to zero");
        }
        const double inv = 1.0 / norm;
        for (std::size_t c = 0; c < sae.input_dim; ++c) {
            sae.w_dec.at(c, j) *= inv;
        }
    }
}

SaeParams init_sae(std::size_t d, std::size_t n, std::size_t k, std::uint64_t seed) {
    SaeParams sae;
    sae.input_dim = d;
    sae.dict_size = n;
    sae.k = k;
    sae.w_enc = Tensor2D(n, d);
    sae.b_enc = Tensor2D(1, d, 0.0);
    sae.w_dec = Tensor2D(d, n);
    sae.b_dec = Tensor2D(1, d, 0.0);
    SeededRng rng(seed);
    // Decoder columns start as random unit vectors, encoder as their
    // transpose.
    for (std::size_t j = 0; j < n; ++j) {
        double norm2 = 0.0;
        std::vector<double> col(d);
        for (std::size_t c = 0; c < d; ++c) {
            col[c] = rng.next_normal();
            norm2 += col[c] * col[c];
        }
        const double inv = 1.0 / std::sqrt(norm2);
        for (std::size_t c = 0; c < d; ++c) {
            sae.w_dec.at(c, j) = col[c] * inv;
            sae.w_enc.at(j, c) = col[c] * inv;
        }
    }
    return sae;
}

}  // namespace

SaeTrainResult train_sae(const Tensor2D& activations, std::size_t dict_size,
                         const SaeTrainConfig& cfg) {
    const std::size_t rows = activations.rows;
    const std::size_t d = activations.cols;
    const std::size_t batch_size = std::min<std::size_t>(cfg.batch_size, rows);
    if (rows < 2) {
        throw std::invalid_argument("train_sae: too few activation rows");
    }
    if (cfg.k == 0 || cfg.k > dict_size) {
        throw std::invalid_argument("train_sae: need 0 < k <= dict_size");
    }

    // Deterministic 10% holdout by row-content hash.
    std::vector<std::size_t> train_rows, val_rows;
    for (std::size_t r = 0; r < rows; ++r) {
        const std::uint64_t h = fnv1a64(activations.row(r), d * sizeof(double));
        (h % 10 == 0 ? val_rows : train_rows).push_back(r);
    }
    if (val_rows.empty()) {
        val_rows.push_back(train_rows.back());
        train_rows.pop_back();
    }
    if (train_rows.empty()) {
        train_rows.push_back(val_rows.back());
        val_rows.pop_back();
    }

    const double lr = cfg.lr.value_or(learning_rate_for_dict_size(dict_size));
    SaeParams sae = init_sae(d, dict_size, cfg.k, cfg.seed);

    AdamState opt_w_enc(dict_size, d), opt_b_enc(1, d), opt_w_dec(d, dict_size), opt_b_dec(1, d);
    Tensor2D g_w_enc(dict_size, d), g_b_enc(1, d), g_w_dec(d, dict_size), g_b_dec(1, d);

    Tensor2D val(val_rows.size(), d);
    for (std::size_t i = 0; i < val_rows.size(); ++i) {
        std::memcpy(val.row(i), activations.row(val_rows[i]), d * sizeof(double));
    }

    SeededRng rng(cfg.seed ^ 0x9e3779b9ull);
    SaeTrainResult result;
    double best_val = std::numeric_limits<double>::infinity();
    SaeParams best = sae;
    std::size_t bad_epochs = 0;

    std::vector<double> x(d), centered, pre, dz(dict_size);
    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::vector<std::size_t> order = rng.permutation(train_rows.size());
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t end = std::min(order.size(), start + batch_size);
            const double inv_b = 1.0 / static_cast<double>(end - start);
            g_w_enc.fill(0.0);
            g_b_enc.fill(0.0);
            g_w_dec.fill(0.0);
            g_b_dec.fill(0.0);
            for (std::size_t bi = start; bi < end; ++bi) {
                const double* xr = activations.row(train_rows[order[bi]]);
                pre_activation(sae, xr, centered, pre);
                const auto support = numcore::topk_mask(pre, cfg.k);
                // x_hat and residual
                std::vector<double> x_hat(d);
                for (std::size_t c = 0; c < d; ++c) {
                    x_hat[c] = sae.b_dec.at(0, c);
                }
                for (std::size_t j : support) {
                    const double zj = pre[j];
                    for (std::size_t c = 0; c < d; ++c) {
                        x_hat[c] += sae.w_dec.at(c, j) * zj;
                    }
                }
                // dL/dx_hat = 2 (x_hat - x) / B
                std::vector<double> dxh(d);
                for (std::size_t c = 0; c < d; ++c) {
                    dxh[c] = 2.0 * (x_hat[c] - xr[c]) * inv_b;
                    g_b_dec.at(0, c) += dxh[c];
                }
                for (std::size_t j : support) {
                    const double zj = pre[j];
                    double dzj = 0.0;
                    for (std::size_t c = 0; c < d; ++c) {
                        g_w_dec.at(c, j) += dxh[c] * zj;
                        dzj += sae.w_dec.at(c, j) * dxh[c];
                    }
                    // straight-through: gradient flows only through the
                    // selected support
                    double* we = g_w_enc.row(j);
                    const double* wenc = sae.w_enc.row(j);
                    for (std::size_t c = 0; c < d; ++c) {
                        we[c] += dzj * centered[c];
                        g_b_enc.at(0, c) -= dzj * wenc[c];
                    }
                }
            }
            numcore::adam_step(sae.w_enc, g_w_enc, opt_w_enc, lr);
            numcore::adam_step(sae.b_enc, g_b_enc, opt_b_enc, lr);
            numcore::adam_step(sae.w_dec, g_w_dec, opt_w_dec, lr);
            numcore::adam_step(sae.b_dec, g_b_dec, opt_b_dec, lr);
            renormalize_decoder(sae);
            if (cfg.post_step_hook) {
                cfg.post_step_hook(sae);
            }
        }

        const double val_loss = loss(sae, val);
        if (!std::isfinite(val_loss)) {
            throw std::runtime_error("train_sae: validation loss diverged");
        }
        result.validation_curve.push_back(val_loss);
        result.stop_epoch = epoch + 1;
        if (val_loss < best_val) {
            best_val = val_loss;
            best = sae;
            bad_epochs = 0;
        } else {
            ++bad_epochs;
            if (bad_epochs >= cfg.patience) {
                break;
            }
        }
    }
    result.params = best;
    result.params.validate();
    return result;
}

// ---------------------------------------------------------------------------
// Checkpoint: magic "TKSA", version, d, n, k, then float32 W_enc, b_enc,
// W_dec, b_dec.
// ---------------------------------------------------------------------------

namespace {

constexpr std::uint32_t kSaeVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
    if (pos + 4 > in.size()) {
        throw std::runtime_error("sae checkpoint truncated");
    }
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    }
    pos += 4;
    return v;
}

void put_f32(std::string& out, const Tensor2D& t) {
    for (double d : t.data) {
        const float f = static_cast<float>(d);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32(out, bits);
    }
}

void get_f32(const std::string& in, std::size_t& pos, Tensor2D& t) {
    for (double& d : t.data) {
        const std::uint32_t bits = get_u32(in, pos);
        float f;
        std::memcpy(&f, &bits, 4);
        d = static_cast<double>(f);
    }
}

}  // namespace

void save_sae(const SaeParams& sae, const std::string& path) {
    sae.validate();
    std::string out;
    out += "TKSA";
    put_u32(out, kSaeVersion);
    put_u32(out, static_cast<std::uint32_t>(sae.input_dim));
    put_u32(out, static_cast<std::uint32_t>(sae.dict_size));
    put_u32(out, static_cast<std::uint32_t>(sae.k));
    put_f32(out, sae.w_enc);
    put_f32(out, sae.b_enc);
    put_f32(out, sae.w_dec);
    put_f32(out, sae.b_dec);
    write_file(path, out);
}

SaeParams load_sae(const std::string& path) {
    const std::string in = read_file(path);
    if (in.size() < 8 || in.compare(0, 4, "TKSA") != 0) {
        throw std::runtime_error("not an sae checkpoint: " + path);
    }
    std::size_t pos = 4;
    if (get_u32(in, pos) != kSaeVersion) {
        throw std::runtime_error("unsupported sae checkpoint version");
    }
    SaeParams sae;
    sae.input_dim = get_u32(in, pos);
    sae.dict_size = get_u32(in, pos);
    sae.k = get_u32(in, pos);
    sae.w_enc = Tensor2D(sae.dict_size, sae.input_dim);
    sae.b_enc = Tensor2D(1, sae.input_dim);
    sae.w_dec = Tensor2D(sae.input_dim, sae.dict_size);
    sae.b_dec = Tensor2D(1, sae.input_dim);
    get_f32(in, pos, sae.w_enc);
    get_f32(in, pos, sae.b_enc);
    get_f32(in, pos, sae.w_dec);
    get_f32(in, pos, sae.b_dec);
    if (pos != in.size()) {
        throw std::runtime_error("sae checkpoint has trailing bytes");
    }
    sae.validate();
    return sae;
}

}  // namespace steerlab::sae
