#include "steerlab/model/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "model_kernels.hpp"
#include "steerlab/numcore/ops.hpp"
#include "steerlab/numcore/rng.hpp"
#include "steerlab/util/common.hpp"

namespace steerlab::model {

using numcore::SeededRng;
using namespace detail;

void ModelConfig::validate() const {
    if (model_dim == 0 || head_count == 0 || model_dim % head_count != 0) {
        throw std::invalid_argument("model config: model_dim must divide by head_count");
    }
    if (layer_count == 0 || context_length == 0 || vocab_size < 2) {
        throw std::invalid_argument("model config: degenerate geometry");
    }
}

namespace {

void fill_normal(Tensor2D& t, SeededRng& rng, double std_dev) {
    for (double& v : t.data) {
        v = rng.next_normal() * std_dev;
    }
}

void fill_sinusoidal(Tensor2D& t, double scale) {
    const std::size_t d = t.cols;
    for (std::size_t pos = 0; pos < t.rows; ++pos) {
        double* row = t.row(pos);
        for (std::size_t c = 0; c < d; ++c) {
            const double freq = std::pow(10000.0, -static_cast<double>(c / 2 * 2) /
                                                      static_cast<double>(d));
            const double angle = static_cast<double>(pos) * freq;
            row[c] = scale * ((c % 2 == 0) ? std::sin(angle) : std::cos(angle));
        }
    }
}

}  // namespace

ModelWeights ModelWeights::init(const ModelConfig& cfg) {
    cfg.validate();
    ModelWeights w;
    w.config = cfg;
    SeededRng rng(cfg.seed);
    const std::size_t d = cfg.model_dim;
    const std::size_t m = cfg.mlp_dim();

    w.tok_emb = Tensor2D(cfg.vocab_size, d);
    fill_normal(w.tok_emb, rng, 0.08);
    w.pos_emb = Tensor2D(cfg.context_length, d);
    fill_sinusoidal(w.pos_emb, 0.1);

    const double proj_std = 0.1;
    const double resid_std = 0.1 / std::sqrt(2.0 * static_cast<double>(cfg.layer_count));
    w.blocks.resize(cfg.layer_count);
    for (auto& b : w.blocks) {
        b.ln1_g = Tensor2D(1, d, 1.0);
        b.ln1_b = Tensor2D(1, d, 0.0);
        b.wq = Tensor2D(d, d);
        fill_normal(b.wq, rng, proj_std);
        b.bq = Tensor2D(1, d, 0.0);
        b.wk = Tensor2D(d, d);
        fill_normal(b.wk, rng, proj_std);
        b.bk = Tensor2D(1, d, 0.0);
        b.wv = Tensor2D(d, d);
        fill_normal(b.wv, rng, proj_std);
        b.bv = Tensor2D(1, d, 0.0);
        b.wo = Tensor2D(d, d);
        fill_normal(b.wo, rng, resid_std);
        b.bo = Tensor2D(1, d, 0.0);
        b.ln2_g = Tensor2D(1, d, 1.0);
        b.ln2_b = Tensor2D(1, d, 0.0);
        b.w1 = Tensor2D(d, m);
        fill_normal(b.w1, rng, proj_std);
        b.b1 = Tensor2D(1, m, 0.0);
        b.w2 = Tensor2D(m, d);
        fill_normal(b.w2, rng, resid_std);
        b.b2 = Tensor2D(1, d, 0.0);
    }
    w.lnf_g = Tensor2D(1, d, 1.0);
    w.lnf_b = Tensor2D(1, d, 0.0);
    w.wu = Tensor2D(d, cfg.vocab_size);
    fill_normal(w.wu, rng, proj_std);
    w.bu = Tensor2D(1, cfg.vocab_size, 0.0);
    return w;
}

std::vector<Tensor2D*> ModelWeights::parameters() {
    std::vector<Tensor2D*> ps;
    ps.push_back(&tok_emb);
    ps.push_back(&pos_emb);
    for (auto& b : blocks) {
        for (Tensor2D* t : {&b.ln1_g, &b.ln1_b, &b.wq, &b.bq, &b.wk, &b.bk, &b.wv, &b.bv, &b.wo,
                            &b.bo, &b.ln2_g, &b.ln2_b, &b.w1, &b.b1, &b.w2, &b.b2}) {
            ps.push_back(t);
        }
    }
    ps.push_back(&lnf_g);
    ps.push_back(&lnf_b);
    ps.push_back(&wu);
    ps.push_back(&bu);
    return ps;
}

std::vector<const Tensor2D*> ModelWeights::parameters() const {
    auto ps = const_cast<ModelWeights*>(this)->parameters();
    return std::vector<const Tensor2D*>(ps.begin(), ps.end());
}

bool ModelWeights::all_finite() const {
    for (const Tensor2D* t : parameters()) {
        if (!t->all_finite()) {
            return false;
        }
    }
    return true;
}

namespace {

struct Scratch {
    Tensor2D n1, q, k, v, concat, attn_out, n2, h_pre, h_act, mlp_out;
};

void apply_block(const BlockWeights& b, const ModelConfig& cfg, Tensor2D& x, Scratch& s) {
    layer_norm_rows(x, b.ln1_g, b.ln1_b, s.n1);
    mm(s.n1, b.wq, s.q);
    add_row_bias(s.q, b.bq);
    mm(s.n1, b.wk, s.k);
    add_row_bias(s.k, b.bk);
    mm(s.n1, b.wv, s.v);
    add_row_bias(s.v, b.bv);
    causal_attention(cfg, s.q, s.k, s.v, s.concat);
    mm(s.concat, b.wo, s.attn_out);
    add_row_bias(s.attn_out, b.bo);
    numcore::axpy(1.0, s.attn_out, x);

    layer_norm_rows(x, b.ln2_g, b.ln2_b, s.n2);
    mm(s.n2, b.w1, s.h_pre);
    add_row_bias(s.h_pre, b.b1);
    s.h_act.rows = s.h_pre.rows;
    s.h_act.cols = s.h_pre.cols;
    s.h_act.data.resize(s.h_pre.data.size());
    for (std::size_t i = 0; i < s.h_pre.data.size(); ++i) {
        s.h_act.data[i] = mlp_act(s.h_pre.data[i]);
    }
    mm(s.h_act, b.w2, s.mlp_out);
    add_row_bias(s.mlp_out, b.b2);
    numcore::axpy(1.0, s.mlp_out, x);
}

// Final layer norm + unembedding. When last_only, logits is 1×V for the
// final position.
void unembed(const ModelWeights& w, const Tensor2D& x, bool all_positions, Tensor2D& logits) {
    Tensor2D n;
    layer_norm_rows(x, w.lnf_g, w.lnf_b, n);
    if (all_positions) {
        mm(n, w.wu, logits);
        add_row_bias(logits, w.bu);
    } else {
        Tensor2D last(1, x.cols);
        std::memcpy(last.row(0), n.row(n.rows - 1), x.cols * sizeof(double));
        mm(last, w.wu, logits);
        add_row_bias(logits, w.bu);
    }
}

}  // namespace

ForwardResult forward_with_capture(const ModelWeights& w, const std::vector<TokenId>& tokens,
                                   const ForwardOptions& opts) {
    const ModelConfig& cfg = w.config;
    validate_tokens(cfg, tokens);
    validate_interventions(cfg, opts.interventions);
    for (const auto& cap : opts.captures) {
        if (cap.layer >= cfg.layer_count) {
            throw std::invalid_argument("capture layer out of range");
        }
    }

    ForwardResult result;
    result.captures.resize(opts.captures.size());

    Tensor2D x;
    embed_tokens(w, tokens, x);
    Scratch s;
    for (std::size_t layer = 0; layer < cfg.layer_count; ++layer) {
        apply_block(w.blocks[layer], cfg, x, s);
        if (opts.zero_residual_after_layer && *opts.zero_residual_after_layer == layer) {
            x.fill(0.0);
        }
        for (const auto& iv : opts.interventions) {
            if (iv.layer == layer) {
                apply_intervention(x, iv);
            }
        }
        for (std::size_t ci = 0; ci < opts.captures.size(); ++ci) {
            const auto& cap = opts.captures[ci];
            if (cap.layer != layer) {
                continue;
            }
            std::size_t r0 = 0, r1 = x.rows;
            if (cap.positions) {
                r0 = cap.positions->first;
                r1 = cap.positions->second;
                if (r0 >= r1 || r1 > x.rows) {
                    throw std::invalid_argument("capture position span out of range");
                }
            }
            Tensor2D& dst = result.captures[ci];
            dst = Tensor2D(r1 - r0, x.cols);
            std::memcpy(dst.data.data(), x.row(r0), (r1 - r0) * x.cols * sizeof(double));
        }
    }
    unembed(w, x, opts.logits_all_positions, result.logits);
    return result;
}

ForwardResult forward_with_capture(const ModelWeights& w, const std::vector<TokenId>& tokens,
                                   const std::vector<CaptureRequest>& captures,
                                   const std::vector<Intervention>& interventions) {
    ForwardOptions opts;
    opts.captures = captures;
    opts.interventions = interventions;
    return forward_with_capture(w, tokens, opts);
}

PrefixState forward_to_layer(const ModelWeights& w, const std::vector<TokenId>& tokens,
                             std::size_t layer, const std::vector<Intervention>& interventions) {
    const ModelConfig& cfg = w.config;
    validate_tokens(cfg, tokens);
    validate_interventions(cfg, interventions);
    if (layer >= cfg.layer_count) {
        throw std::invalid_argument("forward_to_layer: layer out of range");
    }
    for (const auto& iv : interventions) {
        if (iv.layer > layer) {
            throw std::invalid_argument("forward_to_layer: intervention beyond prefix layer");
        }
    }
    PrefixState st;
    st.layer = layer;
    embed_tokens(w, tokens, st.x);
    Scratch s;
    for (std::size_t l = 0; l <= layer; ++l) {
        apply_block(w.blocks[l], cfg, st.x, s);
        for (const auto& iv : interventions) {
            if (iv.layer == l) {
                apply_intervention(st.x, iv);
            }
        }
    }
    return st;
}

std::vector<double> logits_from_prefix(const ModelWeights& w, const PrefixState& state,
                                       const std::vector<Intervention>& at_layer) {
    const ModelConfig& cfg = w.config;
    Tensor2D x = state.x;
    for (const auto& iv : at_layer) {
        if (iv.layer != state.layer) {
            throw std::invalid_argument("logits_from_prefix: intervention layer mismatch");
        }
        apply_intervention(x, iv);
    }
    Scratch s;
    for (std::size_t l = state.layer + 1; l < cfg.layer_count; ++l) {
        apply_block(w.blocks[l], cfg, x, s);
    }
    Tensor2D logits;
    unembed(w, x, false, logits);
    return logits.data;
}

std::vector<double> next_token_logits(const ModelWeights& w, const std::vector<TokenId>& tokens,
                                      const std::vector<Intervention>& interventions) {
    ForwardOptions opts;
    opts.interventions = interventions;
    opts.logits_all_positions = false;
    return forward_with_capture(w, tokens, opts).logits.data;
}

std::size_t argmax_lowest(const std::vector<double>& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) {
            best = i;
        }
    }
    return best;
}

TokenId greedy_next_token(const ModelWeights& w, const std::vector<TokenId>& tokens,
                          const std::vector<Intervention>& interventions) {
    return static_cast<TokenId>(argmax_lowest(next_token_logits(w, tokens, interventions)));
}

double sequence_perplexity(const ModelWeights& w, const std::vector<TokenId>& tokens,
                           std::pair<std::size_t, std::size_t> span) {
    if (span.first >= span.second) {
        throw std::invalid_argument("sequence_perplexity: empty span");
    }
    if (span.first < 1 || span.second > tokens.size()) {
        throw std::invalid_argument("sequence_perplexity: span out of range");
    }
    validate_tokens(w.config, tokens);

    Tensor2D x;
    embed_tokens(w, tokens, x);
    Scratch s;
    for (std::size_t l = 0; l < w.config.layer_count; ++l) {
        apply_block(w.blocks[l], w.config, x, s);
    }
    Tensor2D n;
    layer_norm_rows(x, w.lnf_g, w.lnf_b, n);

    const std::size_t vocab = w.config.vocab_size;
    std::vector<double> logits(vocab);
    double total = 0.0;
    for (std::size_t t = span.first; t < span.second; ++t) {
        const double* nr = n.row(t - 1);
        for (std::size_t c = 0; c < vocab; ++c) {
            logits[c] = w.bu.at(0, c);
        }
        for (std::size_t p = 0; p < w.config.model_dim; ++p) {
            const double np = nr[p];
            const double* wr = w.wu.row(p);
            for (std::size_t c = 0; c < vocab; ++c) {
                logits[c] += np * wr[c];
            }
        }
        total += numcore::log_sum_exp(logits) - logits[tokens[t]];
    }
    return std::exp(total / static_cast<double>(span.second - span.first));
}

std::vector<TokenId> generate_greedy(const ModelWeights& w, std::vector<TokenId> tokens,
                                     std::size_t max_new_tokens, TokenId eos,
                                     const std::vector<Intervention>& interventions) {
    std::vector<TokenId> generated;
    for (std::size_t i = 0; i < max_new_tokens; ++i) {
        if (tokens.size() >= w.config.context_length) {
            break;
        }
        const TokenId next = greedy_next_token(w, tokens, interventions);
        generated.push_back(next);
        tokens.push_back(next);
        if (next == eos) {
            break;
        }
    }
    return generated;
}

// ---------------------------------------------------------------------------
// Checkpoint: magic "TFMW", version, config block, then float32 parameter
// arrays in declaration order, all little-endian.
// ---------------------------------------------------------------------------

namespace {

constexpr std::uint32_t kCkptVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
    if (pos + 4 > in.size()) {
        throw std::runtime_error("checkpoint truncated");
    }
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    }
    pos += 4;
    return v;
}

std::uint64_t get_u64(const std::string& in, std::size_t& pos) {
    if (pos + 8 > in.size()) {
        throw std::runtime_error("checkpoint truncated");
    }
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    }
    pos += 8;
    return v;
}

void put_f32_array(std::string& out, const Tensor2D& t) {
    for (double d : t.data) {
        const float f = static_cast<float>(d);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32(out, bits);
    }
}

void get_f32_array(const std::string& in, std::size_t& pos, Tensor2D& t) {
    for (double& d : t.data) {
        const std::uint32_t bits = get_u32(in, pos);
        float f;
        std::memcpy(&f, &bits, 4);
        d = static_cast<double>(f);
    }
}

}  // namespace

void save_checkpoint(const ModelWeights& w, const std::string& path) {
    std::string out;
    out += "TFMW";
    put_u32(out, kCkptVersion);
    put_u32(out, static_cast<std::uint32_t>(w.config.layer_count));
    put_u32(out, static_cast<std::uint32_t>(w.config.model_dim));
    put_u32(out, static_cast<std::uint32_t>(w.config.head_count));
    put_u32(out, static_cast<std::uint32_t>(w.config.context_length));
    put_u32(out, static_cast<std::uint32_t>(w.config.vocab_size));
    put_u64(out, w.config.seed);
    for (const Tensor2D* t : w.parameters()) {
        put_f32_array(out, *t);
    }
    write_file(path, out);
}

ModelWeights load_checkpoint(const std::string& path) {
    const std::string in = read_file(path);
    if (in.size() < 8 || in.compare(0, 4, "TFMW") != 0) {
        throw std::runtime_error("not a model checkpoint: " + path);
    }
    std::size_t pos = 4;
    const std::uint32_t version = get_u32(in, pos);
    if (version != kCkptVersion) {
        throw std::runtime_error("unsupported checkpoint version");
    }
    ModelConfig cfg;
    cfg.layer_count = get_u32(in, pos);
    cfg.model_dim = get_u32(in, pos);
    cfg.head_count = get_u32(in, pos);
    cfg.context_length = get_u32(in, pos);
    cfg.vocab_size = get_u32(in, pos);
    cfg.seed = get_u64(in, pos);
    ModelWeights w = ModelWeights::init(cfg);
    for (Tensor2D* t : w.parameters()) {
        get_f32_array(in, pos, *t);
    }
    if (pos != in.size()) {
        throw std::runtime_error("checkpoint has trailing bytes");
    }
    return w;
}

}  // namespace steerlab::model
