#include "steerlab/sae/activations.hpp"

#include <cstring>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "steerlab/util/common.hpp"

namespace steerlab::sae {

using corpus::Span;
using numcore::Tensor2D;

std::vector<double> sentence_activation(const Tensor2D& token_rows, std::size_t first_token,
                                        std::size_t last_token) {
    if (first_token >= last_token || last_token > token_rows.rows) {
        throw std::invalid_argument("sentence_activation: empty or invalid token span");
    }
    std::vector<double> mean(token_rows.cols, 0.0);
    for (std::size_t r = first_token; r < last_token; ++r) {
        const double* row = token_rows.row(r);
        for (std::size_t c = 0; c < token_rows.cols; ++c) {
            mean[c] += row[c];
        }
    }
    const double inv = 1.0 / static_cast<double>(last_token - first_token);
    for (double& v : mean) {
        v *= inv;
    }
    return mean;
}

std::pair<std::size_t, std::size_t> token_range_for_span(const std::vector<Span>& offsets,
                                                         const Span& span) {
    std::size_t first = offsets.size(), last = 0;
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        // overlap of [start, end) ranges
        if (offsets[i].first < span.second && offsets[i].second > span.first) {
            first = std::min(first, i);
            last = std::max(last, i + 1);
        }
    }
    if (first >= last) {
        throw std::invalid_argument("token_range_for_span: span covers no tokens");
    }
    return {first, last};
}

std::map<std::size_t, ActivationDataset> capture_sentence_activations(
    const model::ModelWeights& w, const corpus::Tokenizer& tok,
    const std::vector<corpus::TraceRecord>& records, const std::vector<std::size_t>& layers) {
    std::map<std::size_t, ActivationDataset> out;
    for (std::size_t layer : layers) {
        out[layer].dim = w.config.model_dim;
        out[layer].rows = Tensor2D(0, w.config.model_dim);
    }
    std::vector<model::CaptureRequest> captures;
    captures.reserve(layers.size());
    for (std::size_t layer : layers) {
        captures.push_back({layer, std::nullopt});
    }

    for (const auto& rec : records) {
        const std::string text = rec.full_text();
        std::vector<Span> offsets;
        const auto ids = tok.tokenize_with_offsets(text, offsets);
        const auto result = model::forward_with_capture(w, ids, captures, {});
        const std::size_t shift = rec.trace_offset();
        for (std::size_t si = 0; si < rec.sentences.size(); ++si) {
            const Span sent{rec.sentences[si].first + shift, rec.sentences[si].second + shift};
            const auto [t0, t1] = token_range_for_span(offsets, sent);
            for (std::size_t li = 0; li < layers.size(); ++li) {
                auto& ds = out[layers[li]];
                const auto mean = sentence_activation(result.captures[li], t0, t1);
                const std::size_t r = ds.rows.rows;
                ds.rows.rows += 1;
                ds.rows.data.insert(ds.rows.data.end(), mean.begin(), mean.end());
                (void)r;
                ds.meta.push_back({rec.id, si, layers[li], rec.sentences[si]});
            }
        }
    }
    return out;
}

std::vector<std::string> dataset_sentence_texts(const ActivationDataset& ds,
                                                const std::vector<corpus::TraceRecord>& records) {
    std::unordered_map<std::string, const corpus::TraceRecord*> by_id;
    for (const auto& r : records) {
        by_id[r.id] = &r;
    }
    std::vector<std::string> texts;
    texts.reserve(ds.meta.size());
    for (const auto& m : ds.meta) {
        auto it = by_id.find(m.trace_id);
        if (it == by_id.end()) {
            throw std::runtime_error("dataset_sentence_texts: unknown trace id " + m.trace_id);
        }
        const auto& span = m.span;
        texts.push_back(it->second->trace.substr(span.first, span.second - span.first));
    }
    return texts;
}

namespace {

constexpr std::uint32_t kActvVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
    if (pos + 4 > in.size()) {
        throw std::runtime_error("activation file truncated");
    }
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    }
    pos += 4;
    return v;
}

}  // namespace

void save_activations(const ActivationDataset& ds, const std::string& data_path,
                      const std::string& sidecar_path) {
    std::string out;
    out += "ACTV";
    put_u32(out, kActvVersion);
    put_u32(out, static_cast<std::uint32_t>(ds.rows.rows));
    put_u32(out, static_cast<std::uint32_t>(ds.dim));
    for (double d : ds.rows.data) {
        const float f = static_cast<float>(d);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32(out, bits);
    }
    write_file(data_path, out);

    std::string side;
    for (const auto& m : ds.meta) {
        nlohmann::json j;
        j["trace_id"] = m.trace_id;
        j["sentence_index"] = m.sentence_index;
        j["layer"] = m.layer;
        j["span"] = nlohmann::json::array({m.span.first, m.span.second});
        side += j.dump();
        side += '\n';
    }
    write_file(sidecar_path, side);
}

ActivationDataset load_activations(const std::string& data_path, const std::string& sidecar_path) {
    const std::string in = read_file(data_path);
    if (in.size() < 8 || in.compare(0, 4, "ACTV") != 0) {
        throw std::runtime_error("not an activation dataset: " + data_path);
    }
    std::size_t pos = 4;
    if (get_u32(in, pos) != kActvVersion) {
        throw std::runtime_error("unsupported activation dataset version");
    }
    ActivationDataset ds;
    const std::uint32_t rows = get_u32(in, pos);
    ds.dim = get_u32(in, pos);
    ds.rows = Tensor2D(rows, ds.dim);
    for (double& d : ds.rows.data) {
        const std::uint32_t bits = get_u32(in, pos);
        float f;
        std::memcpy(&f, &bits, 4);
        d = static_cast<double>(f);
    }
    if (pos != in.size()) {
        throw std::runtime_error("activation dataset has trailing bytes");
    }
    for (const auto& line : split_lines(read_file(sidecar_path))) {
        if (line.empty()) {
            continue;
        }
        auto j = nlohmann::json::parse(line);
        ActivationMeta m;
        m.trace_id = j.at("trace_id").get<std::string>();
        m.sentence_index = j.at("sentence_index").get<std::size_t>();
        m.layer = j.at("layer").get<std::size_t>();
        m.span = {j.at("span").at(0).get<std::size_t>(), j.at("span").at(1).get<std::size_t>()};
        ds.meta.push_back(std::move(m));
    }
    if (ds.meta.size() != ds.rows.rows) {
        throw std::runtime_error("activation sidecar row count mismatch");
    }
    return ds;
}

}  // namespace steerlab::sae
