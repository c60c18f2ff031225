#include "steerlab/taxonomy/scores.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <json.hpp>

namespace steerlab::taxonomy {

using nlohmann::json;

double consistency_f1(Judge& judge, const std::vector<Category>& categories,
                      const std::vector<std::vector<LabeledSample>>& samples_per_category) {
    if (samples_per_category.size() != categories.size()) {
        throw std::invalid_argument("consistency_f1: sample sets must match categories");
    }
    double sum = 0.0;
    std::size_t counted = 0;
    for (std::size_t ci = 0; ci < categories.size(); ++ci) {
        const auto& samples = samples_per_category[ci];
        bool has_pos = false, has_neg = false;
        for (const auto& s : samples) {
            (s.is_positive ? has_pos : has_neg) = true;
        }
        if (!has_pos || !has_neg) {
            throw std::invalid_argument(
                "consistency_f1: each category needs positive and negative samples");
        }
        std::size_t tp = 0, fp = 0, fn = 0;
        bool failed = false;
        for (const auto& s : samples) {
            const auto verdict = judge.classify(categories[ci], s.text);
            if (!verdict) {
                failed = true;
                break;
            }
            if (*verdict && s.is_positive) {
                ++tp;
            } else if (*verdict && !s.is_positive) {
                ++fp;
            } else if (!*verdict && s.is_positive) {
                ++fn;
            }
        }
        if (failed) {
            std::fprintf(stderr, "[taxonomy] judge failed on category %zu; skipped\n",
                         categories[ci].id);
            continue;
        }
        const double precision = (tp + fp) == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp);
        const double recall = (tp + fn) == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn);
        const double f1 =
            (precision + recall) == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
        sum += f1;
        ++counted;
    }
    return counted == 0 ? 0.0 : sum / static_cast<double>(counted);
}

double completeness_score(Judge& judge, const std::vector<Category>& categories,
                          const std::vector<std::pair<std::string, std::size_t>>& assignments) {
    if (assignments.empty()) {
        throw std::invalid_argument("completeness_score: need at least one labeled sentence");
    }
    double sum = 0.0;
    std::size_t counted = 0;
    for (const auto& [text, cat] : assignments) {
        if (cat >= categories.size()) {
            throw std::invalid_argument("completeness_score: category index out of range");
        }
        const auto rating = judge.rate_fit(categories[cat], text);
        if (!rating) {
            std::fprintf(stderr, "[taxonomy] unparseable completeness rating; sentence skipped\n");
            continue;
        }
        sum += static_cast<double>(*rating) / 10.0;
        ++counted;
    }
    return counted == 0 ? 0.0 : sum / static_cast<double>(counted);
}

double independence_score(Judge& judge, const std::vector<Category>& categories,
                          double threshold) {
    if (categories.size() < 2) {
        throw std::invalid_argument("independence_score: need at least two categories");
    }
    std::size_t distinct = 0, rated = 0;
    for (std::size_t i = 0; i < categories.size(); ++i) {
        for (std::size_t j = i + 1; j < categories.size(); ++j) {
            const auto sim = judge.rate_similarity(categories[i], categories[j]);
            if (!sim) {
                std::fprintf(stderr, "[taxonomy] judge failed on pair (%zu, %zu); excluded\n", i, j);
                continue;
            }
            const double orthogonality = 1.0 - static_cast<double>(*sim) / 10.0;
            if (orthogonality > threshold) {
                ++distinct;
            }
            ++rated;
        }
    }
    return rated == 0 ? 0.0 : static_cast<double>(distinct) / static_cast<double>(rated);
}

DecoderOrthogonality decoder_orthogonality(const sae::SaeParams& sae) {
    const std::size_t n = sae.dict_size, d = sae.input_dim;
    if (n < 2) {
        throw std::invalid_argument("decoder_orthogonality: need at least two columns");
    }
    std::vector<double> norms(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t c = 0; c < d; ++c) {
            norms[j] += sae.w_dec.at(c, j) * sae.w_dec.at(c, j);
        }
        norms[j] = std::sqrt(norms[j]);
        if (norms[j] == 0.0) {
            throw std::runtime_error("decoder_orthogonality: zero-norm decoder column");
        }
    }
    DecoderOrthogonality out;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double dot = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                dot += sae.w_dec.at(c, i) * sae.w_dec.at(c, j);
            }
            const double abs_cos = std::fabs(dot / (norms[i] * norms[j]));
            out.avg_abs_cos += abs_cos;
            out.max_abs_cos = std::max(out.max_abs_cos, abs_cos);
            ++pairs;
        }
    }
    out.avg_abs_cos /= static_cast<double>(pairs);
    return out;
}

double combined_score(double consistency, double completeness, double independence) {
    return (consistency + completeness + independence) / 3.0;
}

MinMaxResult min_max_normalize(const std::vector<double>& raw) {
    MinMaxResult r;
    if (raw.empty()) {
        return r;
    }
    double lo = raw[0], hi = raw[0];
    for (double v : raw) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi == lo) {
        r.degenerate = true;
        r.normalized = raw;
        return r;
    }
    r.normalized.reserve(raw.size());
    for (double v : raw) {
        r.normalized.push_back((v - lo) / (hi - lo));
    }
    return r;
}

namespace {

json category_to_json(const Category& c) {
    json j;
    j["id"] = c.id;
    j["title"] = c.title;
    j["description"] = c.description;
    j["top_exemplars"] = c.top_exemplars;
    j["random_exemplars"] = c.random_exemplars;
    json refs = json::array();
    for (const auto& [trace, idx] : c.exemplar_refs) {
        refs.push_back(json::array({trace, idx}));
    }
    j["exemplar_refs"] = refs;
    j["degraded"] = c.degraded;
    return j;
}

Category category_from_json(const json& j) {
    Category c;
    c.id = j.at("id").get<std::size_t>();
    c.title = j.at("title").get<std::string>();
    c.description = j.at("description").get<std::string>();
    c.top_exemplars = j.at("top_exemplars").get<std::vector<std::string>>();
    c.random_exemplars = j.at("random_exemplars").get<std::vector<std::string>>();
    for (const auto& r : j.at("exemplar_refs")) {
        c.exemplar_refs.emplace_back(r.at(0).get<std::string>(), r.at(1).get<std::size_t>());
    }
    c.degraded = j.value("degraded", false);
    return c;
}

}  // namespace

std::string report_to_json(const TaxonomyReport& report) {
    json j;
    j["model_id"] = report.model_id;
    j["layer"] = report.layer;
    j["dict_size"] = report.dict_size;
    json cats = json::array();
    for (const auto& c : report.categories) {
        cats.push_back(category_to_json(c));
    }
    j["categories"] = cats;
    j["consistency"] = report.consistency;
    j["completeness"] = report.completeness;
    j["independence"] = report.independence;
    j["combined"] = report.combined;
    j["decoder_avg_abs_cos"] = report.decoder_avg_abs_cos;
    j["decoder_max_abs_cos"] = report.decoder_max_abs_cos;
    j["failed"] = report.failed;
    j["error"] = report.error;
    return j.dump(2);
}

TaxonomyReport report_from_json(const std::string& text) {
    const json j = json::parse(text);
    TaxonomyReport r;
    r.model_id = j.at("model_id").get<std::string>();
    r.layer = j.at("layer").get<std::size_t>();
    r.dict_size = j.at("dict_size").get<std::size_t>();
    for (const auto& c : j.at("categories")) {
        r.categories.push_back(category_from_json(c));
    }
    r.consistency = j.at("consistency").get<double>();
    r.completeness = j.at("completeness").get<double>();
    r.independence = j.at("independence").get<double>();
    r.combined = j.at("combined").get<double>();
    r.decoder_avg_abs_cos = j.at("decoder_avg_abs_cos").get<double>();
    r.decoder_max_abs_cos = j.at("decoder_max_abs_cos").get<double>();
    r.failed = j.value("failed", false);
    r.error = j.value("error", std::string());
    return r;
}

}  // namespace steerlab::taxonomy
