#include "steerlab/taxonomy/offline_judge.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace steerlab::taxonomy {

std::vector<std::string> OfflineJudge::terms(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
            cur.push_back(c);
        } else if (c >= 'A' && c <= 'Z') {
            cur.push_back(static_cast<char>(c - 'A' + 'a'));
        } else {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
        }
    }
    if (!cur.empty()) {
        out.push_back(cur);
    }
    return out;
}

OfflineJudge::OfflineJudge(const std::vector<std::string>& background, double classify_threshold)
    : classify_threshold_(classify_threshold) {
    for (const auto& doc : background) {
        std::set<std::string> seen;
        for (const auto& t : terms(doc)) {
            seen.insert(t);
        }
        for (const auto& t : seen) {
            doc_freq_[t] += 1;
        }
        ++doc_count_;
    }
}

double OfflineJudge::idf(const std::string& term) const {
    auto it = doc_freq_.find(term);
    const double df = it == doc_freq_.end() ? 0.0 : static_cast<double>(it->second);
    return std::log((1.0 + static_cast<double>(doc_count_)) / (1.0 + df)) + 1.0;
}

std::map<std::string, double> OfflineJudge::tfidf(const std::vector<std::string>& sentences) const {
    std::map<std::string, double> weights;
    for (const auto& s : sentences) {
        for (const auto& t : terms(s)) {
            weights[t] += 1.0;
        }
    }
    double norm2 = 0.0;
    for (auto& [term, w] : weights) {
        w *= idf(term);
        norm2 += w * w;
    }
    if (norm2 > 0.0) {
        const double inv = 1.0 / std::sqrt(norm2);
        for (auto& [term, w] : weights) {
            w *= inv;
        }
    }
    return weights;
}

namespace {

double sparse_cosine(const std::map<std::string, double>& a, const std::map<std::string, double>& b) {
    // both are L2-normalized
    double dot = 0.0;
    for (const auto& [term, w] : a) {
        auto it = b.find(term);
        if (it != b.end()) {
            dot += w * it->second;
        }
    }
    return dot;
}

}  // namespace

double OfflineJudge::affinity(const Category& category, const std::string& sentence) const {
    return sparse_cosine(tfidf(category.all_exemplars()), tfidf({sentence}));
}

ClusterDescription OfflineJudge::describe_cluster(std::size_t cluster_id,
                                                  const std::vector<std::string>& top_exemplars,
                                                  const std::vector<std::string>& random_exemplars) {
    std::vector<std::string> exemplars = top_exemplars;
    exemplars.insert(exemplars.end(), random_exemplars.begin(), random_exemplars.end());
    const auto profile = tfidf(exemplars);
    // top 3 terms by weight; lexicographic on ties (map order breaks ties)
    std::vector<std::pair<std::string, double>> ranked(profile.begin(), profile.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    std::string top_terms;
    for (std::size_t i = 0; i < ranked.size() && i < 3; ++i) {
        if (!top_terms.empty()) {
            top_terms += ", ";
        }
        top_terms += ranked[i].first;
    }
    ClusterDescription desc;
    desc.title = "cluster-" + std::to_string(cluster_id) + ": top terms " + top_terms;
    desc.description =
        "Sentences in this cluster share the terms: " + top_terms + ".";
    return desc;
}

std::optional<bool> OfflineJudge::classify(const Category& category, const std::string& sentence) {
    return affinity(category, sentence) >= classify_threshold_;
}

std::optional<int> OfflineJudge::rate_fit(const Category& category, const std::string& sentence) {
    const double a = affinity(category, sentence);
    const double scaled = std::min(1.0, a / 0.5);
    return static_cast<int>(std::lround(scaled * 10.0));
}

std::optional<int> OfflineJudge::rate_similarity(const Category& a, const Category& b) {
    const double cos = sparse_cosine(tfidf(a.all_exemplars()), tfidf(b.all_exemplars()));
    return static_cast<int>(std::lround(std::clamp(cos, 0.0, 1.0) * 10.0));
}

}  // namespace steerlab::taxonomy
