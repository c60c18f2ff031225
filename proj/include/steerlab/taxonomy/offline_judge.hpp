#pragma once

#include <map>
#include <string>
#include <vector>

#include "steerlab/taxonomy/judge.hpp"

namespace steerlab::taxonomy {

// Deterministic lexical judge: tf-idf profiles against a background
// corpus, cosine affinity for classification and ratings. Exists so CI
// and grid searches never need network access or credentials.
class OfflineJudge : public Judge {
public:
    // background: sentences used for document frequencies (typically all
    // labeled sentences under evaluation). May be empty.
    explicit OfflineJudge(const std::vector<std::string>& background,
                          double classify_threshold = 0.2);

    ClusterDescription describe_cluster(std::size_t cluster_id,
                                        const std::vector<std::string>& top_exemplars,
                                        const std::vector<std::string>& random_exemplars) override;
    std::optional<bool> classify(const Category& category, const std::string& sentence) override;
    std::optional<int> rate_fit(const Category& category, const std::string& sentence) override;
    std::optional<int> rate_similarity(const Category& a, const Category& b) override;

    // Sparse L2-normalized tf-idf vector; exposed for fixture tests.
    std::map<std::string, double> tfidf(const std::vector<std::string>& sentences) const;
    double affinity(const Category& category, const std::string& sentence) const;

    static std::vector<std::string> terms(const std::string& text);

private:
    double idf(const std::string& term) const;

    std::map<std::string, std::size_t> doc_freq_;
    std::size_t doc_count_ = 0;
    double classify_threshold_;
};

}  // namespace steerlab::taxonomy
