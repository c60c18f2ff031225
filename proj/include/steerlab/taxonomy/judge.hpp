#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace steerlab::taxonomy {

// One reasoning category discovered by an SAE: latent index, judge-written
// title/description, and its exemplar sentences (top-activating + random).
struct Category {
    std::size_t id = 0;
    std::string title;
    std::string description;
    std::vector<std::string> top_exemplars;
    std::vector<std::string> random_exemplars;
    // (trace id, sentence index) provenance, parallel to top then random.
    std::vector<std::pair<std::string, std::size_t>> exemplar_refs;
    bool degraded = false;  // description came from a failed judge call

    std::vector<std::string> all_exemplars() const {
        std::vector<std::string> out = top_exemplars;
        out.insert(out.end(), random_exemplars.begin(), random_exemplars.end());
        return out;
    }
};

struct ClusterDescription {
    std::string title;
    std::string description;
    bool degraded = false;
};

// Scoring backend. The offline heuristic implementation is fully
// deterministic; the remote one talks to a chat-completions endpoint.
// nullopt marks a failed/unusable judgment: callers skip and log.
class Judge {
public:
    virtual ~Judge() = default;

    virtual ClusterDescription describe_cluster(std::size_t cluster_id,
                                                const std::vector<std::string>& top_exemplars,
                                                const std::vector<std::string>& random_exemplars) = 0;

    // Does the sentence belong to the category?
    virtual std::optional<bool> classify(const Category& category, const std::string& sentence) = 0;

    // How well does the sentence fit its assigned category, 0-10?
    virtual std::optional<int> rate_fit(const Category& category, const std::string& sentence) = 0;

    // How similar are two categories' functions, 0-10?
    virtual std::optional<int> rate_similarity(const Category& a, const Category& b) = 0;
};

}  // namespace steerlab::taxonomy
