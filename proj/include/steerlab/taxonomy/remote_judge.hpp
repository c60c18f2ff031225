#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "steerlab/taxonomy/judge.hpp"

namespace steerlab::taxonomy {

struct RemoteJudgeConfig {
    std::string base_url = "http://127.0.0.1:8080";
    std::string path = "/v1/chat/completions";
    std::string model = "judge-mini";           // classification / rating tasks
    std::string describe_model = "judge-large";  // title + description generation
    double temperature = 0.0;
    std::string api_key_env = "STEERLAB_JUDGE_API_KEY";
    int timeout_seconds = 30;
    int max_retries = 3;
    int retry_backoff_ms = 250;  // doubles per attempt

    // When set, every request/response pair is appended as JSON-lines.
    std::string transcript_path;
    // When set, responses are served from a recorded transcript instead of
    // the network (keyed by request hash).
    std::string replay_path;
};

// Chat-completions backend. Sends the prompt resources from prompts.hpp,
// parses the model's reply, and downgrades to nullopt / degraded results
// after max_retries failures instead of throwing.
class RemoteJudge : public Judge {
public:
    explicit RemoteJudge(RemoteJudgeConfig cfg);

    ClusterDescription describe_cluster(std::size_t cluster_id,
                                        const std::vector<std::string>& top_exemplars,
                                        const std::vector<std::string>& random_exemplars) override;
    std::optional<bool> classify(const Category& category, const std::string& sentence) override;
    std::optional<int> rate_fit(const Category& category, const std::string& sentence) override;
    std::optional<int> rate_similarity(const Category& a, const Category& b) override;

    // Raw prompt round-trip; exposed for replay/golden tests.
    std::optional<std::string> complete(const std::string& model, const std::string& prompt);

    static std::optional<std::pair<std::string, std::string>> parse_title_description(
        const std::string& reply);
    static std::optional<bool> parse_yes_no(const std::string& reply);
    static std::optional<int> parse_rating(const std::string& reply);

private:
    RemoteJudgeConfig cfg_;
    std::map<std::uint64_t, std::string> replay_;
    bool replay_mode_ = false;
};

}  // namespace steerlab::taxonomy
