#include "steerlab/taxonomy/remote_judge.hpp"

#include <cctype>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "steerlab/taxonomy/prompts.hpp"
#include "steerlab/util/common.hpp"

namespace steerlab::taxonomy {

using nlohmann::json;

namespace {

std::string substitute(std::string tmpl, const std::map<std::string, std::string>& vars) {
    for (const auto& [key, value] : vars) {
        const std::string pat = "{" + key + "}";
        std::size_t pos = 0;
        while ((pos = tmpl.find(pat, pos)) != std::string::npos) {
            tmpl.replace(pos, pat.size(), value);
            pos += value.size();
        }
    }
    return tmpl;
}

std::string bullet_list(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) {
        out += "- " + s + "\n";
    }
    if (!out.empty()) {
        out.pop_back();
    }
    return out;
}

std::string request_body(const std::string& model, const std::string& prompt, double temperature) {
    json j;
    j["model"] = model;
    j["temperature"] = temperature;
    j["messages"] = json::array({json{{"role", "user"}, {"content", prompt}}});
    return j.dump();
}

}  // namespace

RemoteJudge::RemoteJudge(RemoteJudgeConfig cfg) : cfg_(std::move(cfg)) {
    if (!cfg_.replay_path.empty()) {
        replay_mode_ = true;
        for (const auto& line : split_lines(read_file(cfg_.replay_path))) {
            if (line.empty()) {
                continue;
            }
            auto j = json::parse(line);
            const std::string req = j.at("request").dump();
            replay_[fnv1a64(req)] = j.at("response").dump();
        }
    }
}

std::optional<std::string> RemoteJudge::complete(const std::string& model,
                                                 const std::string& prompt) {
    const std::string body = request_body(model, prompt, cfg_.temperature);

    std::string response_body;
    if (replay_mode_) {
        auto it = replay_.find(fnv1a64(json::parse(body).dump()));
        if (it == replay_.end()) {
            std::fprintf(stderr, "[judge] replay miss for request; marking failed\n");
            return std::nullopt;
        }
        response_body = it->second;
    } else {
        httplib::Client client(cfg_.base_url);
        client.set_connection_timeout(cfg_.timeout_seconds);
        client.set_read_timeout(cfg_.timeout_seconds);
        httplib::Headers headers;
        if (const char* key = std::getenv(cfg_.api_key_env.c_str())) {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }
        int backoff = cfg_.retry_backoff_ms;
        bool ok = false;
        for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
            auto res = client.Post(cfg_.path, headers, body, "application/json");
            if (res && res->status == 200) {
                response_body = res->body;
                ok = true;
                break;
            }
            std::fprintf(stderr, "[judge] request failed (attempt %d/%d)\n", attempt + 1,
                         cfg_.max_retries + 1);
            if (attempt < cfg_.max_retries) {
                std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
                backoff *= 2;
            }
        }
        if (!ok) {
            return std::nullopt;
        }
    }

    if (!cfg_.transcript_path.empty()) {
        json entry;
        entry["request"] = json::parse(body);
        entry["response"] = json::parse(response_body, nullptr, false);
        std::ofstream out(cfg_.transcript_path, std::ios::app);
        out << entry.dump() << '\n';
    }

    auto parsed = json::parse(response_body, nullptr, false);
    if (parsed.is_discarded()) {
        return std::nullopt;
    }
    try {
        return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
        return std::nullopt;
    }
}

std::optional<std::pair<std::string, std::string>> RemoteJudge::parse_title_description(
    const std::string& reply) {
    const auto tpos = reply.find("Title:");
    const auto dpos = reply.find("Description:");
    if (tpos == std::string::npos || dpos == std::string::npos || dpos <= tpos) {
        return std::nullopt;
    }
    auto trim = [](std::string s) {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
            s.erase(s.begin());
        }
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
            s.pop_back();
        }
        return s;
    };
    std::string title = trim(reply.substr(tpos + 6, dpos - (tpos + 6)));
    std::string desc = trim(reply.substr(dpos + 12));
    if (title.empty()) {
        return std::nullopt;
    }
    return std::make_pair(title, desc);
}

std::optional<bool> RemoteJudge::parse_yes_no(const std::string& reply) {
    for (std::size_t i = 0; i < reply.size(); ++i) {
        const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(reply[i])));
        if (c == 'Y') {
            return true;
        }
        if (c == 'N') {
            return false;
        }
    }
    return std::nullopt;
}

std::optional<int> RemoteJudge::parse_rating(const std::string& reply) {
    for (std::size_t i = 0; i < reply.size(); ++i) {
        if (std::isdigit(static_cast<unsigned char>(reply[i]))) {
            int v = reply[i] - '0';
            if (i + 1 < reply.size() && std::isdigit(static_cast<unsigned char>(reply[i + 1]))) {
                v = v * 10 + (reply[i + 1] - '0');
            }
            if (v >= 0 && v <= 10) {
                return v;
            }
            return std::nullopt;
        }
    }
    return std::nullopt;
}

ClusterDescription RemoteJudge::describe_cluster(std::size_t cluster_id,
                                                 const std::vector<std::string>& top_exemplars,
                                                 const std::vector<std::string>& random_exemplars) {
    const std::string prompt = substitute(prompts::kClusterDescription,
                                          {{"top_exemplars", bullet_list(top_exemplars)},
                                           {"random_exemplars", bullet_list(random_exemplars)}});
    auto reply = complete(cfg_.describe_model, prompt);
    if (reply) {
        if (auto parsed = parse_title_description(*reply)) {
            return {parsed->first, parsed->second, false};
        }
    }
    ClusterDescription degraded;
    degraded.title = "cluster-" + std::to_string(cluster_id) + " (undescribed)";
    degraded.description = "Judge unavailable; cluster kept without a description.";
    degraded.degraded = true;
    return degraded;
}

std::optional<bool> RemoteJudge::classify(const Category& category, const std::string& sentence) {
    const std::string prompt = substitute(prompts::kConsistencyClassify,
                                          {{"title", category.title},
                                           {"description", category.description},
                                           {"examples", bullet_list(category.top_exemplars)},
                                           {"sentence", sentence}});
    auto reply = complete(cfg_.model, prompt);
    if (!reply) {
        return std::nullopt;
    }
    return parse_yes_no(*reply);
}

std::optional<int> RemoteJudge::rate_fit(const Category& category, const std::string& sentence) {
    const std::string prompt = substitute(prompts::kCompletenessRate,
                                          {{"title", category.title},
                                           {"description", category.description},
                                           {"sentence", sentence}});
    auto reply = complete(cfg_.model, prompt);
    if (!reply) {
        return std::nullopt;
    }
    return parse_rating(*reply);
}

std::optional<int> RemoteJudge::rate_similarity(const Category& a, const Category& b) {
    const std::string prompt = substitute(prompts::kIndependenceRate,
                                          {{"title_a", a.title},
                                           {"description_a", a.description},
                                           {"title_b", b.title},
                                           {"description_b", b.description}});
    auto reply = complete(cfg_.model, prompt);
    if (!reply) {
        return std::nullopt;
    }
    return parse_rating(*reply);
}

}  // namespace steerlab::taxonomy
