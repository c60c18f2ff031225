#include "steerlab/taxonomy/grid.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <mutex>

#include <json.hpp>

#include "steerlab/numcore/rng.hpp"
#include "steerlab/util/common.hpp"
#include "steerlab/util/parallel.hpp"
#include "steerlab/util/svg.hpp"

namespace steerlab::taxonomy {

using nlohmann::json;
using numcore::SeededRng;

namespace {

struct RowLabel {
    std::size_t row = 0;
    std::size_t category = 0;
    double activation = 0.0;
};

std::vector<RowLabel> label_rows(const sae::SaeParams& params, const sae::ActivationDataset& data) {
    std::vector<RowLabel> labels;
    std::vector<double> x(data.dim);
    for (std::size_t r = 0; r < data.rows.rows; ++r) {
        std::copy(data.rows.row(r), data.rows.row(r) + data.dim, x.begin());
        if (auto lab = sae::label_sentence(params, x)) {
            labels.push_back({r, lab->category, lab->activation});
        }
    }
    return labels;
}

}  // namespace

TaxonomyReport evaluate_taxonomy(const sae::SaeParams& sae_params,
                                 const sae::ActivationDataset& data,
                                 const std::vector<std::string>& row_texts, Judge& judge,
                                 const GridConfig& cfg, std::size_t layer) {
    if (row_texts.size() != data.rows.rows) {
        throw std::invalid_argument("evaluate_taxonomy: row text count mismatch");
    }
    TaxonomyReport report;
    report.model_id = cfg.model_id;
    report.layer = layer;
    report.dict_size = sae_params.dict_size;

    SeededRng rng = SeededRng::derive(cfg.seed, "taxonomy-" + std::to_string(layer) + "-" +
                                                    std::to_string(sae_params.dict_size));

    const auto labels = label_rows(sae_params, data);
    std::vector<std::vector<const RowLabel*>> by_cat(sae_params.dict_size);
    for (const auto& l : labels) {
        by_cat[l.category].push_back(&l);
    }

    // Exemplars: top activations plus a random sample of the remainder.
    for (std::size_t cat = 0; cat < sae_params.dict_size; ++cat) {
        auto rows = by_cat[cat];
        if (rows.empty()) {
            continue;
        }
        std::stable_sort(rows.begin(), rows.end(), [](const RowLabel* a, const RowLabel* b) {
            return a->activation > b->activation;
        });
        Category c;
        c.id = cat;
        const std::size_t top_n = std::min(cfg.max_top_exemplars, rows.size());
        for (std::size_t i = 0; i < top_n; ++i) {
            c.top_exemplars.push_back(row_texts[rows[i]->row]);
            const auto& meta = data.meta[rows[i]->row];
            c.exemplar_refs.emplace_back(meta.trace_id, meta.sentence_index);
        }
        std::vector<const RowLabel*> rest(rows.begin() + top_n, rows.end());
        const std::size_t rand_n = std::min(cfg.max_random_exemplars, rest.size());
        const auto perm = rng.permutation(rest.size());
        for (std::size_t i = 0; i < rand_n; ++i) {
            c.random_exemplars.push_back(row_texts[rest[perm[i]]->row]);
            const auto& meta = data.meta[rest[perm[i]]->row];
            c.exemplar_refs.emplace_back(meta.trace_id, meta.sentence_index);
        }

        if (cfg.title_repetitions <= 1) {
            const auto desc = judge.describe_cluster(cat, c.top_exemplars, c.random_exemplars);
            c.title = desc.title;
            c.description = desc.description;
            c.degraded = desc.degraded;
        } else {
            std::map<std::string, std::size_t> votes;
            ClusterDescription last;
            for (std::size_t rep = 0; rep < cfg.title_repetitions; ++rep) {
                last = judge.describe_cluster(cat, c.top_exemplars, c.random_exemplars);
                votes[last.title] += 1;
            }
            const auto best = std::max_element(
                votes.begin(), votes.end(),
                [](const auto& a, const auto& b) { return a.second < b.second; });
            c.title = best->first;
            c.description = last.description;
            c.degraded = last.degraded;
        }
        report.categories.push_back(std::move(c));
    }

    if (report.categories.size() < 2) {
        report.failed = true;
        report.error = "fewer than two populated categories";
        return report;
    }

    // Consistency samples: per category, positives from the category and
    // negatives from elsewhere.
    std::vector<std::vector<LabeledSample>> f1_samples;
    std::vector<std::pair<std::string, std::size_t>> completeness_pairs;
    std::vector<const RowLabel*> all_labeled;
    for (const auto& l : labels) {
        all_labeled.push_back(&l);
    }
    for (std::size_t idx = 0; idx < report.categories.size(); ++idx) {
        const std::size_t cat = report.categories[idx].id;
        std::vector<LabeledSample> samples;
        const auto& own = by_cat[cat];
        const auto pos_perm = rng.permutation(own.size());
        for (std::size_t i = 0; i < std::min(cfg.positives_per_category, own.size()); ++i) {
            samples.push_back({row_texts[own[pos_perm[i]]->row], true});
        }
        std::vector<const RowLabel*> others;
        for (const auto& l : labels) {
            if (l.category != cat) {
                others.push_back(&l);
            }
        }
        const auto neg_perm = rng.permutation(others.size());
        for (std::size_t i = 0; i < std::min(cfg.negatives_per_category, others.size()); ++i) {
            samples.push_back({row_texts[others[neg_perm[i]]->row], false});
        }
        f1_samples.push_back(std::move(samples));
    }
    const auto comp_perm = rng.permutation(all_labeled.size());
    std::map<std::size_t, std::size_t> cat_index;  // latent id -> report index
    for (std::size_t i = 0; i < report.categories.size(); ++i) {
        cat_index[report.categories[i].id] = i;
    }
    for (std::size_t i = 0; i < std::min(cfg.completeness_samples, all_labeled.size()); ++i) {
        const auto* l = all_labeled[comp_perm[i]];
        completeness_pairs.emplace_back(row_texts[l->row], cat_index.at(l->category));
    }

    report.consistency = consistency_f1(judge, report.categories, f1_samples);
    report.completeness = completeness_score(judge, report.categories, completeness_pairs);
    report.independence = independence_score(judge, report.categories);
    report.combined = combined_score(report.consistency, report.completeness, report.independence);
    const auto orth = decoder_orthogonality(sae_params);
    report.decoder_avg_abs_cos = orth.avg_abs_cos;
    report.decoder_max_abs_cos = orth.max_abs_cos;
    return report;
}

GridResult grid_search(const std::map<std::size_t, sae::ActivationDataset>& activations,
                       const std::vector<std::string>& row_texts, Judge& judge,
                       const GridConfig& cfg) {
    GridResult grid;
    grid.layers = cfg.layers;
    grid.dict_sizes = cfg.dict_sizes;
    const std::size_t n_cells = cfg.layers.size() * cfg.dict_sizes.size();
    grid.cells.resize(n_cells);

    // SAE training runs on the pool; judge-backed scoring is serialized so
    // remote transcripts stay well-formed.
    std::mutex judge_mutex;
    parallel_for_indexed(n_cells, cfg.workers, [&](std::size_t idx) {
        const std::size_t li = idx / cfg.dict_sizes.size();
        const std::size_t ni = idx % cfg.dict_sizes.size();
        const std::size_t layer = cfg.layers[li];
        const std::size_t dict_size = cfg.dict_sizes[ni];
        TaxonomyReport& cell = grid.cells[idx];
        cell.model_id = cfg.model_id;
        cell.layer = layer;
        cell.dict_size = dict_size;
        try {
            const auto it = activations.find(layer);
            if (it == activations.end()) {
                throw std::runtime_error("no activations captured for layer " +
                                         std::to_string(layer));
            }
            sae::SaeTrainConfig stc = cfg.sae_config;
            stc.seed = SeededRng::derive(cfg.seed, "sae-" + std::to_string(layer) + "-" +
                                                       std::to_string(dict_size))
                           .next_u64();
            const auto trained = sae::train_sae(it->second.rows, dict_size, stc);
            std::lock_guard<std::mutex> lock(judge_mutex);
            cell = evaluate_taxonomy(trained.params, it->second, row_texts, judge, cfg, layer);
        } catch (const std::exception& e) {
            cell.failed = true;
            cell.error = e.what();
            std::fprintf(stderr, "[grid] cell layer=%zu n=%zu failed: %s\n", layer, dict_size,
                         e.what());
        }
    });

    std::vector<double> raw;
    for (const auto& cell : grid.cells) {
        if (!cell.failed) {
            raw.push_back(cell.combined);
        }
    }
    const auto norm = min_max_normalize(raw);
    grid.degenerate_normalization = norm.degenerate;
    grid.normalized_combined.assign(n_cells, -1.0);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n_cells; ++i) {
        if (!grid.cells[i].failed) {
            grid.normalized_combined[i] = norm.normalized[k++];
        }
    }
    return grid;
}

std::string grid_to_json(const GridResult& grid) {
    json j;
    j["layers"] = grid.layers;
    j["dict_sizes"] = grid.dict_sizes;
    j["degenerate_normalization"] = grid.degenerate_normalization;
    j["normalized_combined"] = grid.normalized_combined;
    json cells = json::array();
    for (const auto& c : grid.cells) {
        cells.push_back(json::parse(report_to_json(c)));
    }
    j["cells"] = cells;
    return j.dump(2);
}

GridResult grid_from_json(const std::string& text) {
    const json j = json::parse(text);
    GridResult g;
    g.layers = j.at("layers").get<std::vector<std::size_t>>();
    g.dict_sizes = j.at("dict_sizes").get<std::vector<std::size_t>>();
    g.degenerate_normalization = j.at("degenerate_normalization").get<bool>();
    g.normalized_combined = j.at("normalized_combined").get<std::vector<double>>();
    for (const auto& c : j.at("cells")) {
        g.cells.push_back(report_from_json(c.dump()));
    }
    return g;
}

std::string grid_heatmap_svg(const GridResult& grid) {
    std::vector<std::string> col_labels, row_labels;
    for (std::size_t layer : grid.layers) {
        col_labels.push_back("L" + std::to_string(layer));
    }
    for (std::size_t n : grid.dict_sizes) {
        row_labels.push_back("n=" + std::to_string(n));
    }
    // rows = dict sizes, cols = layers
    std::vector<std::vector<double>> norm(row_labels.size(),
                                          std::vector<double>(col_labels.size(), -1.0));
    std::vector<std::vector<double>> raw = norm;
    for (std::size_t li = 0; li < grid.layers.size(); ++li) {
        for (std::size_t ni = 0; ni < grid.dict_sizes.size(); ++ni) {
            const std::size_t idx = li * grid.dict_sizes.size() + ni;
            norm[ni][li] = grid.normalized_combined[idx];
            raw[ni][li] = grid.cells[idx].failed ? -1.0 : grid.cells[idx].combined;
        }
    }
    return svg_heatmap("taxonomy grid (normalized combined score)", col_labels, row_labels, norm,
                       raw);
}

std::string grid_heatmap_csv(const GridResult& grid) {
    std::string out = "layer,dict_size,consistency,completeness,independence,combined,"
                      "normalized,decoder_avg_abs_cos,decoder_max_abs_cos,failed\n";
    for (std::size_t li = 0; li < grid.layers.size(); ++li) {
        for (std::size_t ni = 0; ni < grid.dict_sizes.size(); ++ni) {
            const std::size_t idx = li * grid.dict_sizes.size() + ni;
            const auto& c = grid.cells[idx];
            out += std::to_string(grid.layers[li]) + "," + std::to_string(grid.dict_sizes[ni]) +
                   "," + format_double(c.consistency, 6) + "," + format_double(c.completeness, 6) +
                   "," + format_double(c.independence, 6) + "," + format_double(c.combined, 6) +
                   "," + format_double(grid.normalized_combined[idx], 6) + "," +
                   format_double(c.decoder_avg_abs_cos, 6) + "," +
                   format_double(c.decoder_max_abs_cos, 6) + "," + (c.failed ? "1" : "0") + "\n";
        }
    }
    return out;
}

}  // namespace steerlab::taxonomy
