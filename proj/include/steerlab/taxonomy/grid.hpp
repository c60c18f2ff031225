#pragma once

#include <map>

#include "steerlab/sae/activations.hpp"
#include "steerlab/taxonomy/scores.hpp"

namespace steerlab::taxonomy {

struct GridConfig {
    std::vector<std::size_t> layers;
    std::vector<std::size_t> dict_sizes;
    sae::SaeTrainConfig sae_config;
    std::size_t positives_per_category = 20;
    std::size_t negatives_per_category = 20;
    std::size_t completeness_samples = 100;
    std::size_t max_top_exemplars = 100;
    std::size_t max_random_exemplars = 100;
    std::size_t title_repetitions = 1;  // majority vote when > 1
    std::uint64_t seed = 0;
    std::string model_id = "model";
    std::size_t workers = 0;  // 0 = hardware concurrency
};

struct GridResult {
    std::vector<std::size_t> layers;
    std::vector<std::size_t> dict_sizes;
    // layer-major: cell (li, ni) at index li * dict_sizes.size() + ni.
    std::vector<TaxonomyReport> cells;
    std::vector<double> normalized_combined;  // -1 for failed cells
    bool degenerate_normalization = false;
};

// Labels every dataset row with the SAE, collects exemplars, asks the
// judge for titles, and scores one taxonomy.
TaxonomyReport evaluate_taxonomy(const sae::SaeParams& sae_params,
                                 const sae::ActivationDataset& data,
                                 const std::vector<std::string>& row_texts, Judge& judge,
                                 const GridConfig& cfg, std::size_t layer);

// One SAE per (layer, dict size) cell, scored and min-max normalized
// within the grid. Cell failures are recorded and skipped.
GridResult grid_search(const std::map<std::size_t, sae::ActivationDataset>& activations,
                       const std::vector<std::string>& row_texts, Judge& judge,
                       const GridConfig& cfg);

std::string grid_to_json(const GridResult& grid);
GridResult grid_from_json(const std::string& text);
std::string grid_heatmap_svg(const GridResult& grid);
std::string grid_heatmap_csv(const GridResult& grid);

}  // namespace steerlab::taxonomy
