#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "steerlab/sae/sae.hpp"
#include "steerlab/taxonomy/judge.hpp"

namespace steerlab::taxonomy {

struct LabeledSample {
    std::string text;
    bool is_positive = false;
};

// Mean F1 over categories of the judge's binary classifications.
// A category whose samples the judge cannot rate is skipped and the mean
// is taken over the remainder. F1 = 0 when precision + recall = 0.
double consistency_f1(Judge& judge, const std::vector<Category>& categories,
                      const std::vector<std::vector<LabeledSample>>& samples_per_category);

// Mean judge rating / 10 over (sentence, assigned category) pairs;
// unparseable ratings are skipped.
double completeness_score(Judge& judge, const std::vector<Category>& categories,
                          const std::vector<std::pair<std::string, std::size_t>>& assignments);

// Fraction of unordered category pairs with orthogonality
// (1 - similarity/10) above the threshold. Failed pairs leave the
// denominator.
double independence_score(Judge& judge, const std::vector<Category>& categories,
                          double threshold = 0.5);

struct DecoderOrthogonality {
    double avg_abs_cos = 0.0;
    double max_abs_cos = 0.0;
};

// Off-diagonal |cosine| statistics over decoder columns.
DecoderOrthogonality decoder_orthogonality(const sae::SaeParams& sae);

struct TaxonomyReport {
    std::string model_id;
    std::size_t layer = 0;
    std::size_t dict_size = 0;
    std::vector<Category> categories;
    double consistency = 0.0;
    double completeness = 0.0;
    double independence = 0.0;
    double combined = 0.0;  // mean of the three
    double decoder_avg_abs_cos = 0.0;
    double decoder_max_abs_cos = 0.0;
    bool failed = false;
    std::string error;
};

double combined_score(double consistency, double completeness, double independence);

struct MinMaxResult {
    std::vector<double> normalized;
    bool degenerate = false;  // max == min: raw scores passed through
};

// (raw - min) / (max - min) across the given values.
MinMaxResult min_max_normalize(const std::vector<double>& raw);

std::string report_to_json(const TaxonomyReport& report);
TaxonomyReport report_from_json(const std::string& text);

}  // namespace steerlab::taxonomy
