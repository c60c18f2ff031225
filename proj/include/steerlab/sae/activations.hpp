#pragma once

#include <map>
#include <string>
#include <vector>

#include "steerlab/corpus/tokenizer.hpp"
#include "steerlab/corpus/trace.hpp"
#include "steerlab/model/model.hpp"
#include "steerlab/numcore/tensor.hpp"

namespace steerlab::sae {

struct ActivationMeta {
    std::string trace_id;
    std::size_t sentence_index = 0;
    std::size_t layer = 0;
    corpus::Span span;  // sentence byte span within the trace
};

struct ActivationDataset {
    std::size_t dim = 0;
    numcore::Tensor2D rows;  // one vector per sentence
    std::vector<ActivationMeta> meta;
};

// Mean of the token rows covering one sentence. Throws on empty span.
std::vector<double> sentence_activation(const numcore::Tensor2D& token_rows,
                                        std::size_t first_token, std::size_t last_token);

// Token index range [first, last) of tokens overlapping a byte span.
std::pair<std::size_t, std::size_t> token_range_for_span(const std::vector<corpus::Span>& offsets,
                                                         const corpus::Span& span);

// Runs the model over each record's full text and averages residual rows
// per sentence, for every requested layer in a single forward pass.
// Row order is identical across layers.
std::map<std::size_t, ActivationDataset> capture_sentence_activations(
    const model::ModelWeights& w, const corpus::Tokenizer& tok,
    const std::vector<corpus::TraceRecord>& records, const std::vector<std::size_t>& layers);

// Sentence texts aligned with the dataset rows (same order for every layer).
std::vector<std::string> dataset_sentence_texts(const ActivationDataset& ds,
                                                const std::vector<corpus::TraceRecord>& records);

// Binary dataset: magic "ACTV", version, row count, dim, float32 rows,
// plus a JSON-lines sidecar with per-row metadata.
void save_activations(const ActivationDataset& ds, const std::string& data_path,
                      const std::string& sidecar_path);
ActivationDataset load_activations(const std::string& data_path, const std::string& sidecar_path);

}  // namespace steerlab::sae
