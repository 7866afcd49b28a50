#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "trimodal/model.hpp"
#include "trimodal/store.hpp"

namespace trimodal {

using Embeddings = std::vector<std::vector<double>>;
using Ranking = std::vector<std::size_t>;

// Top-k class indices per object by descending dot product, ties to the
// lower class index.
std::vector<Ranking> zero_shot_classify(const Embeddings& objects, const Embeddings& class_text, std::size_t k);

// Top-k gallery hits by cosine, ties by id. Empty gallery -> ContractError.
std::vector<Hit> retrieve(std::span<const double> query, const EmbeddingStore& gallery, std::size_t k,
                          std::optional<Modality> filter = std::nullopt);

// Fraction of samples whose label is among the first k entries, per k.
std::vector<double> topk_accuracy(const std::vector<Ranking>& ranked, std::span<const std::size_t> labels,
                                  std::span<const std::size_t> ks);

// Class-level recall@k: a query scores when one of its top-k gallery items
// shares its label. `gallery_chunk` > 0 restricts each query to the chunk of
// that size containing its own index (per-batch galleries); 0 uses the whole
// set. Queries and gallery are aligned by index.
double retrieval_recall(const Embeddings& queries, const Embeddings& gallery, std::span<const std::size_t> labels,
                        std::size_t k = 1, std::size_t gallery_chunk = 0);

struct ProbeResult {
    std::size_t shots = 0;
    double mean_accuracy = 0.0;
    std::vector<double> accuracies;  // one per repeat
};

struct ProbeOptions {
    std::size_t repeats = 10;
    std::size_t steps = 200;
    double lr = 1e-2;
    double weight_decay = 0.01;
};

// Linear softmax classifier on frozen embeddings. Each repeat draws `shots`
// training items per class and evaluates on every other item. A class with
// fewer than `shots` items raises ContractError.
std::vector<ProbeResult> few_shot_linear_probe(const Embeddings& embeddings, std::span<const std::size_t> labels,
                                               std::span<const std::size_t> shots, std::uint64_t seed,
                                               const ProbeOptions& opt = {});

// The per-repeat split used by the probe: (train indices, eval indices).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> probe_split(std::span<const std::size_t> labels,
                                                                          std::size_t shots, std::uint64_t seed,
                                                                          std::size_t repeat);

struct SimilarityMatrix {
    std::vector<std::string> row_ids;
    std::vector<std::string> col_ids;
    std::vector<double> values;  // rows x cols, row-major

    double at(std::size_t i, std::size_t j) const { return values[i * col_ids.size() + j]; }
};

// Pairwise cosine similarity.
SimilarityMatrix similarity_matrix(const std::vector<std::string>& row_ids, const Embeddings& a,
                                   const std::vector<std::string>& col_ids, const Embeddings& b);
std::string similarity_csv(const SimilarityMatrix& m);

// Ordered metric name -> value pairs for one run.
using Metrics = std::vector<std::pair<std::string, double>>;

struct EvalOptions {
    std::vector<std::size_t> probe_shots{1, 2, 4, 8, 16};
    std::uint64_t probe_seed = 0;
    std::size_t probe_repeats = 10;
    std::size_t gallery_chunk = 0;
    std::size_t batch_size = 32;
};

// Zero-shot Top-1/3/5 against F_G^T, text->3D recall against F_G^T, image->3D
// recall of F_I^mv against F_G^I and the probe on F_G^I.
Metrics evaluate(ParamSet& ps, const ModelConfig& cfg, std::span<const PreparedSample> samples,
                 const Embeddings& class_text, const EvalOptions& opt = {});

std::string metrics_csv(const Metrics& m);
Metrics parse_metrics_csv(const std::string& text);
// Aligned text table: one row per run, one column per metric in first-seen order.
std::string metrics_table(const std::vector<std::pair<std::string, Metrics>>& runs);

}  // namespace trimodal
