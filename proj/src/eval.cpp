#include "trimodal/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "trimodal/errors.hpp"
#include "trimodal/optim.hpp"

namespace trimodal {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void require_width(const Embeddings& e, std::size_t d, const char* what) {
    for (const auto& v : e) {
        if (v.size() != d) {
            throw DimensionError(std::string(what) + ": width " + std::to_string(v.size()) + " != " +
                                 std::to_string(d));
        }
    }
}

}  // namespace

std::vector<Ranking> zero_shot_classify(const Embeddings& objects, const Embeddings& class_text, std::size_t k) {
    if (class_text.empty()) throw ContractError("zero_shot_classify: no classes");
    const std::size_t d = class_text[0].size();
    require_width(class_text, d, "zero_shot_classify");
    require_width(objects, d, "zero_shot_classify");
    k = std::min(k, class_text.size());
    std::vector<Ranking> out;
    out.reserve(objects.size());
    std::vector<double> score(class_text.size());
    for (const auto& obj : objects) {
        for (std::size_t c = 0; c < class_text.size(); ++c) score[c] = dot(obj, class_text[c]);
        Ranking order(class_text.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
        order.resize(k);
        out.push_back(std::move(order));
    }
    return out;
}

std::vector<Hit> retrieve(std::span<const double> query, const EmbeddingStore& gallery, std::size_t k,
                          std::optional<Modality> filter) {
    if (gallery.empty()) throw ContractError("retrieve: empty gallery");
    return cosine_index_topk(gallery, query, k, filter);
}

std::vector<double> topk_accuracy(const std::vector<Ranking>& ranked, std::span<const std::size_t> labels,
                                  std::span<const std::size_t> ks) {
    if (ranked.size() != labels.size()) {
        throw ContractError("topk_accuracy: " + std::to_string(ranked.size()) + " rankings for " +
                            std::to_string(labels.size()) + " labels");
    }
    std::vector<double> out;
    for (std::size_t k : ks) {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < ranked.size(); ++i) {
            const auto end = ranked[i].begin() + static_cast<std::ptrdiff_t>(std::min(k, ranked[i].size()));
            if (std::find(ranked[i].begin(), end, labels[i]) != end) ++hits;
        }
        out.push_back(ranked.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(ranked.size()));
    }
    return out;
}

double retrieval_recall(const Embeddings& queries, const Embeddings& gallery, std::span<const std::size_t> labels,
                        std::size_t k, std::size_t gallery_chunk) {
    if (queries.size() != gallery.size() || queries.size() != labels.size()) {
        throw ContractError("retrieval_recall: queries, gallery and labels must align");
    }
    if (gallery.empty()) throw ContractError("retrieval_recall: empty gallery");
    const std::size_t d = gallery[0].size();
    require_width(queries, d, "retrieval_recall");
    require_width(gallery, d, "retrieval_recall");
    std::vector<double> gnorm(gallery.size());
    for (std::size_t j = 0; j < gallery.size(); ++j) gnorm[j] = norm(gallery[j]);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        std::size_t lo = 0, hi = gallery.size();
        if (gallery_chunk > 0) {
            lo = (i / gallery_chunk) * gallery_chunk;
            hi = std::min(gallery.size(), lo + gallery_chunk);
        }
        const double qn = norm(queries[i]);
        std::vector<std::pair<double, std::size_t>> scored;
        for (std::size_t j = lo; j < hi; ++j) scored.emplace_back(dot(queries[i], gallery[j]) / (qn * gnorm[j]), j);
        const std::size_t kk = std::min(k, scored.size());
        std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(kk), scored.end(),
                          [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
        for (std::size_t r = 0; r < kk; ++r) {
            if (labels[scored[r].second] == labels[i]) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(queries.size());
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> probe_split(std::span<const std::size_t> labels,
                                                                          std::size_t shots, std::uint64_t seed,
                                                                          std::size_t repeat) {
    const std::size_t classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<std::vector<std::size_t>> by_class(classes);
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    std::mt19937_64 rng(seed * 1000003ULL + shots * 7919ULL + repeat);
    std::vector<char> is_train(labels.size(), 0);
    std::vector<std::size_t> train;
    for (std::size_t c = 0; c < classes; ++c) {
        auto& pool = by_class[c];
        if (pool.size() < shots) {
            throw ContractError("few_shot_linear_probe: class " + std::to_string(c) + " has " +
                                std::to_string(pool.size()) + " items, fewer than " + std::to_string(shots) +
                                " shots");
        }
        std::shuffle(pool.begin(), pool.end(), rng);
        for (std::size_t s = 0; s < shots; ++s) {
            train.push_back(pool[s]);
            is_train[pool[s]] = 1;
        }
    }
    std::vector<std::size_t> eval;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!is_train[i]) eval.push_back(i);
    }
    return {train, eval};
}

std::vector<ProbeResult> few_shot_linear_probe(const Embeddings& embeddings, std::span<const std::size_t> labels,
                                               std::span<const std::size_t> shots, std::uint64_t seed,
                                               const ProbeOptions& opt) {
    if (embeddings.size() != labels.size() || embeddings.empty()) {
        throw ContractError("few_shot_linear_probe: embeddings and labels must be non-empty and aligned");
    }
    const std::size_t d = embeddings[0].size();
    require_width(embeddings, d, "few_shot_linear_probe");
    const std::size_t classes = *std::max_element(labels.begin(), labels.end()) + 1;
    const AdamWOptions adam{.lr = opt.lr, .weight_decay = opt.weight_decay};

    std::vector<ProbeResult> out;
    for (std::size_t n_shots : shots) {
        if (n_shots == 0) throw ContractError("few_shot_linear_probe: shots must be positive");
        ProbeResult res;
        res.shots = n_shots;
        for (std::size_t rep = 0; rep < opt.repeats; ++rep) {
            const auto [train_idx, eval_idx] = probe_split(labels, n_shots, seed, rep);
            if (eval_idx.empty()) throw ContractError("few_shot_linear_probe: no evaluation items remain");
            std::vector<double> x;
            std::vector<std::size_t> y;
            for (std::size_t i : train_idx) {
                x.insert(x.end(), embeddings[i].begin(), embeddings[i].end());
                y.push_back(labels[i]);
            }
            const Tensor xs(Shape{train_idx.size(), d}, std::move(x));
            ParamSet ps;
            ps.add("probe.w", Tensor(Shape{d, classes}, 0.0));
            ps.add("probe.b", Tensor(Shape{classes}, 0.0));
            AdamState state;
            for (std::size_t step = 0; step < opt.steps; ++step) {
                ps.zero_grad();
                Tape tape;
                Var logits = add_row(matmul(tape.constant(xs), tape.param(ps, "probe.w")), tape.param(ps, "probe.b"));
                tape.backward(cross_entropy_rows(logits, y));
                adamw_step(ps, state, adam);
            }
            const Tensor& w = ps.at("probe.w");
            const Tensor& b = ps.at("probe.b");
            std::size_t correct = 0;
            for (std::size_t i : eval_idx) {
                std::size_t best = 0;
                double best_score = -INFINITY;
                for (std::size_t c = 0; c < classes; ++c) {
                    double s = b.values[c];
                    for (std::size_t j = 0; j < d; ++j) s += embeddings[i][j] * w.values[j * classes + c];
                    if (s > best_score) {
                        best_score = s;
                        best = c;
                    }
                }
                if (best == labels[i]) ++correct;
            }
            res.accuracies.push_back(static_cast<double>(correct) / static_cast<double>(eval_idx.size()));
        }
        res.mean_accuracy = std::accumulate(res.accuracies.begin(), res.accuracies.end(), 0.0) /
                            static_cast<double>(res.accuracies.size());
        out.push_back(std::move(res));
    }
    return out;
}

SimilarityMatrix similarity_matrix(const std::vector<std::string>& row_ids, const Embeddings& a,
                                   const std::vector<std::string>& col_ids, const Embeddings& b) {
    if (row_ids.size() != a.size() || col_ids.size() != b.size()) {
        throw ContractError("similarity_matrix: ids and embeddings must align");
    }
    if (!a.empty() && !b.empty() && a[0].size() != b[0].size()) {
        throw DimensionError("similarity_matrix: widths " + std::to_string(a[0].size()) + " and " +
                             std::to_string(b[0].size()) + " differ");
    }
    if (!a.empty()) require_width(a, a[0].size(), "similarity_matrix");
    if (!b.empty()) require_width(b, b[0].size(), "similarity_matrix");
    SimilarityMatrix m{row_ids, col_ids, {}};
    m.values.reserve(a.size() * b.size());
    std::vector<double> bn(b.size());
    for (std::size_t j = 0; j < b.size(); ++j) bn[j] = norm(b[j]);
    for (const auto& row : a) {
        const double an = norm(row);
        for (std::size_t j = 0; j < b.size(); ++j) m.values.push_back(dot(row, b[j]) / (an * bn[j]));
    }
    return m;
}

std::string similarity_csv(const SimilarityMatrix& m) {
    std::string out = "id";
    for (const auto& c : m.col_ids) out += "," + c;
    out += "\n";
    char buf[32];
    for (std::size_t i = 0; i < m.row_ids.size(); ++i) {
        out += m.row_ids[i];
        for (std::size_t j = 0; j < m.col_ids.size(); ++j) {
            std::snprintf(buf, sizeof buf, ",%.9g", m.at(i, j));
            out += buf;
        }
        out += "\n";
    }
    return out;
}

Metrics evaluate(ParamSet& ps, const ModelConfig& cfg, std::span<const PreparedSample> samples,
                 const Embeddings& class_text, const EvalOptions& opt) {
    if (samples.empty()) throw ContractError("evaluate: no samples");
    std::vector<PreparedSample> sorted(samples.begin(), samples.end());
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    const SampleEmbeddings emb = embed_samples(ps, cfg, sorted, opt.batch_size);
    std::vector<std::size_t> labels;
    Embeddings text;
    for (const auto& s : sorted) {
        labels.push_back(s.label);
        text.push_back(s.text);
    }

    Metrics m;
    const std::vector<std::size_t> ks{1, 3, 5};
    const auto acc = topk_accuracy(zero_shot_classify(emb.g3d_text, class_text, 5), labels, ks);
    m.emplace_back("zero_shot_top1", acc[0]);
    m.emplace_back("zero_shot_top3", acc[1]);
    m.emplace_back("zero_shot_top5", acc[2]);
    m.emplace_back("text_r1", retrieval_recall(text, emb.g3d_text, labels, 1, opt.gallery_chunk));
    m.emplace_back("image_r1", retrieval_recall(emb.image_mv, emb.g3d_image, labels, 1, opt.gallery_chunk));
    if (!opt.probe_shots.empty()) {
        ProbeOptions po;
        po.repeats = opt.probe_repeats;
        for (const auto& r : few_shot_linear_probe(emb.g3d_image, labels, opt.probe_shots, opt.probe_seed, po)) {
            m.emplace_back("probe_" + std::to_string(r.shots) + "shot", r.mean_accuracy);
        }
    }
    return m;
}

std::string metrics_csv(const Metrics& m) {
    std::string out = "metric,value\n";
    char buf[48];
    for (const auto& [k, v] : m) {
        std::snprintf(buf, sizeof buf, ",%.17g\n", v);
        out += k + buf;
    }
    return out;
}

Metrics parse_metrics_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    Metrics m;
    bool header = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (header) {
            header = false;
            if (line != "metric,value") throw FormatError("metrics csv: expected header 'metric,value'");
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw FormatError("metrics csv: malformed line '" + line + "'");
        try {
            m.emplace_back(line.substr(0, comma), std::stod(line.substr(comma + 1)));
        } catch (const std::exception&) {
            throw FormatError("metrics csv: bad value in line '" + line + "'");
        }
    }
    return m;
}

std::string metrics_table(const std::vector<std::pair<std::string, Metrics>>& runs) {
    std::vector<std::string> cols;
    for (const auto& [_, m] : runs) {
        for (const auto& [k, v] : m) {
            if (std::find(cols.begin(), cols.end(), k) == cols.end()) cols.push_back(k);
        }
    }
    std::vector<std::vector<std::string>> cells;
    cells.push_back({"run"});
    for (const auto& c : cols) cells[0].push_back(c);
    char buf[32];
    for (const auto& [name, m] : runs) {
        std::vector<std::string> row{name};
        for (const auto& c : cols) {
            auto it = std::find_if(m.begin(), m.end(), [&](const auto& kv) { return kv.first == c; });
            if (it == m.end()) {
                row.push_back("-");
            } else {
                std::snprintf(buf, sizeof buf, "%.2f", 100.0 * it->second);
                row.push_back(buf);
            }
        }
        cells.push_back(std::move(row));
    }
    std::vector<std::size_t> width(cols.size() + 1, 0);
    for (const auto& row : cells) {
        for (std::size_t j = 0; j < row.size(); ++j) width[j] = std::max(width[j], row[j].size());
    }
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        for (std::size_t j = 0; j < cells[i].size(); ++j) {
            const std::string& s = cells[i][j];
            if (j == 0) {
                out += s + std::string(width[j] - s.size(), ' ');
            } else {
                out += "  " + std::string(width[j] - s.size(), ' ') + s;
            }
        }
        out += "\n";
        if (i == 0) {
            std::size_t total = 0;
            for (std::size_t w : width) total += w + 2;
            out += std::string(total - 2, '-') + "\n";
        }
    }
    return out;
}

}  // namespace trimodal
