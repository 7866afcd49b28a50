#include "trimodal/view_fusion.hpp"

#include <cmath>
#include <numbers>

#include "trimodal/errors.hpp"
#include "trimodal/nn.hpp"

namespace trimodal {

void ViewSet::validate() const {
    if (views.empty()) throw ContractError("view set: at least one view is required");
    if (angles_deg.size() != views.size()) {
        throw ContractError("view set: " + std::to_string(angles_deg.size()) + " angles for " +
                            std::to_string(views.size()) + " views");
    }
    for (const auto& v : views) {
        if (v.size() != anchor.size()) throw ContractError("view set: view width differs from anchor width");
    }
    auto finite = [](const std::vector<double>& v) {
        for (double x : v) {
            if (!std::isfinite(x)) return false;
        }
        return true;
    };
    if (!finite(anchor)) throw ContractError("view set: non-finite anchor");
    for (const auto& v : views) {
        if (!finite(v)) throw ContractError("view set: non-finite view embedding");
    }
}

std::vector<double> canonical_angles(std::size_t n) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = 360.0 * static_cast<double>(i) / static_cast<double>(n);
    return out;
}

Tensor positional_encode_angles(std::span<const double> angles_deg, std::size_t d) {
    if (d == 0 || d % 2 != 0) throw ContractError("positional_encode_angles: width must be even, got " + std::to_string(d));
    if (angles_deg.empty()) throw ContractError("positional_encode_angles: no angles");
    Tensor pe(Shape{angles_deg.size(), d});
    for (std::size_t i = 0; i < angles_deg.size(); ++i) {
        const double phi = angles_deg[i] * std::numbers::pi / 180.0;
        for (std::size_t j = 0; j < d / 2; ++j) {
            const double freq = std::pow(10000.0, static_cast<double>(2 * j) / static_cast<double>(d));
            pe.at(i, 2 * j) = std::sin(phi / freq);
            pe.at(i, 2 * j + 1) = std::cos(phi / freq);
        }
    }
    return pe;
}

void init_fusion(ParamSet& ps, const FusionConfig& cfg, std::uint64_t seed) {
    nn::Rng rng(seed);
    nn::add_attention(ps, "fuse", cfg.dim, cfg.dim, rng);
    nn::add_layer_norm(ps, "fuse.ln", cfg.dim);
}

Var fuse_views(Tape& tape, ParamSet& ps, const FusionConfig& cfg, Var anchors, Var views, Var pe,
               std::size_t objects) {
    if (anchors.cols() != cfg.dim || views.cols() != cfg.dim) {
        throw ContractError("fuse_views: anchor " + shape_str(anchors.shape()) + " / views " +
                            shape_str(views.shape()) + " do not have width " + std::to_string(cfg.dim));
    }
    if (anchors.rows() != objects || objects == 0 || views.rows() % objects != 0 || views.rows() == 0) {
        throw ContractError("fuse_views: " + std::to_string(views.rows()) + " view rows do not split over " +
                            std::to_string(objects) + " objects");
    }
    Var keyed = views;
    if (pe.valid()) {
        if (pe.shape() != views.shape()) throw ContractError("fuse_views: positional table does not match views");
        keyed = add(views, pe);
    }
    Var attn = nn::attend(tape, ps, "fuse", anchors, keyed, 1, objects);
    Var fused = nn::layer_norm(tape, ps, "fuse.ln", add(anchors, attn), cfg.ln_eps);
    return l2_normalize_rows(fused);
}

std::vector<double> fuse_view_set(ParamSet& ps, const FusionConfig& cfg, const ViewSet& vs) {
    vs.validate();
    if (vs.dim() != cfg.dim) throw ContractError("fuse_view_set: view width does not match configuration");
    Tape tape;
    Var anchor = tape.constant(Shape{1, cfg.dim}, vs.anchor);
    std::vector<double> flat;
    for (const auto& v : vs.views) flat.insert(flat.end(), v.begin(), v.end());
    Var views = tape.constant(Shape{vs.count(), cfg.dim}, std::move(flat));
    Var pe;
    if (cfg.positional_encoding) pe = tape.constant(positional_encode_angles(vs.angles_deg, cfg.dim));
    return fuse_views(tape, ps, cfg, anchor, views, pe, 1).value();
}

ViewSet load_view_embeddings(const EmbeddingStore& store, const std::string& object_id, std::size_t expected_dim) {
    const auto anchors = store.find_all(object_id, Modality::image);
    const auto views = store.find_all(object_id, Modality::view);
    if (anchors.empty() && views.empty()) throw LookupError("view embeddings: no object '" + object_id + "'");
    if (store.dim() != expected_dim) {
        throw FormatError("view embeddings: store width " + std::to_string(store.dim()) + " does not match " +
                          std::to_string(expected_dim));
    }
    if (anchors.empty()) throw LookupError("view embeddings: object '" + object_id + "' has no anchor image row");
    ViewSet vs;
    vs.anchor = anchors.front()->values;
    for (const auto* r : views) {
        if (!r->angle) throw FormatError("view embeddings: view row of '" + object_id + "' lacks an angle");
        vs.views.push_back(r->values);
        vs.angles_deg.push_back(*r->angle);
    }
    vs.validate();
    return vs;
}

void append_view_set(EmbeddingStore& store, const std::string& object_id, const ViewSet& vs) {
    store.add(object_id, Modality::image, vs.anchor);
    for (std::size_t i = 0; i < vs.count(); ++i) {
        store.add(object_id, Modality::view, vs.views[i], static_cast<float>(vs.angles_deg[i]));
    }
}

}  // namespace trimodal
