#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "trimodal/store.hpp"
#include "trimodal/tape.hpp"
#include "trimodal/tensor.hpp"

namespace trimodal {

// Anchor image embedding plus N rendered-view embeddings and their azimuths.
struct ViewSet {
    std::vector<double> anchor;
    std::vector<std::vector<double>> views;
    std::vector<double> angles_deg;

    std::size_t dim() const { return anchor.size(); }
    std::size_t count() const { return views.size(); }
    void validate() const;  // ContractError unless N >= 1, angle count matches, widths agree, all finite
};

struct FusionConfig {
    std::size_t dim = 512;
    bool positional_encoding = true;
    double ln_eps = 1e-5;
};

// Evenly spaced azimuth ring {0, 360/N, ...}.
std::vector<double> canonical_angles(std::size_t n);

// N x d sinusoidal table over azimuths in degrees:
// row[2j] = sin(phi / 10000^(2j/d)), row[2j+1] = cos(phi / 10000^(2j/d)), phi in radians.
Tensor positional_encode_angles(std::span<const double> angles_deg, std::size_t d);

// Registers "fuse.{q,k,v,o}" (d x d) and "fuse.ln".
void init_fusion(ParamSet& ps, const FusionConfig& cfg, std::uint64_t seed);

// anchors: B x d, views: B*N x d (view rows of one object are contiguous),
// pe: B*N x d added to the views, or an invalid Var to skip it. Returns the
// unit-norm fused features, B x d:
//   l2_normalize(LN(F_I + W_o Attn(W_q F_I, W_k (V + PE), W_v (V + PE))))
Var fuse_views(Tape& tape, ParamSet& ps, const FusionConfig& cfg, Var anchors, Var views, Var pe,
               std::size_t objects);

// Single-object convenience used by tools and tests.
std::vector<double> fuse_view_set(ParamSet& ps, const FusionConfig& cfg, const ViewSet& views);

// Anchor from modality `image`, views from modality `view` (angle = azimuth)
// in store order. Missing object -> LookupError; no views -> ContractError;
// width != expected_dim -> FormatError.
ViewSet load_view_embeddings(const EmbeddingStore& store, const std::string& object_id, std::size_t expected_dim);
void append_view_set(EmbeddingStore& store, const std::string& object_id, const ViewSet& views);

}  // namespace trimodal
