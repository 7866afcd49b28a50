#pragma once

#include <cstdint>

#include "trimodal/nn.hpp"
#include "trimodal/tape.hpp"

namespace trimodal {

struct ProjectorConfig {
    std::size_t dim = 512;
    std::size_t layers = 6;
    std::size_t queries = 16;
    std::size_t heads = 8;
    std::size_t mlp_ratio = 4;
    // Attend to the guided patch tokens instead of the single 3D embedding.
    bool patch_context = false;
    std::size_t patch_width = 192;  // context width when patch_context is set
    double ln_eps = 1e-5;

    std::size_t context_width() const { return patch_context ? patch_width : dim; }
};

// Registers "proj.queries" (N_q x d) and "proj.layer<l>" blocks.
void init_projector(ParamSet& ps, const ProjectorConfig& cfg, std::uint64_t seed);

// Refines the learnable queries through `layers` blocks
//   F = LN(F + SelfAttn(F)); F = LN(F + Attn(F, ctx, ctx)); F = LN(F + MLP(F))
// where ctx is the object's 3D embedding (B x d) or, with patch_context, its
// patch tokens (B*P rows). The refined queries are mean-pooled and
// L2-normalized to B x d.
Var project_to_text(Tape& tape, ParamSet& ps, const ProjectorConfig& cfg, Var embedding, Var patch_tokens,
                    std::size_t objects);

}  // namespace trimodal
