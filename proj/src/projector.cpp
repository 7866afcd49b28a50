#include "trimodal/projector.hpp"

#include <cmath>

#include "trimodal/errors.hpp"

namespace trimodal {

namespace {

nn::BlockShape projector_block(const ProjectorConfig& cfg) {
    return nn::BlockShape{cfg.dim, cfg.context_width(), cfg.heads, cfg.mlp_ratio, cfg.ln_eps};
}

}  // namespace

void init_projector(ParamSet& ps, const ProjectorConfig& cfg, std::uint64_t seed) {
    if (cfg.queries == 0) throw ContractError("projector: at least one query is required");
    nn::Rng rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.dim));
    std::uniform_real_distribution<double> u(-bound, bound);
    Tensor q(Shape{cfg.queries, cfg.dim});
    for (auto& v : q.values) v = u(rng);
    ps.add("proj.queries", std::move(q));
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        nn::add_block(ps, "proj.layer" + std::to_string(l), projector_block(cfg), rng);
    }
}

Var project_to_text(Tape& tape, ParamSet& ps, const ProjectorConfig& cfg, Var embedding, Var patch_tokens,
                    std::size_t objects) {
    if (embedding.cols() != cfg.dim || embedding.rows() != objects) {
        throw ContractError("project_to_text: embedding " + shape_str(embedding.shape()) + " is not " +
                            std::to_string(objects) + "x" + std::to_string(cfg.dim));
    }
    Var context = embedding;
    if (cfg.patch_context) {
        if (!patch_tokens.valid() || patch_tokens.cols() != cfg.patch_width || patch_tokens.rows() % objects != 0) {
            throw ContractError("project_to_text: patch context requested but patch tokens do not fit");
        }
        context = patch_tokens;
    }
    Var x = tile_rows(tape.param(ps, "proj.queries"), objects);
    const auto shape = projector_block(cfg);
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        x = nn::block(tape, ps, "proj.layer" + std::to_string(l), shape, x, context, objects);
    }
    return l2_normalize_rows(mean_pool_rows(x, cfg.queries));
}

}  // namespace trimodal
