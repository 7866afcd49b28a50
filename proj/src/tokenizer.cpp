#include "trimodal/tokenizer.hpp"

#include <array>
#include <cmath>

#include "trimodal/errors.hpp"

namespace trimodal {

nn::BlockShape TokenizerConfig::block_shape() const {
    return nn::BlockShape{fused_width, teacher_width, heads, mlp_ratio, ln_eps};
}

PatchBatch gather_patches(const PreparedCloud& prepared) {
    const auto& ps = prepared.patches;
    const auto& gs = prepared.cloud.gaussians;
    PatchBatch b;
    b.objects = 1;
    b.patch_count = ps.patch_count;
    b.patch_size = ps.patch_size;
    const std::size_t n = b.rows();
    b.relative.reserve(n * 3);
    b.opacity.reserve(n);
    b.color.reserve(n * 3);
    b.scale.reserve(n * 3);
    b.rotation.reserve(n * 4);
    for (std::size_t i = 0; i < n; ++i) {
        const Gaussian& g = gs[ps.subset[ps.members[i]]];
        b.relative.insert(b.relative.end(), ps.relative[i].begin(), ps.relative[i].end());
        b.opacity.push_back(g.opacity);
        b.color.insert(b.color.end(), g.color.begin(), g.color.end());
        b.scale.insert(b.scale.end(), g.scale.begin(), g.scale.end());
        b.rotation.insert(b.rotation.end(), g.rotation.begin(), g.rotation.end());
    }
    return b;
}

PatchBatch concat_batches(std::span<const PatchBatch* const> parts) {
    if (parts.empty()) throw ContractError("concat_batches: no inputs");
    PatchBatch out;
    out.patch_count = parts[0]->patch_count;
    out.patch_size = parts[0]->patch_size;
    for (const PatchBatch* p : parts) {
        if (p->patch_count != out.patch_count || p->patch_size != out.patch_size) {
            throw DimensionError("concat_batches: patch layouts differ");
        }
        out.objects += p->objects;
        out.relative.insert(out.relative.end(), p->relative.begin(), p->relative.end());
        out.opacity.insert(out.opacity.end(), p->opacity.begin(), p->opacity.end());
        out.color.insert(out.color.end(), p->color.begin(), p->color.end());
        out.scale.insert(out.scale.end(), p->scale.begin(), p->scale.end());
        out.rotation.insert(out.rotation.end(), p->rotation.begin(), p->rotation.end());
    }
    return out;
}

namespace {

std::vector<std::size_t> with_input(std::size_t in, const std::vector<std::size_t>& widths) {
    if (widths.size() != 3) throw ContractError("tokenizer branches are three-layer MLPs");
    std::vector<std::size_t> w{in};
    w.insert(w.end(), widths.begin(), widths.end());
    return w;
}

}  // namespace

void init_tokenizer(ParamSet& ps, const TokenizerConfig& cfg, std::uint64_t seed) {
    nn::Rng rng(seed);
    nn::add_mlp(ps, "tok.mu.mlp", with_input(3, cfg.spatial_widths), rng);
    nn::add_linear(ps, "tok.mu.pe", 3, cfg.spatial_width(), rng);
    nn::add_mlp(ps, "tok.alpha.mlp", with_input(1, cfg.opacity_widths), rng);
    nn::add_mlp(ps, "tok.color.mlp", with_input(3, cfg.color_widths), rng);
    nn::add_mlp(ps, "tok.scale.mlp", with_input(3, cfg.scale_widths), rng);
    nn::add_layer_norm(ps, "tok.scale.ln", cfg.scale_widths.back());
    nn::add_mlp(ps, "tok.rot.mlp", with_input(4, cfg.rotation_widths), rng);
    nn::add_layer_norm(ps, "tok.rot.ln", cfg.rotation_widths.back());
    const std::size_t concat = cfg.spatial_width() + cfg.appearance_width() + cfg.morphology_width();
    nn::add_mlp(ps, "tok.fuse", {concat, cfg.fused_width, cfg.fused_width}, rng);
    for (std::size_t b = 0; b < cfg.blocks; ++b) {
        nn::add_block(ps, "tok.block" + std::to_string(b), cfg.block_shape(), rng);
    }
    nn::add_linear(ps, "tok.head", cfg.fused_width, cfg.embed_dim, rng);
}

Var encode_spatial(Tape& tape, ParamSet& ps, const TokenizerConfig& cfg, Var relative, std::size_t patch_size) {
    (void)cfg;
    Var feat = nn::mlp(tape, ps, "tok.mu.mlp", relative, 3, nn::Activation::gelu);
    Var pe = nn::linear(tape, ps, "tok.mu.pe", relative);
    return max_pool_rows(add(feat, pe), patch_size);
}

Var encode_appearance(Tape& tape, ParamSet& ps, const TokenizerConfig& cfg, Var opacity, Var color,
                      std::size_t patch_size) {
    (void)cfg;
    Var a = nn::mlp(tape, ps, "tok.alpha.mlp", opacity, 3, nn::Activation::sigmoid, nn::Activation::sigmoid);
    Var c = nn::mlp(tape, ps, "tok.color.mlp", color, 3, nn::Activation::sigmoid, nn::Activation::sigmoid);
    const std::array<Var, 2> parts{mean_pool_rows(a, patch_size), mean_pool_rows(c, patch_size)};
    return concat_cols(parts);
}

Var encode_morphology(Tape& tape, ParamSet& ps, const TokenizerConfig& cfg, Var scale, Var rotation,
                      std::size_t patch_size) {
    Var s = nn::mlp(tape, ps, "tok.scale.mlp", log(scale), 3, nn::Activation::gelu);
    s = nn::layer_norm(tape, ps, "tok.scale.ln", s, cfg.ln_eps);
    Var q = nn::mlp(tape, ps, "tok.rot.mlp", rotation, 3, nn::Activation::gelu);
    q = nn::layer_norm(tape, ps, "tok.rot.ln", q, cfg.ln_eps);
    const std::array<Var, 2> parts{mean_pool_rows(s, patch_size), mean_pool_rows(q, patch_size)};
    return concat_cols(parts);
}

Var fuse_patch(Tape& tape, ParamSet& ps, const TokenizerConfig& cfg, Var spatial, Var appearance, Var morphology) {
    if (spatial.cols() != cfg.spatial_width() || appearance.cols() != cfg.appearance_width() ||
        morphology.cols() != cfg.morphology_width()) {
        throw DimensionError("fuse_patch: branch widths " + shape_str(spatial.shape()) + ", " +
                             shape_str(appearance.shape()) + ", " + shape_str(morphology.shape()) +
                             " do not match the configuration");
    }
    const std::array<Var, 3> parts{spatial, appearance, morphology};
    return nn::mlp(tape, ps, "tok.fuse", concat_cols(parts), 2, nn::Activation::gelu);
}

Var teacher_guide(Tape& tape, ParamSet& ps, const TokenizerConfig& cfg, Var tokens, Var teacher,
                  std::size_t objects) {
    if (tokens.rows() != teacher.rows()) {
        throw ContractError("teacher_guide: " + std::to_string(tokens.rows()) + " patch tokens but " +
                            std::to_string(teacher.rows()) + " teacher rows");
    }
    const auto shape = cfg.block_shape();
    for (std::size_t b = 0; b < cfg.blocks; ++b) {
        tokens = nn::block(tape, ps, "tok.block" + std::to_string(b), shape, tokens, teacher, objects);
    }
    return tokens;
}

TokenizerOutput encode_batch(Tape& tape, ParamSet& ps, const TokenizerConfig& cfg, const PatchBatch& batch,
                             const Tensor& teacher) {
    const std::size_t n = batch.rows();
    if (batch.patch_count != cfg.patch_count || batch.patch_size != cfg.patch_size) {
        throw DimensionError("encode_batch: patch layout " + std::to_string(batch.patch_count) + "x" +
                             std::to_string(batch.patch_size) + " does not match the configuration");
    }
    if (teacher.rows() != batch.objects * batch.patch_count || teacher.cols() != cfg.teacher_width) {
        throw DimensionError("encode_batch: teacher features " + shape_str(teacher.shape) + " do not match " +
                             std::to_string(batch.objects * batch.patch_count) + " patches of width " +
                             std::to_string(cfg.teacher_width));
    }
    Var rel = tape.constant(Shape{n, 3}, batch.relative);
    Var opa = tape.constant(Shape{n, 1}, batch.opacity);
    Var col = tape.constant(Shape{n, 3}, batch.color);
    Var scl = tape.constant(Shape{n, 3}, batch.scale);
    Var rot = tape.constant(Shape{n, 4}, batch.rotation);
    const std::size_t k = batch.patch_size;
    Var spatial = encode_spatial(tape, ps, cfg, rel, k);
    Var appearance = encode_appearance(tape, ps, cfg, opa, col, k);
    Var morphology = encode_morphology(tape, ps, cfg, scl, rot, k);
    Var tokens = fuse_patch(tape, ps, cfg, spatial, appearance, morphology);
    tokens = teacher_guide(tape, ps, cfg, tokens, tape.constant(teacher), batch.objects);
    Var pooled = mean_pool_rows(tokens, batch.patch_count);
    Var emb = l2_normalize_rows(nn::linear(tape, ps, "tok.head", pooled));
    return {tokens, emb};
}

}  // namespace trimodal
