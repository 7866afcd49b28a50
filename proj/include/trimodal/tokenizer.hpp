#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "trimodal/nn.hpp"
#include "trimodal/sampling.hpp"
#include "trimodal/tape.hpp"

namespace trimodal {

// Widths of the attribute-disentangled tokenizer. Branch widths list the
// three layer outputs; inputs are fixed by the attribute (3 for position,
// 1 for opacity, 3 for color, 3 for log-scale, 4 for rotation).
struct TokenizerConfig {
    std::size_t sample_count = 1024;
    std::size_t patch_count = 64;
    std::size_t patch_size = 32;
    std::vector<std::size_t> spatial_widths{64, 128, 128};
    std::vector<std::size_t> opacity_widths{32, 32, 32};
    std::vector<std::size_t> color_widths{32, 64, 64};
    std::vector<std::size_t> scale_widths{32, 64, 64};
    std::vector<std::size_t> rotation_widths{32, 64, 64};
    std::size_t fused_width = 192;
    std::size_t blocks = 2;
    std::size_t heads = 4;
    std::size_t mlp_ratio = 2;
    std::size_t teacher_width = 384;
    std::size_t embed_dim = 512;
    double ln_eps = 1e-5;

    std::size_t spatial_width() const { return spatial_widths.back(); }
    std::size_t appearance_width() const { return opacity_widths.back() + color_widths.back(); }
    std::size_t morphology_width() const { return scale_widths.back() + rotation_widths.back(); }
    nn::BlockShape block_shape() const;
};

// Per-Gaussian attribute rows for every patch of one or more objects, laid
// out object-major, then patch, then member: rows = objects * P * K.
struct PatchBatch {
    std::size_t objects = 0;
    std::size_t patch_count = 0;
    std::size_t patch_size = 0;
    std::vector<double> relative;   // rows x 3
    std::vector<double> opacity;    // rows x 1
    std::vector<double> color;      // rows x 3
    std::vector<double> scale;      // rows x 3
    std::vector<double> rotation;   // rows x 4

    std::size_t rows() const { return objects * patch_count * patch_size; }
};

PatchBatch gather_patches(const PreparedCloud& prepared);
PatchBatch concat_batches(std::span<const PatchBatch* const> parts);

// Registers every tokenizer parameter under "tok.".
void init_tokenizer(ParamSet& ps, const TokenizerConfig& cfg, std::uint64_t seed);

// Point MLP plus learned positional embedding of the relative position, then
// channel-wise max over each block of `patch_size` rows.
Var encode_spatial(Tape& tape, ParamSet& ps, const TokenizerConfig& cfg, Var relative, std::size_t patch_size);
// Sigmoid MLPs for opacity and color, mean-pooled per patch, concatenated.
Var encode_appearance(Tape& tape, ParamSet& ps, const TokenizerConfig& cfg, Var opacity, Var color,
                      std::size_t patch_size);
// MLPs over log(scale) and rotation, each followed by layer norm, mean-pooled, concatenated.
Var encode_morphology(Tape& tape, ParamSet& ps, const TokenizerConfig& cfg, Var scale, Var rotation,
                      std::size_t patch_size);
// Concatenation and two-layer fusion MLP.
Var fuse_patch(Tape& tape, ParamSet& ps, const TokenizerConfig& cfg, Var spatial, Var appearance, Var morphology);
// `blocks` post-norm transformer blocks: self-attention among each object's
// patch tokens, cross-attention into that object's teacher rows, then MLP.
Var teacher_guide(Tape& tape, ParamSet& ps, const TokenizerConfig& cfg, Var tokens, Var teacher,
                  std::size_t objects);

struct TokenizerOutput {
    Var patch_tokens;  // objects*P x fused_width, after guidance
    Var embedding;     // objects x embed_dim, unit rows (F_G^I)
};

// Full batched forward: branches -> fusion -> guidance -> mean over patches
// -> FC head -> L2 normalization. `teacher` is objects*P x teacher_width.
TokenizerOutput encode_batch(Tape& tape, ParamSet& ps, const TokenizerConfig& cfg, const PatchBatch& batch,
                             const Tensor& teacher);

}  // namespace trimodal
