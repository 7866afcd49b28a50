#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "trimodal/loss.hpp"
#include "trimodal/projector.hpp"
#include "trimodal/teacher.hpp"
#include "trimodal/tokenizer.hpp"
#include "trimodal/view_fusion.hpp"

namespace trimodal {

struct ModelConfig {
    TokenizerConfig tokenizer;
    TeacherConfig teacher;
    FusionConfig fusion;
    ProjectorConfig projector;
    LossParams loss;
    bool view_fusion = true;     // false: align F_G^I with the single anchor view
    bool text_projector = true;  // false: F_G^T is F_G^I

    std::size_t dim() const { return tokenizer.embed_dim; }
    // Propagates the shared widths (d, teacher width, patch width) and checks
    // the remaining invariants.
    void sync();
};

// Every trainable tensor of the enabled components plus the log temperature.
ParamSet init_model(const ModelConfig& cfg, std::uint64_t seed);

// One object with everything the forward pass needs precomputed.
struct PreparedSample {
    std::string id;
    std::size_t label = 0;
    PatchBatch patches;
    Tensor teacher;  // P x teacher width
    std::vector<double> text;
    ViewSet views;
};

PreparedSample prepare_sample(const std::string& id, std::size_t label, const GaussianCloud& cloud,
                              std::vector<double> text, ViewSet views, const ModelConfig& cfg,
                              const StubTeacher& teacher);

struct BatchForward {
    Var g3d_image;  // F_G^I
    Var image_mv;   // F_I^mv (or the anchor when view fusion is off)
    Var g3d_text;   // F_G^T
    Var text;       // F_T
    Var patch_tokens;
    LossTerms loss;
};

BatchForward forward_batch(Tape& tape, ParamSet& ps, const ModelConfig& cfg,
                           std::span<const PreparedSample* const> batch);

struct SampleEmbeddings {
    std::vector<std::vector<double>> g3d_image;
    std::vector<std::vector<double>> g3d_text;
    std::vector<std::vector<double>> image_mv;
};

// Forward-only embedding extraction in chunks of `batch_size`; results are
// in input order.
SampleEmbeddings embed_samples(ParamSet& ps, const ModelConfig& cfg, std::span<const PreparedSample> samples,
                               std::size_t batch_size = 32);

// Single cloud to F_G^I with the stub teacher.
std::vector<double> encode_gaussians(const GaussianCloud& cloud, ParamSet& ps, const ModelConfig& cfg,
                                     const StubTeacher& teacher);

}  // namespace trimodal
