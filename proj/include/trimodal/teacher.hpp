#pragma once

#include <cstdint>
#include <string>

#include "trimodal/sampling.hpp"
#include "trimodal/store.hpp"
#include "trimodal/tensor.hpp"

namespace trimodal {

struct TeacherConfig {
    std::size_t hidden = 64;
    std::size_t width = 384;
    std::uint64_t seed = 0x5eed7eac;
};

// Frozen stand-in for a pretrained point-cloud model: a seeded shared MLP
// over [relative position, color] of every patch member, max-pooled per
// patch. Its parameters never receive gradients.
class StubTeacher {
public:
    explicit StubTeacher(const TeacherConfig& cfg);

    // P x width feature rows, one per patch.
    Tensor features(const PreparedCloud& prepared) const;
    const TeacherConfig& config() const { return cfg_; }
    const ParamSet& params() const { return params_; }

private:
    TeacherConfig cfg_;
    ParamSet params_;
};

// File mode: teacher rows live in an embedding store under modality
// `teacher`, one record per patch with the patch index in the angle field.
Tensor load_teacher_features(const EmbeddingStore& store, const std::string& object_id, std::size_t patch_count);
void append_teacher_features(EmbeddingStore& store, const std::string& object_id, const Tensor& features);

}  // namespace trimodal
