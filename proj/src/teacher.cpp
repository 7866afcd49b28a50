#include "trimodal/teacher.hpp"

#include "trimodal/errors.hpp"
#include "trimodal/nn.hpp"
#include "trimodal/tape.hpp"

namespace trimodal {

StubTeacher::StubTeacher(const TeacherConfig& cfg) : cfg_(cfg) {
    nn::Rng rng(cfg.seed);
    nn::add_mlp(params_, "teacher.mlp", {6, cfg.hidden, cfg.width}, rng);
    for (auto& [_, t] : params_) t.requires_grad = false;
}

Tensor StubTeacher::features(const PreparedCloud& prepared) const {
    const auto& ps = prepared.patches;
    const std::size_t n = ps.patch_count * ps.patch_size;
    std::vector<double> input;
    input.reserve(n * 6);
    for (std::size_t i = 0; i < n; ++i) {
        const Gaussian& g = prepared.cloud.gaussians[ps.subset[ps.members[i]]];
        input.insert(input.end(), ps.relative[i].begin(), ps.relative[i].end());
        input.insert(input.end(), g.color.begin(), g.color.end());
    }
    Tape tape;
    Var x = tape.constant(Shape{n, 6}, std::move(input));
    x = gelu(linear(x, tape.constant(params_.at("teacher.mlp.l0.w")), tape.constant(params_.at("teacher.mlp.l0.b"))));
    x = linear(x, tape.constant(params_.at("teacher.mlp.l1.w")), tape.constant(params_.at("teacher.mlp.l1.b")));
    return max_pool_rows(x, ps.patch_size).to_tensor();
}

Tensor load_teacher_features(const EmbeddingStore& store, const std::string& object_id, std::size_t patch_count) {
    Tensor out(Shape{patch_count, store.dim()});
    for (std::size_t p = 0; p < patch_count; ++p) {
        const auto* rec = store.find(object_id, Modality::teacher, static_cast<float>(p));
        if (!rec) {
            throw FormatError("teacher features: object '" + object_id + "' has no row for patch " +
                              std::to_string(p) + " of " + std::to_string(patch_count));
        }
        std::copy(rec->values.begin(), rec->values.end(), out.values.begin() + static_cast<std::ptrdiff_t>(p * store.dim()));
    }
    if (store.find_all(object_id, Modality::teacher).size() != patch_count) {
        throw FormatError("teacher features: object '" + object_id + "' has " +
                          std::to_string(store.find_all(object_id, Modality::teacher).size()) + " rows, expected " +
                          std::to_string(patch_count));
    }
    return out;
}

void append_teacher_features(EmbeddingStore& store, const std::string& object_id, const Tensor& features) {
    if (features.cols() != store.dim()) {
        throw DimensionError("teacher features of width " + std::to_string(features.cols()) +
                             " do not fit a store of width " + std::to_string(store.dim()));
    }
    for (std::size_t p = 0; p < features.rows(); ++p) {
        std::span<const double> row(features.values.data() + p * features.cols(), features.cols());
        store.add(object_id, Modality::teacher, row, static_cast<float>(p));
    }
}

}  // namespace trimodal
