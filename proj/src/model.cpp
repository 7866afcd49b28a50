#include "trimodal/model.hpp"

#include "trimodal/errors.hpp"

namespace trimodal {

void ModelConfig::sync() {
    fusion.dim = tokenizer.embed_dim;
    projector.dim = tokenizer.embed_dim;
    projector.patch_width = tokenizer.fused_width;
    tokenizer.teacher_width = teacher.width;
    if (tokenizer.embed_dim == 0 || tokenizer.embed_dim % 2 != 0) {
        throw ContractError("model: embedding width must be positive and even");
    }
    if (tokenizer.patch_count > tokenizer.sample_count || tokenizer.patch_size > tokenizer.sample_count) {
        throw ContractError("model: patch count and size must not exceed the FPS sample count");
    }
    if (tokenizer.fused_width % tokenizer.heads != 0) {
        throw ContractError("model: fused width must split evenly into attention heads");
    }
    if (projector.dim % projector.heads != 0) {
        throw ContractError("model: projector width must split evenly into attention heads");
    }
}

ParamSet init_model(const ModelConfig& cfg, std::uint64_t seed) {
    ParamSet ps;
    init_tokenizer(ps, cfg.tokenizer, seed * 4 + 1);
    if (cfg.view_fusion) init_fusion(ps, cfg.fusion, seed * 4 + 2);
    if (cfg.text_projector) init_projector(ps, cfg.projector, seed * 4 + 3);
    init_loss(ps, cfg.loss);
    return ps;
}

PreparedSample prepare_sample(const std::string& id, std::size_t label, const GaussianCloud& cloud,
                              std::vector<double> text, ViewSet views, const ModelConfig& cfg,
                              const StubTeacher& teacher) {
    const auto& t = cfg.tokenizer;
    PreparedCloud prepared = prepare_cloud(cloud, t.sample_count, t.patch_count, t.patch_size);
    PreparedSample s;
    s.id = id;
    s.label = label;
    s.patches = gather_patches(prepared);
    s.teacher = teacher.features(prepared);
    if (text.size() != cfg.dim()) throw DimensionError("prepare_sample: text embedding width mismatch for " + id);
    s.text = std::move(text);
    views.validate();
    if (views.dim() != cfg.dim()) throw DimensionError("prepare_sample: view embedding width mismatch for " + id);
    s.views = std::move(views);
    return s;
}

BatchForward forward_batch(Tape& tape, ParamSet& ps, const ModelConfig& cfg,
                           std::span<const PreparedSample* const> batch) {
    if (batch.empty()) throw ContractError("forward_batch: empty batch");
    const std::size_t b = batch.size(), d = cfg.dim();
    const std::size_t n_views = batch[0]->views.count();

    std::vector<const PatchBatch*> parts;
    std::vector<double> teacher, text, anchors, views, pe;
    for (const PreparedSample* s : batch) {
        if (s->views.count() != n_views) throw ContractError("forward_batch: samples disagree on view count");
        parts.push_back(&s->patches);
        teacher.insert(teacher.end(), s->teacher.values.begin(), s->teacher.values.end());
        text.insert(text.end(), s->text.begin(), s->text.end());
        anchors.insert(anchors.end(), s->views.anchor.begin(), s->views.anchor.end());
        for (const auto& v : s->views.views) views.insert(views.end(), v.begin(), v.end());
        if (cfg.view_fusion && cfg.fusion.positional_encoding) {
            const Tensor table = positional_encode_angles(s->views.angles_deg, d);
            pe.insert(pe.end(), table.values.begin(), table.values.end());
        }
    }
    const PatchBatch patches = concat_batches(parts);
    const Tensor teacher_rows(Shape{b * cfg.tokenizer.patch_count, cfg.tokenizer.teacher_width}, std::move(teacher));

    BatchForward out;
    TokenizerOutput tok = encode_batch(tape, ps, cfg.tokenizer, patches, teacher_rows);
    out.g3d_image = tok.embedding;
    out.patch_tokens = tok.patch_tokens;
    out.text = l2_normalize_rows(tape.constant(Shape{b, d}, std::move(text)));
    Var anchor = tape.constant(Shape{b, d}, std::move(anchors));
    if (cfg.view_fusion) {
        Var view_rows = tape.constant(Shape{b * n_views, d}, std::move(views));
        Var pe_rows;
        if (cfg.fusion.positional_encoding) pe_rows = tape.constant(Shape{b * n_views, d}, std::move(pe));
        out.image_mv = fuse_views(tape, ps, cfg.fusion, anchor, view_rows, pe_rows, b);
    } else {
        out.image_mv = l2_normalize_rows(anchor);
    }
    out.g3d_text = cfg.text_projector
                       ? project_to_text(tape, ps, cfg.projector, out.g3d_image, out.patch_tokens, b)
                       : out.g3d_image;
    out.loss = total_loss(out.g3d_text, out.text, out.g3d_image, out.image_mv, tape.param(ps, kLogTemperature),
                          cfg.loss);
    return out;
}

SampleEmbeddings embed_samples(ParamSet& ps, const ModelConfig& cfg, std::span<const PreparedSample> samples,
                               std::size_t batch_size) {
    if (batch_size == 0) throw ContractError("embed_samples: batch size must be positive");
    SampleEmbeddings out;
    const std::size_t d = cfg.dim();
    for (std::size_t start = 0; start < samples.size(); start += batch_size) {
        const std::size_t end = std::min(samples.size(), start + batch_size);
        std::vector<const PreparedSample*> chunk;
        for (std::size_t i = start; i < end; ++i) chunk.push_back(&samples[i]);
        Tape tape;
        BatchForward f = forward_batch(tape, ps, cfg, chunk);
        auto split = [&](Var v, std::vector<std::vector<double>>& dst) {
            const auto& vals = v.value();
            for (std::size_t i = 0; i < chunk.size(); ++i) {
                dst.emplace_back(vals.begin() + static_cast<std::ptrdiff_t>(i * d),
                                 vals.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
            }
        };
        split(f.g3d_image, out.g3d_image);
        split(f.g3d_text, out.g3d_text);
        split(f.image_mv, out.image_mv);
    }
    return out;
}

std::vector<double> encode_gaussians(const GaussianCloud& cloud, ParamSet& ps, const ModelConfig& cfg,
                                     const StubTeacher& teacher) {
    const auto& t = cfg.tokenizer;
    PreparedCloud prepared = prepare_cloud(cloud, t.sample_count, t.patch_count, t.patch_size);
    const PatchBatch batch = gather_patches(prepared);
    Tape tape;
    return encode_batch(tape, ps, t, batch, teacher.features(prepared)).embedding.value();
}

}  // namespace trimodal
