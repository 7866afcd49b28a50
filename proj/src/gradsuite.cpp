#include "trimodal/gradsuite.hpp"

#include <array>
#include <cmath>
#include <random>

#include "trimodal/dataset.hpp"
#include "trimodal/model.hpp"

namespace trimodal {

namespace {

using Rng = std::mt19937_64;

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor t(std::move(shape));
    for (auto& v : t.values) v = u(rng);
    return t;
}

ParamSet subset(const ParamSet& all, std::initializer_list<const char*> prefixes) {
    ParamSet out;
    for (const auto& [name, t] : all) {
        for (const char* p : prefixes) {
            if (name.rfind(p, 0) == 0) {
                out.add(name, t);
                break;
            }
        }
    }
    return out;
}

// Random-weighted sum so every output coordinate gets a distinct gradient.
Var probe_sum(Var y, const Tensor& w) { return sum(mul(y, y.tape().constant(w))); }

TokenizerConfig small_tokenizer() {
    TokenizerConfig c;
    c.sample_count = 24;
    c.patch_count = 3;
    c.patch_size = 4;
    c.spatial_widths = {6, 8, 8};
    c.opacity_widths = {4, 4, 4};
    c.color_widths = {4, 6, 6};
    c.scale_widths = {4, 6, 6};
    c.rotation_widths = {4, 6, 6};
    c.fused_width = 8;
    c.blocks = 1;
    c.heads = 2;
    c.mlp_ratio = 2;
    c.teacher_width = 6;
    c.embed_dim = 8;
    return c;
}

PatchBatch random_patches(const TokenizerConfig& c, std::size_t objects, Rng& rng) {
    PatchBatch b;
    b.objects = objects;
    b.patch_count = c.patch_count;
    b.patch_size = c.patch_size;
    const std::size_t n = b.rows();
    auto fill = [&](std::vector<double>& v, std::size_t width, double lo, double hi) {
        std::uniform_real_distribution<double> u(lo, hi);
        v.resize(n * width);
        for (auto& x : v) x = u(rng);
    };
    fill(b.relative, 3, -0.5, 0.5);
    fill(b.opacity, 1, 0.05, 0.95);
    fill(b.color, 3, 0.0, 1.0);
    fill(b.scale, 3, 0.01, 0.2);
    fill(b.rotation, 4, -1.0, 1.0);
    return b;
}

}  // namespace

std::vector<GradCheckReport> run_gradient_suite(std::uint64_t seed, const GradSuiteOptions& opt) {
    Rng rng(seed);
    std::vector<GradCheckReport> reports;
    const TokenizerConfig tc = small_tokenizer();
    ParamSet tok;
    init_tokenizer(tok, tc, seed + 1);
    const std::size_t objects = 2;
    const PatchBatch patches = random_patches(tc, objects, rng);
    const std::size_t rows = patches.rows(), tokens = objects * tc.patch_count;
    auto check = [&](const std::string& name, ParamSet& ps, const LossBuilder& build) {
        reports.push_back(check_param_gradients(name, ps, build, opt.coordinates, seed + reports.size() + 11, opt.h));
    };

    {
        ParamSet ps = subset(tok, {"tok.mu.", "tok.alpha.", "tok.color.", "tok.scale.", "tok.rot."});
        const Tensor w = random_tensor(Shape{tokens, tc.spatial_width() + tc.appearance_width() + tc.morphology_width()}, rng);
        check("branch MLPs", ps, [&](Tape& t, ParamSet& p) {
            Var s = encode_spatial(t, p, tc, t.constant(Shape{rows, 3}, patches.relative), tc.patch_size);
            Var a = encode_appearance(t, p, tc, t.constant(Shape{rows, 1}, patches.opacity),
                                      t.constant(Shape{rows, 3}, patches.color), tc.patch_size);
            Var m = encode_morphology(t, p, tc, t.constant(Shape{rows, 3}, patches.scale),
                                      t.constant(Shape{rows, 4}, patches.rotation), tc.patch_size);
            const std::array<Var, 3> parts{s, a, m};
            return probe_sum(concat_cols(parts), w);
        });
    }
    {
        ParamSet ps = subset(tok, {"tok.fuse."});
        const Tensor s = random_tensor(Shape{tokens, tc.spatial_width()}, rng);
        const Tensor a = random_tensor(Shape{tokens, tc.appearance_width()}, rng, 0.0, 1.0);
        const Tensor m = random_tensor(Shape{tokens, tc.morphology_width()}, rng);
        const Tensor w = random_tensor(Shape{tokens, tc.fused_width}, rng);
        check("fusion MLP", ps, [&](Tape& t, ParamSet& p) {
            return probe_sum(fuse_patch(t, p, tc, t.constant(s), t.constant(a), t.constant(m)), w);
        });
    }
    {
        ParamSet ps = subset(tok, {"tok.block"});
        const Tensor x = random_tensor(Shape{tokens, tc.fused_width}, rng);
        const Tensor teacher = random_tensor(Shape{tokens, tc.teacher_width}, rng);
        const Tensor w = random_tensor(Shape{tokens, tc.fused_width}, rng);
        check("teacher-guidance block", ps, [&](Tape& t, ParamSet& p) {
            return probe_sum(teacher_guide(t, p, tc, t.constant(x), t.constant(teacher), objects), w);
        });
    }
    {
        FusionConfig fc;
        fc.dim = 8;
        ParamSet ps;
        init_fusion(ps, fc, seed + 2);
        const std::size_t n_views = 4;
        const Tensor anchors = random_tensor(Shape{objects, fc.dim}, rng);
        const Tensor views = random_tensor(Shape{objects * n_views, fc.dim}, rng);
        std::vector<double> pe_rows;
        for (std::size_t o = 0; o < objects; ++o) {
            const Tensor pe = positional_encode_angles(canonical_angles(n_views), fc.dim);
            pe_rows.insert(pe_rows.end(), pe.values.begin(), pe.values.end());
        }
        const Tensor pe(Shape{objects * n_views, fc.dim}, pe_rows);
        const Tensor w = random_tensor(Shape{objects, fc.dim}, rng);
        check("view fusion", ps, [&](Tape& t, ParamSet& p) {
            return probe_sum(fuse_views(t, p, fc, t.constant(anchors), t.constant(views), t.constant(pe), objects), w);
        });
    }
    {
        ProjectorConfig pc;
        pc.dim = 8;
        pc.layers = 2;
        pc.queries = 3;
        pc.heads = 2;
        pc.mlp_ratio = 2;
        ParamSet ps;
        init_projector(ps, pc, seed + 3);
        const Tensor emb = random_tensor(Shape{objects, pc.dim}, rng);
        const Tensor w = random_tensor(Shape{objects, pc.dim}, rng);
        check("text projector", ps, [&](Tape& t, ParamSet& p) {
            return probe_sum(project_to_text(t, p, pc, t.constant(emb), Var{}, objects), w);
        });
    }
    {
        ParamSet ps;
        ps.add("f1", random_tensor(Shape{6, 10}, rng));
        ps.add("f2", random_tensor(Shape{6, 10}, rng));
        ps.add("log_tau", Tensor(Shape{1}, std::log(0.5)));
        check("InfoNCE", ps, [](Tape& t, ParamSet& p) {
            return info_nce(l2_normalize_rows(t.param(p, "f1")), l2_normalize_rows(t.param(p, "f2")),
                            t.param(p, "log_tau"), true);
        });
    }
    {
        ModelConfig mc;
        mc.tokenizer = tc;
        mc.teacher.hidden = 6;
        mc.teacher.width = tc.teacher_width;
        mc.projector.layers = 1;
        mc.projector.queries = 2;
        mc.projector.heads = 2;
        mc.projector.mlp_ratio = 2;
        mc.loss.init_temperature = 0.5;
        mc.sync();
        SyntheticSpec spec;
        spec.classes = 3;
        spec.train_per_class = 1;
        spec.test_per_class = 0;
        spec.gaussians = tc.sample_count;
        spec.dim = mc.dim();
        spec.views = 3;
        spec.seed = seed + 4;
        const TriModalDataset data = generate_synthetic(spec);
        const StubTeacher teacher(mc.teacher);
        std::vector<PreparedSample> samples;
        for (const auto& s : data.train) {
            samples.push_back(prepare_sample(s.id, s.label, s.cloud, s.text, s.views, mc, teacher));
        }
        std::vector<const PreparedSample*> batch;
        for (const auto& s : samples) batch.push_back(&s);
        ParamSet ps = init_model(mc, seed + 5);
        check("total loss", ps, [&](Tape& t, ParamSet& p) { return forward_batch(t, p, mc, batch).loss.total; });
    }
    return reports;
}

bool suite_passed(const std::vector<GradCheckReport>& reports, const GradSuiteOptions& opt) {
    for (const auto& r : reports) {
        if (!(r.max_rel_error <= opt.tolerance) || r.coordinates < 100) return false;
    }
    return !reports.empty();
}

}  // namespace trimodal
