#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "support.hpp"
#include "trimodal/errors.hpp"
#include "trimodal/gradcheck.hpp"
#include "trimodal/nn.hpp"
#include "trimodal/projector.hpp"
#include "trimodal/store.hpp"
#include "trimodal/view_fusion.hpp"

using namespace trimodal;
using trimodal::test::Rng;

namespace {

ViewSet random_view_set(std::size_t d, std::size_t n, Rng& rng) {
    ViewSet vs;
    vs.anchor = test::unit_vector(d, rng);
    for (std::size_t i = 0; i < n; ++i) vs.views.push_back(test::unit_vector(d, rng));
    vs.angles_deg = canonical_angles(n);
    return vs;
}

void set_identity(ParamSet& ps, const std::string& prefix, std::size_t d) {
    auto& w = ps.at(prefix + ".w");
    std::fill(w.values.begin(), w.values.end(), 0.0);
    for (std::size_t i = 0; i < d; ++i) w.at(i, i) = 1.0;
    std::fill(ps.at(prefix + ".b").values.begin(), ps.at(prefix + ".b").values.end(), 0.0);
}

std::vector<double> l2n_ln(Tape& t, const std::vector<double>& x, double eps) {
    const std::size_t d = x.size();
    return l2_normalize_rows(layer_norm(t.constant(Shape{1, d}, x), t.constant(Tensor({d}, 1.0)),
                                        t.constant(Tensor({d}, 0.0)), eps))
        .value();
}

ProjectorConfig small_projector(std::size_t layers = 2) {
    ProjectorConfig c;
    c.dim = 8;
    c.layers = layers;
    c.queries = 3;
    c.heads = 2;
    c.mlp_ratio = 2;
    c.patch_width = 6;
    return c;
}

std::vector<double> project(ParamSet& ps, const ProjectorConfig& cfg, const std::vector<double>& emb) {
    Tape t;
    return project_to_text(t, ps, cfg, t.constant(Shape{1, cfg.dim}, emb), Var{}, 1).value();
}

}  // namespace

TEST(PositionalEncoding, ZeroAngleAlternates) {
    const Tensor pe = positional_encode_angles(std::vector<double>{0.0}, 8);
    EXPECT_EQ(pe.values, (std::vector<double>{0, 1, 0, 1, 0, 1, 0, 1}));
}

TEST(PositionalEncoding, FullTurnMatchesZeroOnFirstChannel) {
    const Tensor pe = positional_encode_angles(std::vector<double>{360.0}, 8);
    EXPECT_NEAR(pe.values[0], 0.0, 1e-15);
    EXPECT_NEAR(pe.values[1], 1.0, 1e-15);
}

TEST(PositionalEncoding, DistinctAnglesDistinctRowsAndFormula) {
    const Tensor pe = positional_encode_angles(std::vector<double>{0.0, 60.0}, 8);
    std::vector<double> r0(pe.values.begin(), pe.values.begin() + 8), r1(pe.values.begin() + 8, pe.values.end());
    EXPECT_NE(r0, r1);
    const double phi = std::numbers::pi / 3.0;
    for (std::size_t j = 0; j < 4; ++j) {
        const double f = std::pow(10000.0, 2.0 * static_cast<double>(j) / 8.0);
        EXPECT_NEAR(r1[2 * j], std::sin(phi / f), 1e-15);
        EXPECT_NEAR(r1[2 * j + 1], std::cos(phi / f), 1e-15);
    }
}

TEST(PositionalEncoding, OddWidthThrows) {
    EXPECT_THROW(positional_encode_angles(std::vector<double>{0.0}, 7), ContractError);
}

TEST(FuseViews, SingleViewReturnsProjectedValue) {
    FusionConfig cfg{.dim = 8};
    ParamSet ps;
    init_fusion(ps, cfg, 1);
    Rng rng(1);
    const ViewSet vs = random_view_set(8, 1, rng);
    const auto got = fuse_view_set(ps, cfg, vs);
    Tape t;
    Var row = add(t.constant(Shape{1, 8}, vs.views[0]), t.constant(positional_encode_angles(vs.angles_deg, 8)));
    Var value = nn::linear(t, ps, "fuse.o", nn::linear(t, ps, "fuse.v", row));
    Var anchor = t.constant(Shape{1, 8}, vs.anchor);
    const auto want =
        l2_normalize_rows(nn::layer_norm(t, ps, "fuse.ln", add(anchor, value), cfg.ln_eps)).value();
    for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(got[i], want[i], 1e-14);
}

TEST(FuseViews, IdentityProjectionsHandTrace) {
    FusionConfig cfg{.dim = 6, .positional_encoding = false};
    ParamSet ps;
    init_fusion(ps, cfg, 2);
    for (const char* p : {"fuse.q", "fuse.k", "fuse.v", "fuse.o"}) set_identity(ps, p, 6);
    Rng rng(2);
    ViewSet vs;
    vs.anchor = test::unit_vector(6, rng);
    const auto v = test::unit_vector(6, rng);
    vs.views.assign(4, v);
    vs.angles_deg = canonical_angles(4);
    std::vector<double> sum(6);
    for (std::size_t i = 0; i < 6; ++i) sum[i] = vs.anchor[i] + v[i];
    Tape t;
    const auto want = l2n_ln(t, sum, cfg.ln_eps);
    const auto got = fuse_view_set(ps, cfg, vs);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(got[i], want[i], 1e-14);
}

TEST(FuseViews, DefaultWidthAndUnitNorm) {
    FusionConfig cfg;
    ParamSet ps;
    init_fusion(ps, cfg, 3);
    Rng rng(3);
    const auto out = fuse_view_set(ps, cfg, random_view_set(cfg.dim, 6, rng));
    EXPECT_EQ(out.size(), 512u);
    EXPECT_NEAR(test::norm(out), 1.0, 1e-12);
}

TEST(FuseViews, JointViewAnglePermutationInvariant) {
    FusionConfig cfg{.dim = 16};
    ParamSet ps;
    init_fusion(ps, cfg, 4);
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        ViewSet vs = random_view_set(16, 6, rng);
        const auto ref = fuse_view_set(ps, cfg, vs);
        std::vector<std::size_t> perm(6);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        ViewSet shuffled = vs;
        for (std::size_t i = 0; i < 6; ++i) {
            shuffled.views[i] = vs.views[perm[i]];
            shuffled.angles_deg[i] = vs.angles_deg[perm[i]];
        }
        EXPECT_LE(test::max_abs_diff(fuse_view_set(ps, cfg, shuffled), ref), 1e-9);
    }
}

TEST(FuseViews, ZeroValueWeightsKeepResidualPath) {
    FusionConfig cfg{.dim = 8};
    ParamSet ps;
    init_fusion(ps, cfg, 5);
    auto& w = ps.at("fuse.v.w").values;
    std::fill(w.begin(), w.end(), 0.0);
    Rng rng(5);
    const ViewSet a = random_view_set(8, 6, rng);
    ViewSet b = random_view_set(8, 3, rng);
    b.anchor = a.anchor;
    Tape t;
    const auto want = l2n_ln(t, a.anchor, cfg.ln_eps);
    EXPECT_LE(test::max_abs_diff(fuse_view_set(ps, cfg, a), want), 1e-14);
    EXPECT_LE(test::max_abs_diff(fuse_view_set(ps, cfg, b), want), 1e-14);
}

TEST(FuseViews, WidthMismatchThrows) {
    FusionConfig cfg{.dim = 8};
    ParamSet ps;
    init_fusion(ps, cfg, 6);
    Rng rng(6);
    EXPECT_THROW(fuse_view_set(ps, cfg, random_view_set(6, 2, rng)), ContractError);
}

TEST(FuseViews, GradientsMatchFiniteDifferences) {
    FusionConfig cfg{.dim = 8};
    Rng rng(7);
    for (int seed = 0; seed < 5; ++seed) {
        ParamSet ps;
        init_fusion(ps, cfg, static_cast<std::uint64_t>(seed));
        ps.add("anchor", test::random_tensor({2, 8}, rng, -1, 1, true));
        const Tensor views = test::random_tensor({6, 8}, rng);
        const Tensor pe = positional_encode_angles(canonical_angles(3), 8);
        Tensor tiled({6, 8});
        for (std::size_t r = 0; r < 6; ++r) {
            std::copy(pe.values.begin() + (r % 3) * 8, pe.values.begin() + (r % 3 + 1) * 8, tiled.values.begin() + r * 8);
        }
        const Tensor w = test::random_tensor({2, 8}, rng);
        const auto rep = check_param_gradients(
            "fusion", ps,
            [&](Tape& t, ParamSet& p) {
                return sum(mul(fuse_views(t, p, cfg, t.param(p, "anchor"), t.constant(views), t.constant(tiled), 2),
                               t.constant(w)));
            },
            150, static_cast<std::uint64_t>(seed));
        EXPECT_LE(rep.max_rel_error, 1e-4) << rep.worst;
    }
}

TEST(ViewSet, CanonicalRing) {
    EXPECT_EQ(canonical_angles(6), (std::vector<double>{0, 60, 120, 180, 240, 300}));
}

TEST(ViewSet, StoreRoundTripIsExact) {
    Rng rng(8);
    ViewSet vs = random_view_set(8, 6, rng);
    for (auto& x : vs.anchor) x = static_cast<float>(x);
    for (auto& v : vs.views) {
        for (auto& x : v) x = static_cast<float>(x);
    }
    EmbeddingStore store(8);
    append_view_set(store, "obj/a", vs);
    const auto back = load_view_embeddings(deserialize_store(serialize_store(store)), "obj/a", 8);
    EXPECT_EQ(back.anchor, vs.anchor);
    EXPECT_EQ(back.views, vs.views);
    EXPECT_EQ(back.angles_deg, vs.angles_deg);
}

TEST(ViewSet, LoaderErrors) {
    Rng rng(9);
    EmbeddingStore store(8);
    append_view_set(store, "full", random_view_set(8, 2, rng));
    store.add("bare", Modality::image, test::unit_vector(8, rng));
    EXPECT_THROW(load_view_embeddings(store, "missing", 8), LookupError);
    EXPECT_THROW(load_view_embeddings(store, "bare", 8), ContractError);
    EXPECT_THROW(load_view_embeddings(store, "full", 16), FormatError);
    ViewSet empty;
    empty.anchor = test::unit_vector(8, rng);
    EXPECT_THROW(empty.validate(), ContractError);
}

TEST(Projector, ZeroLayersPoolsInitialQueries) {
    const auto cfg = small_projector(0);
    ParamSet ps;
    init_projector(ps, cfg, 1);
    Rng rng(1);
    const auto a = project(ps, cfg, test::unit_vector(8, rng));
    const auto b = project(ps, cfg, test::unit_vector(8, rng));
    EXPECT_EQ(a, b);
    const Tensor& q = ps.at("proj.queries");
    std::vector<double> mean(8);
    for (std::size_t r = 0; r < cfg.queries; ++r) {
        for (std::size_t c = 0; c < 8; ++c) mean[c] += q.at(r, c) / static_cast<double>(cfg.queries);
    }
    const double n = test::norm(mean);
    for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(a[c], mean[c] / n, 1e-15);
}

TEST(Projector, SingleContextTokenCrossAttention) {
    ParamSet ps;
    Rng init(2);
    nn::add_attention(ps, "x", 8, 8, init);
    Rng rng(2);
    const Tensor queries = test::random_tensor({3, 8}, rng);
    const Tensor ctx = test::random_tensor({1, 8}, rng);
    Tape t;
    const auto out = nn::attend(t, ps, "x", t.constant(queries), t.constant(ctx), 2, 1).value();
    const auto value = nn::linear(t, ps, "x.o", nn::linear(t, ps, "x.v", t.constant(ctx))).value();
    for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(out[r * 8 + c], value[c], 1e-15);
    }
}

TEST(Projector, DefaultsAndUnitOutput) {
    ProjectorConfig cfg;
    EXPECT_EQ(cfg.layers, 6u);
    ParamSet ps;
    init_projector(ps, cfg, 3);
    Rng rng(3);
    const auto out = project(ps, cfg, test::unit_vector(cfg.dim, rng));
    EXPECT_EQ(out.size(), 512u);
    EXPECT_NEAR(test::norm(out), 1.0, 1e-9);
}

TEST(Projector, DeterministicAndSensitive) {
    const auto cfg = small_projector(2);
    ParamSet ps;
    init_projector(ps, cfg, 4);
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        auto a = test::unit_vector(8, rng);
        auto b = test::unit_vector(8, rng);
        const double ab = test::dot(a, b);
        for (std::size_t i = 0; i < 8; ++i) b[i] -= ab * a[i];
        const double bn = test::norm(b);
        for (auto& x : b) x /= bn;
        const auto fa = project(ps, cfg, a);
        EXPECT_EQ(fa, project(ps, cfg, a));
        EXPECT_NEAR(test::norm(fa), 1.0, 1e-9);
        EXPECT_LT(test::dot(fa, project(ps, cfg, b)), 1.0 - 1e-6);
    }
}

TEST(Projector, PatchContextOption) {
    auto cfg = small_projector(1);
    cfg.patch_context = true;
    ParamSet ps;
    init_projector(ps, cfg, 5);
    Rng rng(5);
    const Tensor emb = test::unit_rows(2, 8, rng);
    const Tensor patches = test::random_tensor({2 * 4, 6}, rng);
    Tape t;
    const auto out = project_to_text(t, ps, cfg, t.constant(emb), t.constant(patches), 2);
    EXPECT_EQ(out.shape(), (Shape{2, 8}));
    EXPECT_THROW(project_to_text(t, ps, cfg, t.constant(emb), Var{}, 2), ContractError);
}

TEST(Projector, WidthMismatchThrows) {
    const auto cfg = small_projector(1);
    ParamSet ps;
    init_projector(ps, cfg, 6);
    Tape t;
    EXPECT_THROW(project_to_text(t, ps, cfg, t.constant(Tensor({1, 6}, 0.5)), Var{}, 1), ContractError);
}

TEST(Projector, GradientsMatchFiniteDifferences) {
    const auto cfg = small_projector(2);
    Rng rng(7);
    for (int seed = 0; seed < 5; ++seed) {
        ParamSet ps;
        init_projector(ps, cfg, static_cast<std::uint64_t>(seed));
        ps.add("emb", test::random_tensor({2, 8}, rng, -1, 1, true));
        const Tensor w = test::random_tensor({2, 8}, rng);
        const auto rep = check_param_gradients(
            "projector", ps,
            [&](Tape& t, ParamSet& p) {
                return sum(mul(project_to_text(t, p, cfg, t.param(p, "emb"), Var{}, 2), t.constant(w)));
            },
            150, static_cast<std::uint64_t>(seed));
        EXPECT_LE(rep.max_rel_error, 1e-4) << rep.worst;
        EXPECT_GE(rep.coordinates, 100u);
    }
}
