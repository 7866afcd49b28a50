#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>
#include <string>

#include "oracles.hpp"
#include "support.hpp"
#include "trimodal/errors.hpp"
#include "trimodal/gaussian.hpp"
#include "trimodal/ply.hpp"
#include "trimodal/sampling.hpp"
#include "trimodal/shard.hpp"

using namespace trimodal;
using trimodal::test::Rng;
using trimodal::test::uniform;
using namespace trimodal::test;

namespace {

// Hand-rolled PLY writer for fixtures with arbitrary property lists.
struct PlyFixture {
    std::vector<std::pair<std::string, std::string>> props;  // (type, name)
    std::vector<std::vector<double>> rows;

    std::vector<std::uint8_t> bytes(std::size_t drop_tail = 0) const {
        std::string header = "ply\nformat binary_little_endian 1.0\ncomment fixture\nelement vertex " +
                             std::to_string(rows.size()) + "\n";
        for (const auto& [t, n] : props) header += "property " + t + " " + n + "\n";
        header += "end_header\n";
        std::vector<std::uint8_t> out(header.begin(), header.end());
        for (const auto& row : rows) {
            for (std::size_t i = 0; i < props.size(); ++i) {
                if (props[i].first == "double") {
                    const double v = row[i];
                    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
                    out.insert(out.end(), p, p + 8);
                } else {
                    const float v = static_cast<float>(row[i]);
                    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
                    out.insert(out.end(), p, p + 4);
                }
            }
        }
        out.resize(out.size() - drop_tail);
        return out;
    }
};

const std::vector<std::string> kNames{"x",       "y",       "z",       "opacity", "f_dc_0", "f_dc_1", "f_dc_2",
                                      "scale_0", "scale_1", "scale_2", "rot_0",   "rot_1",  "rot_2",  "rot_3"};

PlyFixture standard_fixture(std::size_t n) {
    PlyFixture f;
    for (const auto& name : kNames) f.props.emplace_back("float", name);
    for (std::size_t v = 0; v < n; ++v) {
        std::vector<double> row;
        for (std::size_t i = 0; i < kNames.size(); ++i) row.push_back(static_cast<double>(v) + 0.25 * i);
        f.rows.push_back(row);
    }
    return f;
}

GaussianCloud cloud_from(const std::vector<Vec3>& pts) {
    GaussianCloud c;
    for (const auto& p : pts) {
        Gaussian g;
        g.position = p;
        g.opacity = 0.5;
        g.color = {0.5, 0.5, 0.5};
        g.scale = {0.1, 0.1, 0.1};
        c.gaussians.push_back(g);
    }
    return c;
}

}  // namespace

TEST(ParsePly, SingleZeroVertex) {
    PlyFixture f;
    for (const auto& name : kNames) f.props.emplace_back("float", name);
    f.rows.push_back(std::vector<double>(kNames.size(), 0.0));
    const auto recs = parse_ply(f.bytes());
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].position, (Vec3{0, 0, 0}));
    EXPECT_EQ(recs[0].opacity_logit, 0.0);
    EXPECT_EQ(recs[0].rotation, (Quat{0, 0, 0, 0}));
}

TEST(ParsePly, ThreeVerticesInFileOrder) {
    const auto recs = parse_ply(standard_fixture(3).bytes());
    ASSERT_EQ(recs.size(), 3u);
    for (std::size_t v = 0; v < 3; ++v) {
        EXPECT_EQ(recs[v].position[0], static_cast<double>(v));
        EXPECT_EQ(recs[v].rotation[3], static_cast<double>(v) + 0.25 * 13);
    }
}

TEST(ParsePly, MissingRot3NamesProperty) {
    PlyFixture f = standard_fixture(2);
    f.props.pop_back();
    for (auto& r : f.rows) r.pop_back();
    try {
        parse_ply(f.bytes());
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("rot_3"), std::string::npos) << e.what();
    }
}

TEST(ParsePly, TruncatedPayloadReportsOffset) {
    const auto bytes = standard_fixture(3).bytes(5);
    try {
        parse_ply(bytes);
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos) << e.what();
    }
}

TEST(ParsePly, ExtraPropertiesAndMixedTypes) {
    PlyFixture f;
    f.props.emplace_back("double", "nx");
    for (const auto& name : kNames) f.props.emplace_back(name == "y" ? "double" : "float", name);
    f.props.emplace_back("float", "f_rest_0");
    std::vector<double> row{9.0};
    for (std::size_t i = 0; i < kNames.size(); ++i) row.push_back(0.1 * static_cast<double>(i + 1));
    row.push_back(4.0);
    f.rows.push_back(row);
    std::vector<std::string> warnings;
    const auto recs = parse_ply(f.bytes(), &warnings);
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].position[1], 0.2);  // double property keeps full precision
    EXPECT_EQ(recs[0].position[0], static_cast<double>(0.1f));
    EXPECT_EQ(warnings.size(), 1u);
}

TEST(ParsePly, RejectsAsciiFormat) {
    const std::string text = "ply\nformat ascii 1.0\nelement vertex 0\nend_header\n";
    EXPECT_THROW(parse_ply(std::vector<std::uint8_t>(text.begin(), text.end())), FormatError);
}

TEST(ParsePly, WritePlyRoundTrip) {
    Rng rng(3);
    std::vector<RawGaussianRecord> recs(5);
    for (auto& r : recs) {
        r.position = {uniform(rng), uniform(rng), uniform(rng)};
        r.opacity_logit = uniform(rng);
        r.rotation = random_unit_quat(rng);
        for (auto* v : {&r.position, &r.sh_dc, &r.log_scale}) {
            for (auto& x : *v) x = static_cast<float>(uniform(rng));
        }
        r.opacity_logit = static_cast<float>(r.opacity_logit);
        for (auto& x : r.rotation) x = static_cast<float>(x);
    }
    const auto back = parse_ply(write_ply(recs));
    ASSERT_EQ(back.size(), recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        EXPECT_EQ(back[i].position, recs[i].position);
        EXPECT_EQ(back[i].sh_dc, recs[i].sh_dc);
        EXPECT_EQ(back[i].rotation, recs[i].rotation);
    }
}

TEST(Activate, SigmoidColorScaleAndQuaternion) {
    RawGaussianRecord r;
    r.rotation = {2, 0, 0, 0};
    const auto c = activate({r});
    const Gaussian& g = c.gaussians[0];
    EXPECT_EQ(g.opacity, 0.5);
    EXPECT_EQ(g.color, (Vec3{0.5, 0.5, 0.5}));
    EXPECT_EQ(g.scale, (Vec3{1, 1, 1}));
    EXPECT_EQ(g.rotation, (Quat{1, 0, 0, 0}));
}

TEST(Activate, ColorIsClampedShDc) {
    RawGaussianRecord r;
    r.rotation = {1, 0, 0, 0};
    r.sh_dc = {10.0, -10.0, 1.0};
    const auto g = activate({r}).gaussians[0];
    EXPECT_EQ(g.color[0], 1.0);
    EXPECT_EQ(g.color[1], 0.0);
    EXPECT_DOUBLE_EQ(g.color[2], kShC0 + 0.5);
}

TEST(Activate, ZeroQuaternionNamesRecord) {
    std::vector<RawGaussianRecord> recs(3);
    recs[0].rotation = recs[2].rotation = {1, 0, 0, 0};
    try {
        activate(recs);
        FAIL() << "expected DegenerateInputError";
    } catch (const DegenerateInputError& e) {
        EXPECT_NE(std::string(e.what()).find("record 1"), std::string::npos) << e.what();
    }
}

TEST(Activate, PlyToShardRoundTripIsBitExact) {
    Rng rng(5);
    std::vector<RawGaussianRecord> recs(16);
    for (auto& r : recs) {
        for (auto* v : {&r.position, &r.sh_dc, &r.log_scale}) {
            for (auto& x : *v) x = static_cast<float>(uniform(rng));
        }
        r.opacity_logit = static_cast<float>(uniform(rng, -4, 4));
        for (auto& x : r.rotation) x = static_cast<float>(uniform(rng));
    }
    const GaussianCloud cloud = activate(parse_ply(write_ply(recs)));
    const std::vector<ShardObject> objs{{"obj", cloud}};
    const auto back = deserialize_shard(serialize_shard(objs));
    ASSERT_EQ(back.size(), 1u);
    EXPECT_TRUE(back[0].cloud == cloud);
}

TEST(Covariance, IdentityScaleAndRotation) {
    const Mat3 s = covariance_from_sq({1, 1, 1}, {1, 0, 0, 0});
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) EXPECT_EQ(s[i][j], i == j ? 1.0 : 0.0);
    }
}

TEST(Covariance, AxisAligned) {
    const Mat3 s = covariance_from_sq({2, 1, 1}, {1, 0, 0, 0});
    EXPECT_EQ(s[0][0], 4.0);
    EXPECT_EQ(s[1][1], 1.0);
    EXPECT_EQ(s[2][2], 1.0);
}

TEST(Covariance, QuarterTurnAboutZ) {
    const double h = std::sqrt(0.5);
    const Mat3 s = covariance_from_sq({2, 1, 1}, {h, 0, 0, h});
    const Mat3 expect{{{1, 0, 0}, {0, 4, 0}, {0, 0, 1}}};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) EXPECT_NEAR(s[i][j], expect[i][j], 1e-12);
    }
}

TEST(Covariance, NonUnitQuaternionThrows) {
    EXPECT_THROW(covariance_from_sq({1, 1, 1}, {1.1, 0, 0, 0}), ContractError);
}

TEST(Covariance, EigenvaluesAreSquaredScales) {
    Rng rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        const Vec3 s{uniform(rng, 0.05, 3), uniform(rng, 0.05, 3), uniform(rng, 0.05, 3)};
        const Mat3 sigma = covariance_from_sq(s, random_unit_quat(rng));
        Eigen::Matrix3d m;
        double asym = 0.0;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                m(i, j) = sigma[i][j];
                asym = std::max(asym, std::abs(sigma[i][j] - sigma[j][i]));
            }
        }
        EXPECT_LE(asym, 1e-12);
        EXPECT_NO_THROW(cholesky(sigma));
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(m);
        std::array<double, 3> want{s[0] * s[0], s[1] * s[1], s[2] * s[2]};
        std::sort(want.begin(), want.end());
        for (int i = 0; i < 3; ++i) EXPECT_NEAR(es.eigenvalues()[i], want[i], 1e-9) << "trial " << trial;
    }
}

TEST(Density, PeakIsOne) {
    const Mat3 sigma = covariance_from_sq({0.3, 0.7, 1.2}, {1, 0, 0, 0});
    EXPECT_EQ(gaussian_density({1, 2, 3}, sigma, {1, 2, 3}), 1.0);
}

TEST(Density, UnitMahalanobis) {
    const Mat3 eye{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    EXPECT_NEAR(gaussian_density({0, 0, 0}, eye, {1, 0, 0}), std::exp(-0.5), 1e-15);
    const Mat3 stretched{{{4, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    EXPECT_NEAR(gaussian_density({0, 0, 0}, stretched, {2, 0, 0}), std::exp(-0.5), 1e-15);
}

TEST(Density, SingularCovarianceThrows) {
    const Mat3 singular{{{1, 0, 0}, {0, 0, 0}, {0, 0, 1}}};
    EXPECT_THROW(gaussian_density({0, 0, 0}, singular, {1, 0, 0}), NumericError);
}

TEST(Density, DecreasesWithDistance) {
    const Mat3 sigma = covariance_from_sq({0.5, 1.0, 2.0}, {std::sqrt(0.5), std::sqrt(0.5), 0, 0});
    double prev = 1.0;
    for (int k = 1; k < 10; ++k) {
        const double d = gaussian_density({0, 0, 0}, sigma, {0.2 * k, 0.1 * k, -0.05 * k});
        EXPECT_LT(d, prev);
        prev = d;
    }
}

TEST(NormalizeCloud, CanonicalCloudIsFixedPoint) {
    Rng rng(1);
    const GaussianCloud once = normalize_cloud(test::random_cloud(20, rng));
    const GaussianCloud twice = normalize_cloud(once);
    for (std::size_t i = 0; i < once.size(); ++i) {
        for (int a = 0; a < 3; ++a) {
            EXPECT_NEAR(twice.gaussians[i].position[a], once.gaussians[i].position[a], 1e-12);
            EXPECT_NEAR(twice.gaussians[i].scale[a], once.gaussians[i].scale[a], 1e-12);
        }
    }
}

TEST(NormalizeCloud, TranslationInvariant) {
    Rng rng(2);
    const GaussianCloud c = test::random_cloud(15, rng);
    GaussianCloud moved = c;
    for (auto& g : moved.gaussians) g.position = {g.position[0] + 5, g.position[1] - 3, g.position[2] + 0.5};
    const auto a = normalize_cloud(c), b = normalize_cloud(moved);
    for (std::size_t i = 0; i < c.size(); ++i) {
        for (int k = 0; k < 3; ++k) EXPECT_NEAR(a.gaussians[i].position[k], b.gaussians[i].position[k], 1e-12);
    }
}

TEST(NormalizeCloud, TwoPointScaleByHand) {
    GaussianCloud c = cloud_from({{3, 0, 0}, {-3, 0, 0}});
    for (auto& g : c.gaussians) g.scale = {0.3, 0.6, 0.9};
    const auto n = normalize_cloud(c);
    EXPECT_EQ(n.gaussians[0].position, (Vec3{1, 0, 0}));
    EXPECT_EQ(n.gaussians[1].position, (Vec3{-1, 0, 0}));
    EXPECT_NEAR(n.gaussians[0].scale[0], 0.1, 1e-15);
    EXPECT_NEAR(n.gaussians[0].scale[2], 0.3, 1e-15);
    EXPECT_EQ(n.gaussians[0].color, c.gaussians[0].color);
}

TEST(NormalizeCloud, CoincidentPointsThrow) {
    EXPECT_THROW(normalize_cloud(cloud_from({{1, 1, 1}, {1, 1, 1}})), DegenerateInputError);
}

TEST(NormalizeCloud, MaxRadiusIsOneAndCentroidZero) {
    Rng rng(3);
    const auto n = normalize_cloud(test::random_cloud(50, rng));
    double r = 0.0;
    Vec3 c{0, 0, 0};
    for (const auto& g : n.gaussians) {
        r = std::max(r, std::sqrt(sq(g.position, {0, 0, 0})));
        for (int a = 0; a < 3; ++a) c[a] += g.position[a];
    }
    EXPECT_NEAR(r, 1.0, 1e-12);
    for (double v : c) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Fps, AllIndicesWhenMEqualsN) {
    Rng rng(1);
    const auto pts = test::random_cloud(9, rng).positions();
    std::vector<std::size_t> all(9);
    std::iota(all.begin(), all.end(), 0);
    EXPECT_EQ(farthest_point_sample(pts, 9), all);
}

TEST(Fps, OneDimensionalLine) {
    const std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}, {10, 0, 0}};
    EXPECT_EQ(farthest_point_sample(pts, 2), (std::vector<std::size_t>{0, 2}));
}

TEST(Fps, SquareCornersBeatCenter) {
    const std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}, {0.5, 0.5, 0}};
    EXPECT_EQ(farthest_point_sample(pts, 4), (std::vector<std::size_t>{0, 1, 2, 3}));
}

TEST(Fps, ZeroSamplesThrows) {
    const std::vector<Vec3> pts{{0, 0, 0}};
    EXPECT_THROW(farthest_point_sample(pts, 0), ContractError);
}

TEST(Fps, CyclesWhenAskingForMoreThanN) {
    const std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}, {3, 0, 0}};
    const auto idx = farthest_point_sample(pts, 7);
    EXPECT_EQ(idx.size(), 7u);
    EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
    EXPECT_EQ(std::set<std::size_t>(idx.begin(), idx.end()), (std::set<std::size_t>{0, 1, 2}));
}

TEST(Fps, PermutationEquivariantOnTieFreeInput) {
    Rng rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 5 + rng() % 60, m = 1 + rng() % n;
        const auto pts = test::random_cloud(n, rng).positions();
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<Vec3> shuffled(n);
        for (std::size_t i = 0; i < n; ++i) shuffled[i] = pts[perm[i]];
        std::set<std::size_t> a, b;
        for (std::size_t i : farthest_point_sample(pts, m)) a.insert(i);
        for (std::size_t i : farthest_point_sample(shuffled, m)) b.insert(perm[i]);
        EXPECT_EQ(a, b);
    }
}

TEST(Knn, SingleMemberPatches) {
    Rng rng(4);
    const auto cloud = test::random_cloud(12, rng);
    std::vector<std::size_t> sub(12);
    std::iota(sub.begin(), sub.end(), 0);
    const PatchSet ps = knn_group(cloud, sub, 5, 1);
    for (std::size_t p = 0; p < 5; ++p) {
        EXPECT_EQ(ps.member(p, 0), ps.centers[p]);
        EXPECT_EQ(ps.relative[p], (Vec3{0, 0, 0}));
    }
}

TEST(Knn, FullSubsetPatches) {
    Rng rng(5);
    const auto cloud = test::random_cloud(10, rng);
    const std::vector<std::size_t> sub{1, 3, 4, 6, 8, 9};
    const PatchSet ps = knn_group(cloud, sub, 3, sub.size());
    for (std::size_t p = 0; p < 3; ++p) {
        std::set<std::size_t> members;
        for (std::size_t k = 0; k < sub.size(); ++k) members.insert(ps.member(p, k));
        EXPECT_EQ(members.size(), sub.size());
    }
}

TEST(Knn, SixPointLine) {
    std::vector<Vec3> pts;
    for (double x : {0.0, 1.0, 2.5, 4.5, 7.0, 10.0}) pts.push_back({x, 0, 0});
    const auto cloud = cloud_from(pts);
    const std::vector<std::size_t> sub{0, 1, 2, 3, 4, 5};
    const PatchSet ps = knn_group(cloud, sub, 2, 3);
    EXPECT_EQ(ps.centers, fps_oracle(pts, 2));
    for (std::size_t p = 0; p < 2; ++p) {
        const auto want = knn_oracle(pts, ps.centers[p], 3);
        for (std::size_t k = 0; k < 3; ++k) {
            EXPECT_EQ(ps.member(p, k), want[k]);
            EXPECT_EQ(ps.relative[p * 3 + k][0], pts[want[k]][0] - pts[ps.centers[p]][0]);
        }
    }
}

TEST(GeometryOracles, FpsAndKnnMatchBruteForceOn200Clouds) {
    Rng rng(20240501);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng() % 255;
        const auto cloud = test::random_cloud(n, rng);
        const auto pts = cloud.positions();
        const std::size_t m = 1 + rng() % n;
        const auto sub = farthest_point_sample(pts, m);
        ASSERT_EQ(sub, fps_oracle(pts, m)) << "trial " << trial;

        std::vector<Vec3> sub_pts;
        for (std::size_t i : sub) sub_pts.push_back(pts[i]);
        const std::size_t P = 1 + rng() % m, K = 1 + rng() % m;
        const PatchSet ps = knn_group(cloud, sub, P, K);
        ASSERT_EQ(ps.subset, sub);
        ASSERT_EQ(ps.centers, fps_oracle(sub_pts, P)) << "trial " << trial;
        for (std::size_t p = 0; p < P; ++p) {
            const std::size_t c = ps.centers[p];
            const auto want = knn_oracle(sub_pts, c, K);
            std::vector<double> all;
            for (const auto& q : sub_pts) all.push_back(sq(q, sub_pts[c]));
            std::sort(all.begin(), all.end());
            const double bound = K < all.size() ? all[K] : all.back();
            for (std::size_t k = 0; k < K; ++k) {
                ASSERT_EQ(ps.member(p, k), want[k]) << "trial " << trial << " patch " << p;
                EXPECT_LE(sq(sub_pts[ps.member(p, k)], sub_pts[c]), bound);
            }
        }
    }
}

TEST(PrepareCloud, UpsamplesSmallCloudsByCycling) {
    Rng rng(6);
    const auto prepared = prepare_cloud(test::random_cloud(10, rng), 32, 4, 8);
    EXPECT_EQ(prepared.patches.subset.size(), 32u);
    EXPECT_EQ(prepared.patches.members.size(), 32u);
    for (std::size_t i : prepared.patches.subset) EXPECT_LT(i, 10u);
}
