#include "error.hpp"
#include "shape_model.hpp"
#include "support.hpp"

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

using namespace avf;
using namespace avf::shape;

namespace {

BlendShapeBasis randomBasis(std::mt19937_64& rng, int rows, int cols, std::size_t m) {
  BlendShapeBasis b;
  b.restMesh = test::gridMesh(rows, cols);
  for (std::size_t k = 0; k < m; ++k) {
    b.attributeNames.push_back("attr" + std::to_string(k));
    std::vector<Vec3> field;
    for (std::size_t i = 0; i < b.restMesh.vertices.size(); ++i) {
      field.push_back(test::randomVec(rng, -0.2, 0.2));
    }
    b.attributes.push_back(field);
    b.weightBounds.push_back({-1.0, 1.0});
  }
  return b;
}

std::vector<double> randomWeights(std::mt19937_64& rng, std::size_t m, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> w(m);
  for (double& x : w) {
    x = u(rng);
  }
  return w;
}

Mesh displaced(const Mesh& rest, const std::vector<Vec3>& d, double t) {
  Mesh m = rest;
  for (std::size_t i = 0; i < m.vertices.size(); ++i) {
    m.vertices[i] += t * d[i];
  }
  return m;
}

// Dense oracle: best rank-1 reconstruction error of the rest-centered samples
// from the top eigenvalue of the 3n x 3n covariance.
double denseResidual(const AttributeSubset& subset, const Mesh& rest, Eigen::VectorXd* topDir = nullptr) {
  const std::size_t n = rest.vertices.size();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(3 * n, 3 * n);
  double total = 0.0;
  for (const Mesh& s : subset.samples) {
    Eigen::VectorXd x(3 * n);
    for (std::size_t i = 0; i < n; ++i) {
      x.segment<3>(3 * i) = s.vertices[i] - rest.vertices[i];
    }
    cov += x * x.transpose();
    total += x.squaredNorm();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (topDir) {
    *topDir = es.eigenvectors().col(3 * n - 1);
  }
  return total - es.eigenvalues()(3 * n - 1);
}

} // namespace

TEST(ApplyShape, ZeroWeightsReturnRestExactly) {
  std::mt19937_64 rng(11);
  const BlendShapeBasis b = randomBasis(rng, 9, 10, 7);
  const Mesh out = applyShape(b, ShapeWeights::zero(b));
  ASSERT_EQ(out.vertices.size(), b.restMesh.vertices.size());
  for (std::size_t i = 0; i < out.vertices.size(); ++i) {
    EXPECT_EQ(out.vertices[i], b.restMesh.vertices[i]);
  }
}

TEST(ApplyShape, UniformField) {
  BlendShapeBasis b;
  b.restMesh = test::gridMesh(3, 3);
  b.attributeNames = {"lift"};
  b.attributes = {std::vector<Vec3>(b.restMesh.vertices.size(), Vec3(0, 1, 0))};
  b.weightBounds = {{-5, 5}};
  const Mesh out = applyShape(b, ShapeWeights::clamped(b, {2.0}));
  for (std::size_t i = 0; i < out.vertices.size(); ++i) {
    EXPECT_LT((out.vertices[i] - b.restMesh.vertices[i] - Vec3(0, 2, 0)).norm(), 1e-15);
  }
}

TEST(ApplyShape, MatchesPerVertexLoop) {
  std::mt19937_64 rng(12);
  const BlendShapeBasis b = randomBasis(rng, 9, 9, 7);
  ASSERT_EQ(b.vertexCount(), 100u);
  for (int trial = 0; trial < 50; ++trial) {
    const auto w = randomWeights(rng, 7);
    const Mesh out = applyShape(b, ShapeWeights::clamped(b, w));
    for (std::size_t i = 0; i < b.vertexCount(); ++i) {
      double x = b.restMesh.vertices[i].x(), y = b.restMesh.vertices[i].y(), z = b.restMesh.vertices[i].z();
      for (std::size_t k = 0; k < 7; ++k) {
        x += w[k] * b.attributes[k][i].x();
        y += w[k] * b.attributes[k][i].y();
        z += w[k] * b.attributes[k][i].z();
      }
      ASSERT_LT((out.vertices[i] - Vec3(x, y, z)).norm(), 1e-12);
    }
  }
}

TEST(ApplyShape, LinearityAndTopology) {
  std::mt19937_64 rng(13);
  const BlendShapeBasis b = randomBasis(rng, 9, 9, 7);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = randomWeights(rng, 7, -3, 3);
    const auto c = randomWeights(rng, 7, -3, 3);
    std::vector<double> sum(7);
    for (int k = 0; k < 7; ++k) {
      sum[k] = a[k] + c[k];
    }
    const Mesh ma = applyShape(b, ShapeWeights::unbounded(a));
    const Mesh mc = applyShape(b, ShapeWeights::unbounded(c));
    const Mesh ms = applyShape(b, ShapeWeights::unbounded(sum));
    for (std::size_t i = 0; i < b.vertexCount(); ++i) {
      ASSERT_LT((ma.vertices[i] + mc.vertices[i] - b.restMesh.vertices[i] - ms.vertices[i]).norm(), 1e-9);
    }
    ASSERT_EQ(ms.faces, b.restMesh.faces);
    ASSERT_EQ(ms.uvs, b.restMesh.uvs);
  }
}

TEST(ApplyShape, ClampsAndRejectsWrongLength) {
  std::mt19937_64 rng(14);
  const BlendShapeBasis b = randomBasis(rng, 2, 2, 3);
  const ShapeWeights w = ShapeWeights::clamped(b, {5.0, -5.0, 0.5});
  EXPECT_EQ(w.values(), (std::vector<double>{1.0, -1.0, 0.5}));
  try {
    applyShape(b, ShapeWeights::unbounded({1.0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Dimension);
  }
}

TEST(BuildBasis, RankOneSubsetIsExact) {
  const Mesh rest = test::gridMesh(3, 4);
  std::mt19937_64 rng(15);
  std::vector<Vec3> d;
  for (std::size_t i = 0; i < rest.vertices.size(); ++i) {
    d.push_back(test::randomVec(rng, -0.1, 0.1));
  }
  AttributeSubset subset{"weight", {displaced(rest, d, 1.0), displaced(rest, d, -1.0)}};
  const BasisBuild build = buildAttributeBasisWithReport({subset}, rest);
  const auto& field = build.basis.attributes[0];
  // Parallel to d.
  double dot = 0, nf = 0, nd = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    dot += field[i].dot(d[i]);
    nf += field[i].squaredNorm();
    nd += d[i].squaredNorm();
  }
  EXPECT_NEAR(std::abs(dot) / std::sqrt(nf * nd), 1.0, 1e-12);
  EXPECT_LT(build.fits[0].residual, 1e-18);
  // Weight +-1 reproduces both samples.
  const BlendShapeBasis& basis = build.basis;
  EXPECT_NEAR(basis.weightBounds[0].min, -1.0, 1e-12);
  EXPECT_NEAR(basis.weightBounds[0].max, 1.0, 1e-12);
  for (double w : {-1.0, 1.0}) {
    const Mesh m = applyShape(basis, ShapeWeights::clamped(basis, {w}));
    const Mesh& target = dot * w > 0 ? subset.samples[0] : subset.samples[1];
    for (std::size_t i = 0; i < d.size(); ++i) {
      ASSERT_LT((m.vertices[i] - target.vertices[i]).norm(), 1e-9);
    }
  }
}

TEST(BuildBasis, RecoversGenerativeDirection) {
  const Mesh rest = test::gridMesh(5, 5);
  std::mt19937_64 rng(16);
  std::normal_distribution<double> noise(0.0, 1e-6);
  std::vector<Vec3> d;
  for (std::size_t i = 0; i < rest.vertices.size(); ++i) {
    d.push_back(test::randomVec(rng, -0.1, 0.1));
  }
  AttributeSubset subset{"belly", {}};
  for (double t : {-1.0, -0.5, 0.5, 1.0}) {
    Mesh m = displaced(rest, d, t);
    for (Vec3& v : m.vertices) {
      v += Vec3(noise(rng), noise(rng), noise(rng));
    }
    subset.samples.push_back(m);
  }
  const BlendShapeBasis basis = buildAttributeBasis({subset}, rest);
  double dot = 0, nf = 0, nd = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    dot += basis.attributes[0][i].dot(d[i]);
    nf += basis.attributes[0][i].squaredNorm();
    nd += d[i].squaredNorm();
  }
  const double angle = std::acos(std::min(1.0, std::abs(dot) / std::sqrt(nf * nd)));
  EXPECT_LT(angle, 1e-3);
}

TEST(BuildBasis, MatchesDenseCovarianceOracle) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const int rows = 1 + trial % 4;
    const Mesh rest = test::gridMesh(rows, 4);
    ASSERT_LE(rest.vertices.size(), 50u);
    std::vector<AttributeSubset> corpus;
    for (int a = 0; a < 3; ++a) {
      AttributeSubset s{"a" + std::to_string(a), {}};
      const int count = 2 + (trial + a) % 6;
      for (int k = 0; k < count; ++k) {
        Mesh m = rest;
        for (Vec3& v : m.vertices) {
          v += test::randomVec(rng, -0.05, 0.05);
        }
        s.samples.push_back(m);
      }
      corpus.push_back(s);
    }
    const BasisBuild build = buildAttributeBasisWithReport(corpus, rest);
    for (std::size_t a = 0; a < corpus.size(); ++a) {
      Eigen::VectorXd top;
      const double oracle = denseResidual(corpus[a], rest, &top);
      ASSERT_NEAR(build.fits[a].residual, oracle, 1e-6);
      ASSERT_NEAR(subsetResidual(build.basis.attributes[a], corpus[a].samples, rest), oracle, 1e-6);
      // Unit direction times scale.
      Eigen::VectorXd f(3 * rest.vertices.size());
      for (std::size_t i = 0; i < rest.vertices.size(); ++i) {
        f.segment<3>(3 * i) = build.basis.attributes[a][i];
      }
      ASSERT_NEAR(std::abs(f.normalized().dot(top)), 1.0, 1e-6);
    }
  }
}

TEST(BuildBasis, ZeroVarianceNamesAttribute) {
  const Mesh rest = test::gridMesh(2, 2);
  try {
    buildAttributeBasis({AttributeSubset{"breasts", {rest, rest}}}, rest);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Degenerate);
    EXPECT_NE(std::string(e.what()).find("breasts"), std::string::npos);
  }
}

TEST(BuildBasis, TopologyMismatchIsCorpusError) {
  const Mesh rest = test::gridMesh(2, 2);
  Mesh other = test::gridMesh(2, 3);
  try {
    buildAttributeBasis({AttributeSubset{"weight", {rest, other}}}, rest);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Corpus);
  }
  Mesh flipped = rest;
  std::swap(flipped.faces[0].v[0], flipped.faces[0].v[1]);
  EXPECT_THROW(buildAttributeBasis({AttributeSubset{"weight", {rest, flipped}}}, rest), Error);
}

TEST(JacobiEigen, MatchesEigenSolver) {
  std::mt19937_64 rng(18);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 9;
    Eigen::MatrixXd a(n + 2, n);
    for (int r = 0; r < a.rows(); ++r) {
      for (int c = 0; c < n; ++c) {
        a(r, c) = std::normal_distribution<double>(0, 1)(rng);
      }
    }
    const Eigen::MatrixXd s = a.transpose() * a;
    const auto [lambda, v] = dominantEigenpair(s);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
    ASSERT_NEAR(lambda, es.eigenvalues()(n - 1), 1e-9 * std::max(1.0, lambda));
    ASSERT_LT((s * v - lambda * v).norm(), 1e-8 * std::max(1.0, lambda));
  }
}

TEST(BasisContainer, BinaryAndJsonRoundTrip) {
  std::mt19937_64 rng(19);
  BlendShapeBasis b = randomBasis(rng, 3, 3, 7);
  b.restMesh.faces.push_back(Face::tri(0, 1, 5));
  const BlendShapeBasis back = decodeBasis(encodeBasis(b));
  ASSERT_EQ(back.attributeNames, b.attributeNames);
  ASSERT_EQ(back.restMesh.faces, b.restMesh.faces);
  for (std::size_t k = 0; k < 7; ++k) {
    for (std::size_t i = 0; i < b.vertexCount(); ++i) {
      ASSERT_LT((back.attributes[k][i] - b.attributes[k][i]).norm(), 1e-6);
    }
  }
  // The JSON form is lossless relative to the decoded container.
  const BlendShapeBasis viaJson = basisFromJson(basisToJson(back));
  EXPECT_EQ(encodeBasis(viaJson), encodeBasis(back));
  EXPECT_NE(describeBasis(b).find("attr6"), std::string::npos);
}

TEST(BasisContainer, RejectsCorruptInput) {
  std::mt19937_64 rng(20);
  const auto bytes = encodeBasis(randomBasis(rng, 2, 2, 2));
  for (std::size_t cut = 0; cut < bytes.size(); cut += 7) {
    std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + static_cast<long>(cut));
    EXPECT_THROW(decodeBasis(part), Error);
  }
  auto extra = bytes;
  extra.push_back(0);
  EXPECT_THROW(decodeBasis(extra), Error);
  auto badMagic = bytes;
  badMagic[0] = 'X';
  EXPECT_THROW(decodeBasis(badMagic), Error);
}
