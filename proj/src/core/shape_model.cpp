#include "shape_model.hpp"

#include "error.hpp"

#include <cmath>
#include <limits>

namespace avf::shape {

void BlendShapeBasis::validate() const {
  const std::size_t n = restMesh.vertices.size();
  const std::size_t m = attributeNames.size();
  if (attributes.size() != m || weightBounds.size() != m) {
    throw Error(ErrorCode::Dimension, "basis has " + std::to_string(m) + " names, " +
                                          std::to_string(attributes.size()) + " fields and " +
                                          std::to_string(weightBounds.size()) + " bounds");
  }
  for (std::size_t k = 0; k < m; ++k) {
    if (attributes[k].size() != n) {
      throw Error(ErrorCode::Dimension, "attribute '" + attributeNames[k] + "' has " +
                                            std::to_string(attributes[k].size()) +
                                            " entries for " + std::to_string(n) + " vertices");
    }
    if (!(weightBounds[k].min <= weightBounds[k].max)) {
      throw Error(ErrorCode::Dimension, "attribute '" + attributeNames[k] + "' has empty bounds");
    }
  }
  validateMesh(restMesh);
}

ShapeWeights ShapeWeights::clamped(const BlendShapeBasis& basis, std::vector<double> values) {
  if (values.size() != basis.attributeCount()) {
    throw Error(ErrorCode::Dimension, "expected " + std::to_string(basis.attributeCount()) +
                                          " weights, got " + std::to_string(values.size()));
  }
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!std::isfinite(values[k])) {
      throw Error(ErrorCode::InvalidArgument, "weight '" + basis.attributeNames[k] +
                                                  "' is not finite");
    }
    values[k] = std::clamp(values[k], basis.weightBounds[k].min, basis.weightBounds[k].max);
  }
  return ShapeWeights(std::move(values));
}

ShapeWeights ShapeWeights::unbounded(std::vector<double> values) {
  return ShapeWeights(std::move(values));
}

ShapeWeights ShapeWeights::zero(const BlendShapeBasis& basis) {
  return ShapeWeights(std::vector<double>(basis.attributeCount(), 0.0));
}

Mesh applyShape(const BlendShapeBasis& basis, const ShapeWeights& weights) {
  if (weights.size() != basis.attributeCount()) {
    throw Error(ErrorCode::Dimension, "basis has " + std::to_string(basis.attributeCount()) +
                                          " attributes, got " + std::to_string(weights.size()) +
                                          " weights");
  }
  Mesh out = basis.restMesh;
  for (std::size_t k = 0; k < basis.attributeCount(); ++k) {
    const double w = weights.values()[k];
    if (w == 0.0) {
      continue;
    }
    const std::vector<Vec3>& field = basis.attributes[k];
    for (std::size_t i = 0; i < out.vertices.size(); ++i) {
      out.vertices[i] += w * field[i];
    }
  }
  out.normals = computeVertexNormals(out);
  return out;
}

std::pair<double, Eigen::VectorXd> dominantEigenpair(const Eigen::MatrixXd& symmetric) {
  const Eigen::Index k = symmetric.rows();
  Eigen::MatrixXd a = symmetric;
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(k, k);
  const double scale = std::max(a.norm(), std::numeric_limits<double>::min());

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < k; ++p) {
      for (Eigen::Index q = p + 1; q < k; ++q) {
        off += a(p, q) * a(p, q);
      }
    }
    if (std::sqrt(off) <= 1e-17 * scale) {
      break;
    }
    for (Eigen::Index p = 0; p < k; ++p) {
      for (Eigen::Index q = p + 1; q < k; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) {
          continue;
        }
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::hypot(theta, 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index r = 0; r < k; ++r) {
          const double arp = a(r, p);
          const double arq = a(r, q);
          a(r, p) = c * arp - s * arq;
          a(r, q) = s * arp + c * arq;
        }
        for (Eigen::Index r = 0; r < k; ++r) {
          const double apr = a(p, r);
          const double aqr = a(q, r);
          a(p, r) = c * apr - s * aqr;
          a(q, r) = s * apr + c * aqr;
        }
        for (Eigen::Index r = 0; r < k; ++r) {
          const double vrp = v(r, p);
          const double vrq = v(r, q);
          v(r, p) = c * vrp - s * vrq;
          v(r, q) = s * vrp + c * vrq;
        }
      }
    }
  }
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < k; ++i) {
    if (a(i, i) > a(best, best)) {
      best = i;
    }
  }
  return {a(best, best), v.col(best)};
}

namespace {

void checkTopology(const std::string& attribute, const Mesh& sample, const Mesh& rest) {
  if (sample.vertices.size() != rest.vertices.size() || sample.faces != rest.faces) {
    throw Error(ErrorCode::Corpus, "sample of attribute '" + attribute +
                                       "' does not share the rest mesh topology");
  }
}

} // namespace

double subsetResidual(const std::vector<Vec3>& field, const std::vector<Mesh>& samples,
                      const Mesh& restMesh) {
  double fieldNorm2 = 0.0;
  for (const Vec3& f : field) {
    fieldNorm2 += f.squaredNorm();
  }
  double residual = 0.0;
  for (const Mesh& s : samples) {
    double proj = 0.0;
    for (std::size_t i = 0; i < field.size(); ++i) {
      proj += field[i].dot(s.vertices[i] - restMesh.vertices[i]);
    }
    const double coeff = fieldNorm2 > 0.0 ? proj / fieldNorm2 : 0.0;
    for (std::size_t i = 0; i < field.size(); ++i) {
      residual += (s.vertices[i] - restMesh.vertices[i] - coeff * field[i]).squaredNorm();
    }
  }
  return residual;
}

BasisBuild buildAttributeBasisWithReport(const std::vector<AttributeSubset>& corpus,
                                         const Mesh& restMesh) {
  validateMesh(restMesh);
  const std::size_t n = restMesh.vertices.size();
  const Eigen::Index dim = static_cast<Eigen::Index>(3 * n);

  BasisBuild out;
  out.basis.restMesh = restMesh;
  out.basis.restMesh.normals = computeVertexNormals(restMesh);

  for (const AttributeSubset& subset : corpus) {
    if (subset.samples.size() < 2) {
      throw Error(ErrorCode::Corpus,
                  "attribute '" + subset.name + "' needs at least 2 samples");
    }
    for (const Mesh& s : subset.samples) {
      checkTopology(subset.name, s, restMesh);
    }

    // Rest-centered sample matrix, one flattened sample per row.
    const Eigen::Index rows = static_cast<Eigen::Index>(subset.samples.size());
    Eigen::MatrixXd centered(rows, dim);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const Mesh& s = subset.samples[r];
      for (std::size_t i = 0; i < n; ++i) {
        centered.row(r).segment<3>(3 * i) = (s.vertices[i] - restMesh.vertices[i]).transpose();
      }
    }
    if (centered.norm() < 1e-12) {
      throw Error(ErrorCode::Degenerate,
                  "attribute '" + subset.name + "' has zero variance around the rest mesh");
    }

    // The dominant right singular vector comes from the small Gram matrix.
    const Eigen::MatrixXd gram = centered * centered.transpose();
    const auto [lambda, left] = dominantEigenpair(gram);
    Eigen::VectorXd dir = centered.transpose() * left;
    const double dirNorm = dir.norm();
    if (!(dirNorm > 0.0)) {
      throw Error(ErrorCode::Degenerate,
                  "attribute '" + subset.name + "' has zero variance around the rest mesh");
    }
    dir /= dirNorm;

    Eigen::VectorXd proj = centered * dir;
    const double hi = proj.maxCoeff();
    const double lo = proj.minCoeff();
    const double extent = std::max(hi, -lo);
    bool flip = -lo > hi + 1e-12 * extent;
    if (std::abs(hi + lo) <= 1e-12 * extent) {
      for (Eigen::Index r = 0; r < rows; ++r) {
        if (std::abs(proj[r]) > 1e-12 * extent) {
          flip = proj[r] < 0.0;
          break;
        }
      }
    }
    if (flip) {
      dir = -dir;
      proj = -proj;
    }

    std::vector<Vec3> field(n);
    for (std::size_t i = 0; i < n; ++i) {
      field[i] = extent * dir.segment<3>(3 * i);
    }

    AttributeFit fit;
    fit.singularValue = std::sqrt(std::max(lambda, 0.0));
    for (Eigen::Index r = 0; r < rows; ++r) {
      fit.projections.push_back(proj[r] / extent);
    }
    fit.residual = subsetResidual(field, subset.samples, restMesh);

    WeightBounds bounds;
    bounds.min = std::min(0.0, *std::min_element(fit.projections.begin(), fit.projections.end()));
    bounds.max = std::max(0.0, *std::max_element(fit.projections.begin(), fit.projections.end()));

    out.basis.attributeNames.push_back(subset.name);
    out.basis.attributes.push_back(std::move(field));
    out.basis.weightBounds.push_back(bounds);
    out.fits.push_back(std::move(fit));
  }
  return out;
}

BlendShapeBasis buildAttributeBasis(const std::vector<AttributeSubset>& corpus,
                                    const Mesh& restMesh) {
  return buildAttributeBasisWithReport(corpus, restMesh).basis;
}

} // namespace avf::shape
