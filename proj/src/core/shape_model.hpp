#pragma once

#include "geometry.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace avf::shape {

struct WeightBounds {
  double min = -1.0;
  double max = 1.0;
};

/// Rest mesh plus one displacement field per semantic attribute:
///   x = x_rest + sum_k weight_k * field_k
struct BlendShapeBasis {
  Mesh restMesh;
  std::vector<std::string> attributeNames;
  std::vector<std::vector<Vec3>> attributes;
  std::vector<WeightBounds> weightBounds;

  std::size_t attributeCount() const {
    return attributeNames.size();
  }
  std::size_t vertexCount() const {
    return restMesh.vertices.size();
  }

  /// Throws Error(Dimension) on inconsistent sizes.
  void validate() const;
};

/// One value per attribute. `clamped` enforces the basis bounds; `unbounded`
/// skips them and is meant for linearity checks and internal composition.
class ShapeWeights {
 public:
  static ShapeWeights clamped(const BlendShapeBasis& basis, std::vector<double> values);
  static ShapeWeights unbounded(std::vector<double> values);
  static ShapeWeights zero(const BlendShapeBasis& basis);

  const std::vector<double>& values() const {
    return values_;
  }
  std::size_t size() const {
    return values_.size();
  }

 private:
  explicit ShapeWeights(std::vector<double> values) : values_(std::move(values)) {}
  std::vector<double> values_;
};

/// Evaluates the blendshape model. Summation is attribute-major so results
/// are bitwise stable. Faces and UVs are copied; normals are recomputed.
Mesh applyShape(const BlendShapeBasis& basis, const ShapeWeights& weights);

struct AttributeSubset {
  std::string name;
  std::vector<Mesh> samples;
};

struct AttributeFit {
  double singularValue = 0.0; // of the rest-centered sample matrix
  double residual = 0.0; // sum of squared reconstruction errors
  std::vector<double> projections; // per sample, in weight units
};

struct BasisBuild {
  BlendShapeBasis basis;
  std::vector<AttributeFit> fits;
};

/// Per-subset PCA: one principal component per attribute, taken from the
/// rest-centered samples. The field is scaled so the most extreme sample sits
/// at weight +1; bounds span every sample projection and always include 0.
BasisBuild buildAttributeBasisWithReport(const std::vector<AttributeSubset>& corpus,
                                         const Mesh& restMesh);
BlendShapeBasis buildAttributeBasis(const std::vector<AttributeSubset>& corpus,
                                    const Mesh& restMesh);

/// Sum of squared distances between each sample and its best reconstruction
/// along the attribute's field direction.
double subsetResidual(const std::vector<Vec3>& field, const std::vector<Mesh>& samples,
                      const Mesh& restMesh);

/// Dominant eigenpair of a small symmetric matrix by cyclic Jacobi rotations.
std::pair<double, Eigen::VectorXd> dominantEigenpair(const Eigen::MatrixXd& symmetric);

// Container (.avbasis): "AVBASIS\0", u32 version, u32 n, u32 m, u32 faces,
// u32 flags, m names (u32 length + bytes), then little-endian arrays:
// f32 rest[3n], faces (u32 arity + u32 indices), f32 uv[2n] if flags&1,
// f32 fields[m*3n], f32 bounds[2m].
inline constexpr std::uint32_t kBasisVersion = 1;

std::vector<std::uint8_t> encodeBasis(const BlendShapeBasis& basis);
BlendShapeBasis decodeBasis(std::span<const std::uint8_t> bytes);
void saveBasis(const BlendShapeBasis& basis, const std::filesystem::path& path);
BlendShapeBasis loadBasis(const std::filesystem::path& path);

/// Lossless JSON debug form of the same data.
std::string basisToJson(const BlendShapeBasis& basis);
BlendShapeBasis basisFromJson(const std::string& text);

/// Summary for `basis info`: vertex/face counts, attribute names and bounds.
std::string describeBasis(const BlendShapeBasis& basis);

/// Corpus directory: one subdirectory per attribute (lexicographic order),
/// each holding OBJ samples (lexicographic order).
std::vector<AttributeSubset> loadCorpusDirectory(const std::filesystem::path& dir);

} // namespace avf::shape
