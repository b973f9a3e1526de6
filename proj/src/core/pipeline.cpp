#include "pipeline.hpp"

#include "error.hpp"

namespace avf::pipeline {

DressedAvatar dress(const assets::BodyAsset& body, const shape::ShapeWeights& weights,
                    const std::vector<const skin::GarmentAsset*>& garments) {
  DressedAvatar out;
  out.body = shape::applyShape(body.basis, weights);
  for (const skin::GarmentAsset* g : garments) {
    skin::GarmentAsset prepared =
        skin::prepareGarment(out.body, body.binding, g->mesh, g->offsetEpsilon);
    out.garments.push_back({g->id, std::move(prepared.mesh), std::move(*prepared.binding)});
  }
  return out;
}

PosedAvatar pose(const DressedAvatar& avatar, const skin::SkinBinding& bodyBinding,
                 const Pose& pose) {
  PosedAvatar out;
  out.body = skin::skinMesh(avatar.body, bodyBinding, pose);
  for (const DressedGarment& g : avatar.garments) {
    out.garments.push_back(skin::skinMesh(g.mesh, g.binding, pose));
  }
  for (const Transform& t : forwardKinematics(bodyBinding.skeleton, pose)) {
    out.joints.push_back(t.translation);
  }
  return out;
}

std::vector<std::uint32_t> segmentation(const DressedAvatar& avatar,
                                        const skin::SkinBinding& bodyBinding,
                                        const std::vector<std::uint32_t>& garmentLabels) {
  if (garmentLabels.size() != avatar.garments.size()) {
    throw Error(ErrorCode::Dimension, "one label per garment expected");
  }
  const auto groups = retarget::bodyGroups(bodyBinding.skeleton, retarget::AliasTable::builtin());
  std::vector<std::uint32_t> labels;
  labels.reserve(avatar.body.vertexCount());
  for (const auto& w : bodyBinding.weights) {
    // Influences are sorted by weight, lower joint index first on ties.
    labels.push_back(static_cast<std::uint32_t>(groups.at(w.front().joint)));
  }
  for (std::size_t k = 0; k < avatar.garments.size(); ++k) {
    labels.insert(labels.end(), avatar.garments[k].mesh.vertexCount(),
                  kGarmentLabelBase + garmentLabels[k]);
  }
  return labels;
}

} // namespace avf::pipeline
