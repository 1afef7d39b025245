// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#include "skf/error.hpp"
#include "skf/sketch.hpp"

namespace skf {

void carve(RadianceField& field, const SketchSet& sketches) {
  if (sketches.views.empty()) throw Error(Errc::kEmptySketchSet, "carve needs at least one sketch view");
  const std::span<const SketchView> views(sketches.views);
#pragma omp parallel for schedule(static)
  for (int k = 0; k < field.res.z; ++k)
    for (int j = 0; j < field.res.y; ++j)
      for (int i = 0; i < field.res.x; ++i)
        if (in_visual_hull(field.lattice_point(i, j, k), views))
          field.density[field.index(i, j, k)] = kCarvedDensityParam;

  // Bit clears touch shared words, so this pass stays serial.
  const GridRes& oc = field.occupancy.res();
  for (int k = 0; k < oc.z; ++k)
    for (int j = 0; j < oc.y; ++j)
      for (int i = 0; i < oc.x; ++i)
        if (in_visual_hull(field.occupancy.cell_bounds(field.bbox, i, j, k).center(), views))
          field.occupancy.set(field.occupancy.index(i, j, k), false);
}

}  // namespace skf
