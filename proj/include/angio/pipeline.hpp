#pragma once

#include <string>
#include <vector>

#include "angio/config.hpp"
#include "angio/contour.hpp"
#include "angio/core.hpp"
#include "angio/filters.hpp"
#include "angio/preprocess.hpp"
#include "angio/tracker.hpp"

namespace angio {

/// Everything derived from one input image that later stages share.
struct ImageContext {
  GrayImage input;
  PreprocessStages stages;
  RidgeSet ridges;
  ChanVeseResult cv;
  VesselContour contour;
};

/// Smoothing applied to the input before it refines contour vertices.
constexpr double contour_field_sigma = 1.0;

inline ImageContext prepare_image(const GrayImage& input, const Config& cfg) {
  validate(cfg);
  ImageContext ctx;
  ctx.input = input;
  ctx.stages = preprocess(input, cfg);
  ctx.ridges = detect_ridges(ctx.stages.tracking, cfg);
  const GrayImage& b = ctx.stages.tracking;
  const VesselMask init = two_means_init(b);
  if (init.count() == 0 || init.count() == b.size()) {
    // Flat blend: nothing to separate.
    ctx.cv.mask = VesselMask(b.width(), b.height());
    ctx.cv.degenerate = true;
  } else {
    ctx.cv = chan_vese_run(b, cfg.cv, init);
  }
  const GrayImage field = gaussian_blur(input, contour_field_sigma);
  ctx.contour = extract_contours(snap_mask_to_field(ctx.cv.mask, field), &field);
  return ctx;
}

}  // namespace angio
