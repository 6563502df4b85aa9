#pragma once

// Demo-grade dense flow by exhaustive block matching. Good enough for
// synthetic fixtures and the editor demo, not a replacement for a learned
// flow network.

#include "distix/imaging.hpp"

namespace distix {

struct BlockMatchOptions {
  int radius = 4;     // search range, px in each direction
  int block = 2;      // half-size of the SAD window
  bool subpixel = true;  // parabolic refinement of the integer optimum
};

// Flow anchored on `from`: from(p) ~ to(p + flow(p)). Ties prefer the
// shortest displacement.
FlowField block_match(const Frame& from, const Frame& to, const BlockMatchOptions& options = {});

}  // namespace distix
