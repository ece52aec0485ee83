#pragma once

namespace gf::mc {

extern const int kEdgeTable[256];
extern const int kTriTable[256][16];
extern const int kMcEdgeCorners[12][2];
extern const int kMcCornerOffset[8][3];

}  // namespace gf::mc
