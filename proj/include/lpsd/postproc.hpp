#pragma once

#include <cstdint>
#include <vector>

#include "lpsd/grid.hpp"

// Field-data post-processing: automatic gain control and the patch tiling
// used to feed arbitrary-size trace grids through a fixed-size network.

namespace lpsd {

struct AgcConfig {
    std::int64_t window = 101; // samples, odd, <= trace length
    double epsilon = 1e-8;     // stabilizer added to the window RMS

    void validate(std::int64_t n) const;
};

// Per trace: divide each sample by the RMS over a centered window (clipped
// at the trace ends) plus epsilon.
Grid agc(const Grid& x, const AgcConfig& cfg);

struct TileLayout {
    std::int64_t grid_n = 0, grid_m = 0;   // original extent
    std::int64_t patch_n = 0, patch_m = 0; // patch size
    std::int64_t tiles_n = 0, tiles_m = 0; // tile counts per axis
};

struct Tiling {
    TileLayout layout;
    // Row-major over (tile_i, tile_j); each patch is patch_n x patch_m with
    // zero padding beyond the original extent (missing traces muted).
    std::vector<Grid> patches;
};

// Overlap-free tiling into network-sized patches.
Tiling mute_and_pad(const Grid& grid, std::int64_t patch_n,
                    std::int64_t patch_m);

// Inverse of mute_and_pad restricted to the original extent.
Grid reassemble(const Tiling& tiling);

} // namespace lpsd
