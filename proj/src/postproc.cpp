#include "lpsd/postproc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace lpsd {

void AgcConfig::validate(std::int64_t n) const {
    if (window < 1 || window % 2 == 0)
        throw std::invalid_argument("AgcConfig: window must be odd and >= 1");
    if (window > n)
        throw std::invalid_argument("AgcConfig: window " +
                                    std::to_string(window) +
                                    " exceeds trace length " + std::to_string(n));
    if (epsilon <= 0.0)
        throw std::invalid_argument("AgcConfig: epsilon must be > 0");
}

Grid agc(const Grid& x, const AgcConfig& cfg) {
    cfg.validate(x.n);
    const std::int64_t half = cfg.window / 2;
    Grid out(x.n, x.m);
    // Prefix sums of squares per trace make each window RMS O(1).
    std::vector<double> psq(static_cast<std::size_t>(x.n) + 1);
    for (std::int64_t j = 0; j < x.m; ++j) {
        const double* t = x.trace(j);
        psq[0] = 0.0;
        for (std::int64_t i = 0; i < x.n; ++i)
            psq[static_cast<std::size_t>(i + 1)] =
                psq[static_cast<std::size_t>(i)] + t[i] * t[i];
        for (std::int64_t i = 0; i < x.n; ++i) {
            const std::int64_t lo = std::max<std::int64_t>(0, i - half);
            const std::int64_t hi = std::min<std::int64_t>(x.n - 1, i + half);
            const double energy = psq[static_cast<std::size_t>(hi + 1)] -
                                  psq[static_cast<std::size_t>(lo)];
            const double rms = std::sqrt(energy / static_cast<double>(hi - lo + 1));
            out.at(i, j) = t[i] / (rms + cfg.epsilon);
        }
    }
    return out;
}

Tiling mute_and_pad(const Grid& grid, std::int64_t patch_n,
                    std::int64_t patch_m) {
    if (patch_n < 1 || patch_m < 1)
        throw std::invalid_argument("mute_and_pad: patch dims must be >= 1");
    Tiling t;
    t.layout.grid_n = grid.n;
    t.layout.grid_m = grid.m;
    t.layout.patch_n = patch_n;
    t.layout.patch_m = patch_m;
    t.layout.tiles_n = (grid.n + patch_n - 1) / patch_n;
    t.layout.tiles_m = (grid.m + patch_m - 1) / patch_m;
    t.patches.reserve(
        static_cast<std::size_t>(t.layout.tiles_n * t.layout.tiles_m));
    for (std::int64_t ti = 0; ti < t.layout.tiles_n; ++ti) {
        for (std::int64_t tj = 0; tj < t.layout.tiles_m; ++tj) {
            Grid p(patch_n, patch_m);
            for (std::int64_t j = 0; j < patch_m; ++j) {
                const std::int64_t gj = tj * patch_m + j;
                if (gj >= grid.m) continue; // muted trace stays zero
                for (std::int64_t i = 0; i < patch_n; ++i) {
                    const std::int64_t gi = ti * patch_n + i;
                    if (gi >= grid.n) continue;
                    p.at(i, j) = grid.at(gi, gj);
                }
            }
            t.patches.push_back(std::move(p));
        }
    }
    return t;
}

Grid reassemble(const Tiling& tiling) {
    const TileLayout& lo = tiling.layout;
    if (static_cast<std::int64_t>(tiling.patches.size()) !=
        lo.tiles_n * lo.tiles_m)
        throw std::invalid_argument("reassemble: patch count does not match layout");
    Grid out(lo.grid_n, lo.grid_m);
    for (std::int64_t ti = 0; ti < lo.tiles_n; ++ti) {
        for (std::int64_t tj = 0; tj < lo.tiles_m; ++tj) {
            const Grid& p =
                tiling.patches[static_cast<std::size_t>(ti * lo.tiles_m + tj)];
            if (p.n != lo.patch_n || p.m != lo.patch_m)
                throw std::invalid_argument("reassemble: patch shape mismatch");
            for (std::int64_t j = 0; j < lo.patch_m; ++j) {
                const std::int64_t gj = tj * lo.patch_m + j;
                if (gj >= lo.grid_m) continue;
                for (std::int64_t i = 0; i < lo.patch_n; ++i) {
                    const std::int64_t gi = ti * lo.patch_n + i;
                    if (gi >= lo.grid_n) continue;
                    out.at(gi, gj) = p.at(i, j);
                }
            }
        }
    }
    return out;
}

} // namespace lpsd
