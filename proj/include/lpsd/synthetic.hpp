#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lpsd/forward_model.hpp"
#include "lpsd/grid.hpp"

// Paired (reflectivity, trace) data. Reflectivity traces are sparse spike
// trains; traces are wavelet-convolved, optionally noise-corrupted, and
// normalized to max |y| = 1 with the magnification factor recorded per
// record. The mean is never subtracted.

namespace lpsd {

struct ReflectivitySpec {
    std::int64_t n = 352;
    std::int64_t m = 1;
    std::int64_t min_spikes = 3;
    std::int64_t max_spikes = 40;
    double amp_lo = 0.1;
    double amp_hi = 1.0;
    std::int64_t min_gap = 3;
    // 2D: per-trace spike-position jitter (samples) between adjacent traces;
    // 0 keeps positions identical down the section.
    std::int64_t lateral_coherence = 0;
    // 2D: chance per spike per trace of a birth/death event, keeping the
    // spike count inside [min_spikes, max_spikes].
    double birth_death_prob = 0.02;
    std::uint64_t seed = 0;

    void validate() const;
};

struct DatasetRecord {
    Grid x;                       // reflectivity, physical scale
    Grid y;                       // normalized noisy trace, max |y| = 1
    double mag = 1.0;             // max |y_raw| before normalization
    std::optional<double> snr_db; // noise metadata, nullopt = noiseless
};

struct Dataset {
    std::vector<DatasetRecord> records;

    std::int64_t size() const {
        return static_cast<std::int64_t>(records.size());
    }
    bool empty() const { return records.empty(); }
    std::int64_t n() const { return records.empty() ? 0 : records[0].x.n; }
    std::int64_t m() const { return records.empty() ? 0 : records[0].x.m; }
};

// One reflectivity block per spec (uses spec.seed). Each trace carries k
// spikes, k uniform in [min_spikes, max_spikes], positions uniform subject to
// min_gap, amplitudes uniform in +-[amp_lo, amp_hi]. For m > 1 the spike
// pattern of trace j+1 is trace j's jittered by at most lateral_coherence
// samples, with occasional birth/death events.
Grid sample_reflectivity(const ReflectivitySpec& spec);

// Same, with an explicit seed (make_dataset derives one per record so
// generation order never matters).
Grid sample_reflectivity(const ReflectivitySpec& spec, std::uint64_t seed);

Dataset make_dataset(const ReflectivitySpec& spec, const NoiseSpec& noise,
                     std::int64_t count, const ConvOperator& op);

// mag * x_hat; brings a normalized-domain estimate back to physical scale.
Grid denormalize(const Grid& x_hat, double mag);

// Keep every stride-th time sample of each trace (stride >= 1). Used to
// emulate coarser sampling, which compacts the reflectivity.
Grid downsample_time(const Grid& g, std::int64_t stride);

} // namespace lpsd
