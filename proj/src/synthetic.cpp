#include "lpsd/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "lpsd/kernels.hpp"
#include "lpsd/rng.hpp"

namespace lpsd {

namespace {

struct Spike {
    std::int64_t pos;
    double amp;
};

double draw_amplitude(const ReflectivitySpec& spec, rng::Stream& s) {
    const double a = s.uniform(spec.amp_lo, spec.amp_hi);
    return s.coin() ? a : -a;
}

// k sorted positions with pairwise distance >= gap, uniform over all valid
// sets: draw k distinct values in the gap-compressed index space and expand.
std::vector<std::int64_t> draw_positions(std::int64_t n, std::int64_t k,
                                         std::int64_t gap, rng::Stream& s) {
    const std::int64_t compressed = n - (k - 1) * gap;
    std::vector<std::int64_t> q;
    q.reserve(static_cast<std::size_t>(k));
    while (static_cast<std::int64_t>(q.size()) < k) {
        const std::int64_t c = s.range(0, compressed - 1);
        if (std::find(q.begin(), q.end(), c) == q.end()) q.push_back(c);
    }
    std::sort(q.begin(), q.end());
    for (std::size_t i = 0; i < q.size(); ++i)
        q[i] += static_cast<std::int64_t>(i) * gap;
    return q;
}

std::vector<Spike> first_trace(const ReflectivitySpec& spec, rng::Stream& s) {
    const std::int64_t k = s.range(spec.min_spikes, spec.max_spikes);
    const auto pos = draw_positions(spec.n, k, spec.min_gap, s);
    std::vector<Spike> spikes(pos.size());
    for (std::size_t i = 0; i < pos.size(); ++i)
        spikes[i] = {pos[i], draw_amplitude(spec, s)};
    return spikes;
}

// Jitter the previous trace's spikes while keeping order, min_gap and bounds;
// spikes keep their amplitude so layers stay coherent laterally.
std::vector<Spike> jitter_trace(const ReflectivitySpec& spec,
                                const std::vector<Spike>& prev,
                                rng::Stream& s) {
    const std::int64_t k = static_cast<std::int64_t>(prev.size());
    const std::int64_t gap = spec.min_gap;
    std::vector<Spike> out;
    out.reserve(prev.size());
    for (std::int64_t i = 0; i < k; ++i) {
        const std::int64_t jit =
            spec.lateral_coherence > 0
                ? s.range(-spec.lateral_coherence, spec.lateral_coherence)
                : 0;
        const std::int64_t lo = i == 0 ? 0 : out.back().pos + std::max<std::int64_t>(gap, 1);
        const std::int64_t hi = spec.n - 1 - (k - 1 - i) * std::max<std::int64_t>(gap, 1);
        const std::int64_t p = std::clamp(prev[static_cast<std::size_t>(i)].pos + jit, lo, hi);
        out.push_back({p, prev[static_cast<std::size_t>(i)].amp});
    }
    return out;
}

void apply_birth_death(const ReflectivitySpec& spec, std::vector<Spike>& spikes,
                       rng::Stream& s) {
    if (spec.birth_death_prob <= 0.0) return;
    const std::int64_t k = static_cast<std::int64_t>(spikes.size());
    std::int64_t births = 0;
    // Walk spikes back to front so deaths do not disturb pending indices.
    for (std::int64_t i = k - 1; i >= 0; --i) {
        if (s.uniform() >= spec.birth_death_prob) continue;
        if (s.coin()) {
            if (static_cast<std::int64_t>(spikes.size()) > spec.min_spikes)
                spikes.erase(spikes.begin() + i);
        } else {
            ++births;
        }
    }
    const std::int64_t gap = std::max<std::int64_t>(spec.min_gap, 1);
    for (std::int64_t b = 0; b < births; ++b) {
        if (static_cast<std::int64_t>(spikes.size()) >= spec.max_spikes) break;
        for (int attempt = 0; attempt < 32; ++attempt) {
            const std::int64_t p = s.range(0, spec.n - 1);
            const bool clear = std::all_of(
                spikes.begin(), spikes.end(),
                [&](const Spike& sp) { return std::llabs(sp.pos - p) >= gap; });
            if (clear) {
                const auto it = std::lower_bound(
                    spikes.begin(), spikes.end(), p,
                    [](const Spike& sp, std::int64_t v) { return sp.pos < v; });
                spikes.insert(it, {p, draw_amplitude(spec, s)});
                break;
            }
        }
    }
}

} // namespace

void ReflectivitySpec::validate() const {
    if (n < 1 || m < 1)
        throw std::invalid_argument("ReflectivitySpec: n, m must be >= 1");
    if (min_spikes < 1 || min_spikes > max_spikes || max_spikes >= n)
        throw std::invalid_argument(
            "ReflectivitySpec: need 0 < min_spikes <= max_spikes < n");
    if (amp_lo <= 0.0 || amp_lo > amp_hi)
        throw std::invalid_argument(
            "ReflectivitySpec: need 0 < amp_lo <= amp_hi");
    if (min_gap < 0)
        throw std::invalid_argument("ReflectivitySpec: min_gap must be >= 0");
    if (max_spikes * (min_gap + 1) > n)
        throw std::invalid_argument(
            "ReflectivitySpec: infeasible, max_spikes * (min_gap + 1) = " +
            std::to_string(max_spikes * (min_gap + 1)) + " exceeds n = " +
            std::to_string(n));
}

Grid sample_reflectivity(const ReflectivitySpec& spec) {
    return sample_reflectivity(spec, spec.seed);
}

Grid sample_reflectivity(const ReflectivitySpec& spec, std::uint64_t seed) {
    spec.validate();
    rng::Stream s(seed);
    Grid x(spec.n, spec.m);
    std::vector<Spike> spikes = first_trace(spec, s);
    for (std::int64_t j = 0; j < spec.m; ++j) {
        if (j > 0) {
            spikes = jitter_trace(spec, spikes, s);
            apply_birth_death(spec, spikes, s);
        }
        for (const Spike& sp : spikes) x.at(sp.pos, j) = sp.amp;
    }
    return x;
}

Dataset make_dataset(const ReflectivitySpec& spec, const NoiseSpec& noise,
                     std::int64_t count, const ConvOperator& op) {
    spec.validate();
    if (count < 1)
        throw std::invalid_argument("make_dataset: count must be >= 1");
    if (op.n() != spec.n)
        throw std::invalid_argument("make_dataset: operator n mismatch");

    Dataset ds;
    ds.records.reserve(static_cast<std::size_t>(count));
    for (std::int64_t r = 0; r < count; ++r) {
        DatasetRecord rec;
        rec.x = sample_reflectivity(
            spec, rng::mix(spec.seed, static_cast<std::uint64_t>(r)));
        NoiseSpec rec_noise = noise;
        rec_noise.seed = rng::mix(noise.seed, static_cast<std::uint64_t>(r) + 0x6e6f6973ULL);
        Grid y_raw = corrupt(op.apply(rec.x), rec_noise);
        rec.mag = kernels::max_abs(y_raw.v.data(), y_raw.size());
        rec.snr_db = noise.snr_db;
        kernels::scale(1.0 / rec.mag, y_raw.v.data(), y_raw.size());
        rec.y = std::move(y_raw);
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

Grid denormalize(const Grid& x_hat, double mag) {
    if (mag <= 0.0)
        throw std::invalid_argument("denormalize: mag must be > 0");
    Grid out = x_hat;
    kernels::scale(mag, out.v.data(), out.size());
    return out;
}

Grid downsample_time(const Grid& g, std::int64_t stride) {
    if (stride < 1)
        throw std::invalid_argument("downsample_time: stride must be >= 1");
    const std::int64_t nd = (g.n + stride - 1) / stride;
    Grid out(nd, g.m);
    for (std::int64_t j = 0; j < g.m; ++j)
        for (std::int64_t i = 0; i < nd; ++i)
            out.at(i, j) = g.at(i * stride, j);
    return out;
}

} // namespace lpsd
