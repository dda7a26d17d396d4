#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace lpsd {

// Dense n x m block of samples: n time samples per trace, m traces. Traces
// are stored contiguously (time index fastest), matching the on-disk layout.
// m == 1 is the single-trace (1D) case.
struct Grid {
    std::int64_t n = 0;
    std::int64_t m = 0;
    std::vector<double> v;

    Grid() = default;
    Grid(std::int64_t n_, std::int64_t m_)
        : n(n_), m(m_), v(static_cast<std::size_t>(n_ * m_), 0.0) {
        if (n_ < 0 || m_ < 0) throw std::invalid_argument("Grid: negative dims");
    }

    static Grid column(std::vector<double> samples) {
        Grid g;
        g.n = static_cast<std::int64_t>(samples.size());
        g.m = 1;
        g.v = std::move(samples);
        return g;
    }

    double& at(std::int64_t i, std::int64_t j) {
        return v[static_cast<std::size_t>(j * n + i)];
    }
    double at(std::int64_t i, std::int64_t j) const {
        return v[static_cast<std::size_t>(j * n + i)];
    }

    double* trace(std::int64_t j) { return v.data() + j * n; }
    const double* trace(std::int64_t j) const { return v.data() + j * n; }

    std::size_t size() const { return v.size(); }
    bool same_shape(const Grid& o) const { return n == o.n && m == o.m; }
};

} // namespace lpsd
