#pragma once

#include "gorder/expr.hpp"

#include <cstdint>
#include <memory>
#include <span>

namespace gorder {

struct Range {
    double lo = 0.0;
    double hi = 0.0;

    double width() const noexcept { return hi - lo; }
    double at(double u) const noexcept { return lo + u * (hi - lo); }
    bool contains(double v) const noexcept { return v >= lo && v <= hi; }
};

/// Sampling region for condition checks over (t, x, y, z).
struct Box {
    Range t{0.0, 1.0};
    Range x{-1.0, 1.0};
    Range y{-1.0, 1.0};
    Range z{-1.0, 1.0};
    std::size_t sample_count = 2000;
    std::uint64_t seed = 12345;

    const Range& range(Var v) const noexcept;
    Range& range(Var v) noexcept;

    /// Throws InputError when a range is empty or sample_count is zero.
    void validate() const;

    Point lerp(double ut, double ux, double uy, double uz) const noexcept {
        return {t.at(ut), x.at(ux), y.at(uy), z.at(uz)};
    }
};

/// SplitMix64 finalizer; used to derive independent seeds from (seed, counter).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t counter) noexcept;

/// Seeded low-discrepancy stream in [0,1)^dim: a Sobol sequence with a
/// Cranley-Patterson shift drawn from the seed. The first n points of the
/// stream are the same for every request size, so samples are nested.
class LowDiscrepancyStream {
public:
    LowDiscrepancyStream(std::size_t dim, std::uint64_t seed);
    ~LowDiscrepancyStream();
    LowDiscrepancyStream(LowDiscrepancyStream&&) noexcept;
    LowDiscrepancyStream& operator=(LowDiscrepancyStream&&) noexcept;

    std::size_t dim() const noexcept { return dim_; }
    void next(std::span<double> out);

private:
    struct Engine;
    std::size_t dim_;
    std::unique_ptr<Engine> engine_;
    std::vector<double> shift_;
};

}  // namespace gorder
