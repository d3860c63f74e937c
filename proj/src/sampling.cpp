#include "gorder/sampling.hpp"

#include "gorder/error.hpp"

#include <boost/random/sobol.hpp>

#include <cmath>
#include <limits>

namespace gorder {

const Range& Box::range(Var v) const noexcept {
    switch (v) {
        case Var::t: return t;
        case Var::x: return x;
        case Var::y: return y;
        default: return z;
    }
}

Range& Box::range(Var v) noexcept {
    switch (v) {
        case Var::t: return t;
        case Var::x: return x;
        case Var::y: return y;
        default: return z;
    }
}

void Box::validate() const {
    for (Var v : {Var::t, Var::x, Var::y, Var::z}) {
        const Range& r = range(v);
        if (!(r.lo <= r.hi) || !std::isfinite(r.lo) || !std::isfinite(r.hi)) {
            throw InputError("box range for '" + std::string(var_name(v)) + "' is empty or non-finite");
        }
    }
    if (sample_count < 1) throw InputError("box sample_count must be at least 1");
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t counter) noexcept {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (counter + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

struct LowDiscrepancyStream::Engine {
    explicit Engine(std::size_t dim) : sobol(static_cast<unsigned>(dim)) {}
    boost::random::sobol sobol;
};

LowDiscrepancyStream::LowDiscrepancyStream(std::size_t dim, std::uint64_t seed)
    : dim_(dim), engine_(std::make_unique<Engine>(dim)), shift_(dim) {
    for (std::size_t d = 0; d < dim; ++d) {
        shift_[d] = static_cast<double>(mix_seed(seed, d) >> 11) * 0x1.0p-53;
    }
}

LowDiscrepancyStream::~LowDiscrepancyStream() = default;
LowDiscrepancyStream::LowDiscrepancyStream(LowDiscrepancyStream&&) noexcept = default;
LowDiscrepancyStream& LowDiscrepancyStream::operator=(LowDiscrepancyStream&&) noexcept = default;

void LowDiscrepancyStream::next(std::span<double> out) {
    if (out.size() != dim_) throw InputError("low-discrepancy stream: dimension mismatch");
    constexpr double scale = 0x1.0p-64;
    for (std::size_t d = 0; d < dim_; ++d) {
        const double u = static_cast<double>(engine_->sobol()) * scale + shift_[d];
        double v = u - std::floor(u);
        if (v >= 1.0) v = std::nextafter(1.0, 0.0);
        out[d] = v;
    }
}

}  // namespace gorder
