#include "rnff/rng.hpp"

#include <cmath>

namespace rnff {

namespace {

// SplitMix64 finalizer; used only to turn (seed, index) pairs into
// well-mixed engine seeds and derived stream indices.
std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t combine(std::uint64_t a, std::uint64_t b) {
    return mix64(mix64(a) ^ (b + 0x243F6A8885A308D3ULL));
}

} // namespace

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t index, std::uint64_t engine_seed)
    : eng_(engine_seed), master_seed_(master_seed), stream_index_(index) {}

RngStream RngStream::substream(std::uint64_t master_seed, std::uint64_t index) {
    return RngStream(master_seed, index, combine(master_seed, index));
}

RngStream RngStream::split(std::uint64_t key) const {
    return substream(master_seed_, combine(stream_index_, key));
}

std::uint64_t RngStream::next_u64() { return eng_(); }

double RngStream::next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_normal() {
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; // (0,1]
    const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;         // [0,1)
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.28318530717958647692 * u2);
}

std::uint64_t RngStream::next_below(std::uint64_t n) {
    if (n == 0)
        throw ValidationError("next_below: n must be positive");
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

std::size_t RngStream::next_categorical(const std::vector<double>& probs) {
    if (probs.empty())
        throw ValidationError("next_categorical: empty distribution");
    const double u = next_unit();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return i;
    }
    return probs.size() - 1;
}

Vec RngStream::next_unit_vector(int dim) {
    if (dim < 1)
        throw ValidationError("next_unit_vector: dimension must be >= 1");
    Vec v(static_cast<size_t>(dim));
    for (double& x : v) x = next_normal();
    const double nv = norm(v);
    if (nv == 0.0)
        throw ValidationError("next_unit_vector: degenerate draw");
    for (double& x : v) x /= nv;
    return v;
}

} // namespace rnff
