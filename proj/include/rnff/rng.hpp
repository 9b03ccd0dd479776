#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "rnff/linalg.hpp"

namespace rnff {

/// Deterministic, splittable random stream. A stream is identified by
/// (master_seed, stream_index); the same pair always reproduces the same
/// scalar sequence, independent of what other streams were created before.
/// Streams are single-owner: parallel workers must each hold their own,
/// obtained through substream() or split().
class RngStream {
  public:
    static RngStream substream(std::uint64_t master_seed, std::uint64_t index);

    /// Child stream with an index derived from (stream_index, key).
    RngStream split(std::uint64_t key) const;

    std::uint64_t master_seed() const { return master_seed_; }
    std::uint64_t stream_index() const { return stream_index_; }

    std::uint64_t next_u64();

    /// Uniform in [0, 1), 53 random bits.
    double next_unit();

    /// Standard normal via Box-Muller; consumes exactly two u64 draws.
    double next_normal();

    /// Uniform integer in [0, n); consumes exactly one u64 draw.
    std::uint64_t next_below(std::uint64_t n);

    /// Index drawn from a categorical distribution; one u64 draw.
    /// `probs` must be nonnegative and sum to ~1 (validated upstream).
    std::size_t next_categorical(const std::vector<double>& probs);

    /// Isotropic unit vector in R^dim; consumes exactly 2*dim u64 draws.
    Vec next_unit_vector(int dim);

  private:
    RngStream(std::uint64_t master_seed, std::uint64_t index, std::uint64_t engine_seed);

    std::mt19937_64 eng_;
    std::uint64_t master_seed_ = 0;
    std::uint64_t stream_index_ = 0;
};

} // namespace rnff
