#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <random>

namespace klpriv {

/// Counter-based random stream (Philox4x32-10).
///
/// The draw sequence is a pure function of (seed, stream id): block k of the
/// stream is Philox(key = seed, counter = (k, stream id)). Streams with
/// different ids never share a counter value, so they can be handed to
/// independent workers and merged afterwards without changing any result.
///
/// Satisfies UniformRandomBitGenerator so it plugs into <random>
/// distributions.
class RngStream {
public:
    using result_type = std::uint64_t;

    RngStream(std::uint64_t seed, std::uint64_t stream_id);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()();

    /// Standard normal draw.
    double normal();
    /// Uniform draw on [0, 1).
    double uniform();

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

    /// A fresh stream with the same seed and id mixed from this id and `tag`.
    /// Does not consume draws from this stream.
    RngStream substream(std::uint64_t tag) const;

private:
    void refill();

    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buffer_{};
    unsigned used_ = 4;
    std::normal_distribution<double> gauss_{0.0, 1.0};
};

/// Raw Philox4x32-10 block function, exposed for tests against the
/// published known-answer vectors.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

}  // namespace klpriv
