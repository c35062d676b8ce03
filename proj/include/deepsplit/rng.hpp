#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace deepsplit {

// Counter-based stream built on Philox4x32-10. The 64-bit seed is the key;
// the 128-bit counter is (block index, stream id), so any (seed, stream id)
// pair addresses an independent sequence without shared state.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id) noexcept
        : seed_(seed), stream_id_(stream_id) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

    std::uint64_t next_u64() noexcept;

    /// Uniform on the open interval (0, 1), 53-bit resolution.
    double next_uniform() noexcept;

    /// Standard normal by Box-Muller. Every pair of normals consumes exactly
    /// one Philox block, so draw positions never drift between streams.
    double next_normal() noexcept;

    void fill_normal(std::span<double> out) noexcept;

    /// Child stream whose id is a pure function of this stream's id and `tag`.
    RngStream substream(std::uint64_t tag) const noexcept;

private:
    void refill() noexcept;

    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buffer_{};
    int buffered_ = 0;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

RngStream make_stream(std::uint64_t seed, std::uint64_t stream_id) noexcept;

std::vector<double> sample_std_normal(RngStream& stream, std::size_t count);

/// Mixes a path of tags (run, purpose, step, iteration, sample ...) into a
/// single stream id.
std::uint64_t derive_stream_id(std::initializer_list<std::uint64_t> path) noexcept;

/// Raw Philox4x32-10 block function, exposed for known-answer tests.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

}  // namespace deepsplit
