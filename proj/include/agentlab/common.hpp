// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <json.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace agentlab
{

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

/// Raised for malformed input files and invalid configuration. The message
/// names the offending field or entry.
class Error: public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Shortest decimal text that parses back to the same double.
std::string format_number(double value);

/// FNV-1a over bytes; used for config hashes and seed derivation.
std::uint64_t fnv1a(std::string_view bytes);

/// SplitMix64 finalizer. Turns correlated inputs (seed, seed+1, ...) into
/// well-spread generator seeds.
std::uint64_t mix_seed(std::uint64_t x);

/// Small deterministic generator. Output depends only on the seed, never on
/// the standard library's distribution implementations.
class Rng
{
  public:
    explicit Rng(std::uint64_t seed): _state(mix_seed(seed)) {}

    std::uint64_t next_u64();
    /// Uniform in [0, 1).
    double uniform();
    /// Uniform integer in [0, n).
    std::size_t below(std::size_t n);

  private:
    std::uint64_t _state;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

} // namespace agentlab
