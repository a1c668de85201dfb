// SPDX-License-Identifier: Apache-2.0
#include "agentlab/common.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

namespace agentlab
{

std::string format_number(double value)
{
    auto buffer = std::array<char, 64> {};
    auto [end, ec] = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
    if (ec != std::errc {})
        throw Error("cannot format number");
    return std::string(buffer.data(), end);
}

std::uint64_t fnv1a(std::string_view bytes)
{
    auto hash = std::uint64_t { 14695981039346656037ULL };
    for (auto c: bytes)
    {
        hash ^= static_cast<unsigned char>(c);
        hash *= 1099511628211ULL;
    }
    return hash;
}

std::uint64_t mix_seed(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t Rng::next_u64()
{
    _state += 0x9e3779b97f4a7c15ULL;
    auto z = _state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double Rng::uniform()
{
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::size_t Rng::below(std::size_t n)
{
    if (n == 0)
        return 0;
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
}

std::string read_file(const std::string& path)
{
    auto in = std::ifstream(path, std::ios::binary);
    if (!in)
        throw Error("cannot open file: " + path);
    auto ss = std::ostringstream {};
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view contents)
{
    auto out = std::ofstream(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error("cannot write file: " + path);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

} // namespace agentlab
