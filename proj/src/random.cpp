#include "pme/random.hpp"

#include <vector>

namespace pme {

namespace {

std::mt19937_64 seeded(std::initializer_list<std::uint64_t> key) {
    std::vector<std::uint32_t> words;
    words.reserve(2 * key.size());
    for (auto k : key) {
        words.push_back(static_cast<std::uint32_t>(k & 0xffffffffu));
        words.push_back(static_cast<std::uint32_t>(k >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    return std::mt19937_64(seq);
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t cell, std::uint64_t replication, StreamTag tag)
    : engine_(seeded({seed, cell, replication, static_cast<std::uint64_t>(tag)})) {}

}  // namespace pme
