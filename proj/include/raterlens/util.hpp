#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace raterlens {

// 64-bit FNV-1a. Stable across platforms and runs, unlike std::hash.
std::uint64_t fnv1a64(std::string_view data);
std::uint64_t mix64(std::uint64_t x);
std::uint64_t mix_seeds(std::uint64_t a, std::uint64_t b);
std::string to_hex(std::uint64_t value);

// Deterministic generator with hand-rolled draws. std::mt19937_64 output is
// pinned by the standard, but the std distributions are not; keeping the
// transforms here makes equal seeds produce equal corpora on any platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    double uniform();                        // [0, 1)
    double uniform(double lo, double hi);    // [lo, hi)
    double normal(double mean = 0.0, double stddev = 1.0);
    std::size_t uniform_index(std::size_t n);  // [0, n)

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[uniform_index(i)]);
        }
    }

    template <typename T>
    const T& pick(const std::vector<T>& items) {
        return items[uniform_index(items.size())];
    }

private:
    std::uint64_t state_;
};

std::string join(const std::vector<std::string>& parts, const std::string& sep);
// "a", "a and b", "a, b, and c"
std::string join_natural(const std::vector<std::string>& items);
std::vector<std::string> split(std::string_view text, char sep);
std::string lower_ascii(std::string_view text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);
// Write to a sibling temp file, then rename. Readers never observe a partial file.
void write_file_atomic(const std::string& path, std::string_view content);

}  // namespace raterlens
