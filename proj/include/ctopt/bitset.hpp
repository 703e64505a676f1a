#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace ctopt {

/// Fixed-size bit vector packed into 64-bit words. Rows of the coverage
/// matrix and the solvers' covered-sample accumulators are Bitsets; the
/// hot operations are OR-accumulate and popcount of (row & ~covered).
class Bitset {
public:
    Bitset() = default;

    explicit Bitset(std::size_t n_bits)
        : n_bits_(n_bits), words_((n_bits + 63) / 64, 0) {}

    std::size_t size() const { return n_bits_; }
    std::size_t word_count() const { return words_.size(); }

    void set(std::size_t i) { words_[i >> 6] |= (std::uint64_t{1} << (i & 63)); }

    void reset(std::size_t i) { words_[i >> 6] &= ~(std::uint64_t{1} << (i & 63)); }

    bool test(std::size_t i) const {
        return (words_[i >> 6] >> (i & 63)) & 1u;
    }

    void clear() { std::fill(words_.begin(), words_.end(), 0); }

    std::size_t popcount() const {
        std::size_t n = 0;
        for (std::uint64_t w : words_) n += static_cast<std::size_t>(std::popcount(w));
        return n;
    }

    Bitset& operator|=(const Bitset& o) {
        check_same_size(o);
        for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= o.words_[i];
        return *this;
    }

    bool operator==(const Bitset& o) const = default;

    /// popcount(this & ~other): how many of this row's bits are not yet
    /// covered. The marginal-gain kernel of greedy and branch-and-bound.
    std::size_t andnot_count(const Bitset& covered) const {
        check_same_size(covered);
        std::size_t n = 0;
        for (std::size_t i = 0; i < words_.size(); ++i) {
            n += static_cast<std::size_t>(std::popcount(words_[i] & ~covered.words_[i]));
        }
        return n;
    }

    std::span<const std::uint64_t> words() const { return words_; }
    std::span<std::uint64_t> words() { return words_; }

    /// Calls f(index) for every set bit, ascending.
    template <typename F>
    void for_each_set(F&& f) const {
        for (std::size_t w = 0; w < words_.size(); ++w) {
            std::uint64_t word = words_[w];
            while (word != 0) {
                const int b = std::countr_zero(word);
                f(w * 64 + static_cast<std::size_t>(b));
                word &= word - 1;
            }
        }
    }

private:
    void check_same_size(const Bitset& o) const {
        if (o.n_bits_ != n_bits_) {
            throw std::invalid_argument("bitset size mismatch");
        }
    }

    std::size_t n_bits_ = 0;
    std::vector<std::uint64_t> words_;
};

}  // namespace ctopt
