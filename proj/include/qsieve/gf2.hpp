#pragma once

#include <bit>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qsieve/sieve.hpp"

namespace qsieve {

// Bit vector over GF(2), packed into 64-bit words. Bits beyond the logical
// length stay zero.
class Gf2Vector {
public:
    Gf2Vector() = default;
    explicit Gf2Vector(std::size_t size) : words_((size + 63) / 64, 0), size_(size) {}

    std::size_t size() const { return size_; }

    bool test(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1; }

    void set(std::size_t i, bool value = true) {
        std::uint64_t mask = std::uint64_t{1} << (i % 64);
        if (value)
            words_[i / 64] |= mask;
        else
            words_[i / 64] &= ~mask;
    }

    void flip(std::size_t i) { words_[i / 64] ^= std::uint64_t{1} << (i % 64); }

    Gf2Vector& operator^=(const Gf2Vector& other) {
        if (other.size_ != size_)
            throw std::invalid_argument("Gf2Vector: length mismatch in xor");
        for (std::size_t w = 0; w < words_.size(); ++w)
            words_[w] ^= other.words_[w];
        return *this;
    }

    friend Gf2Vector operator^(Gf2Vector a, const Gf2Vector& b) { return a ^= b; }

    bool none() const {
        for (std::uint64_t w : words_)
            if (w)
                return false;
        return true;
    }
    bool any() const { return !none(); }

    std::size_t count() const {
        std::size_t c = 0;
        for (std::uint64_t w : words_)
            c += static_cast<std::size_t>(std::popcount(w));
        return c;
    }

    std::optional<std::size_t> lowest_set() const {
        for (std::size_t w = 0; w < words_.size(); ++w)
            if (words_[w])
                return w * 64 + static_cast<std::size_t>(std::countr_zero(words_[w]));
        return std::nullopt;
    }

    // Parity of the AND of two vectors, i.e. their GF(2) dot product.
    bool dot(const Gf2Vector& other) const {
        if (other.size_ != size_)
            throw std::invalid_argument("Gf2Vector: length mismatch in dot");
        std::uint64_t acc = 0;
        for (std::size_t w = 0; w < words_.size(); ++w)
            acc ^= words_[w] & other.words_[w];
        return std::popcount(acc) & 1;
    }

    bool operator==(const Gf2Vector& other) const {
        return size_ == other.size_ && words_ == other.words_;
    }

private:
    std::vector<std::uint64_t> words_;
    std::size_t size_ = 0;
};

/*
 * Parity matrix in the columns-as-relations orientation: row j carries the
 * mod-2 exponent of factor-base entry j across all relations, row 0 being
 * the -1 sign row. A kernel vector selects a column subset whose product
 * has an all-even exponent vector.
 */
class Gf2Matrix {
public:
    Gf2Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows, Gf2Vector(cols)), cols_(cols) {}

    std::size_t rows() const { return rows_.size(); }
    std::size_t cols() const { return cols_; }

    bool test(std::size_t r, std::size_t c) const { return rows_[r].test(c); }
    void set(std::size_t r, std::size_t c, bool value = true) { rows_[r].set(c, value); }
    const Gf2Vector& row(std::size_t r) const { return rows_[r]; }

    // M * v over GF(2); the result has one bit per matrix row.
    Gf2Vector multiply(const Gf2Vector& v) const {
        Gf2Vector result(rows_.size());
        for (std::size_t r = 0; r < rows_.size(); ++r)
            result.set(r, rows_[r].dot(v));
        return result;
    }

private:
    std::vector<Gf2Vector> rows_;
    std::size_t cols_;
};

// The relation's exponent vector mod 2, with the sign bit leading:
// bit 0 = sign, bit j + 1 = exponents[j] mod 2.
inline Gf2Vector parity_vector(const SmoothRelation& relation) {
    Gf2Vector v(relation.exponents.size() + 1);
    v.set(0, relation.sign_negative);
    for (std::size_t j = 0; j < relation.exponents.size(); ++j)
        if (relation.exponents[j] % 2 == 1)
            v.set(j + 1);
    return v;
}

// fb_size rows (sign slot included) by one column per relation; column i
// is parity_vector(relations[i]).
inline Gf2Matrix build_matrix(const std::vector<SmoothRelation>& relations, std::size_t fb_size) {
    if (relations.empty())
        throw std::invalid_argument("build_matrix: no relations");
    Gf2Matrix m(fb_size, relations.size());
    for (std::size_t i = 0; i < relations.size(); ++i) {
        Gf2Vector column = parity_vector(relations[i]);
        if (column.size() != fb_size)
            throw std::invalid_argument("build_matrix: relation width does not match base");
        for (std::size_t r = 0; r < fb_size; ++r)
            if (column.test(r))
                m.set(r, i);
    }
    return m;
}

/*
 * Basis of the kernel {e : M e = 0 (mod 2)}. Works on the transposed,
 * row-per-relation layout: each relation row is reduced against the pivots
 * accumulated so far while an identity-seeded companion vector tracks the
 * combination; rows that vanish yield kernel vectors. Every basis vector
 * keeps a distinct leading relation bit, so the output is independent by
 * construction. Dimension is cols - rank.
 */
inline std::vector<Gf2Vector> kernel_basis(const Gf2Matrix& m) {
    const std::size_t relation_count = m.cols();
    const std::size_t base_size = m.rows();

    // Transpose into per-relation rows.
    std::vector<Gf2Vector> rel(relation_count, Gf2Vector(base_size));
    for (std::size_t r = 0; r < base_size; ++r)
        for (std::size_t c = 0; c < relation_count; ++c)
            if (m.test(r, c))
                rel[c].set(r);

    std::vector<std::optional<std::size_t>> pivot_of_col(base_size);
    std::vector<Gf2Vector> combo;
    combo.reserve(relation_count);
    std::vector<Gf2Vector> kernel;

    for (std::size_t i = 0; i < relation_count; ++i) {
        Gf2Vector e(relation_count);
        e.set(i);
        while (auto c = rel[i].lowest_set()) {
            auto pivot = pivot_of_col[*c];
            if (!pivot) {
                pivot_of_col[*c] = i;
                break;
            }
            rel[i] ^= rel[*pivot];
            e ^= combo[*pivot];
        }
        if (rel[i].none())
            kernel.push_back(e);
        combo.push_back(std::move(e));
    }
    return kernel;
}

/*
 * Deterministic stream of nonzero kernel elements to try as dependencies:
 * first each basis vector, then the pairwise sums in lexicographic index
 * order, capped at `limit`. Distinctness follows from basis independence.
 */
inline std::vector<Gf2Vector> enumerate_dependencies(const std::vector<Gf2Vector>& basis,
                                                     std::size_t limit) {
    std::vector<Gf2Vector> out;
    for (const Gf2Vector& b : basis) {
        if (out.size() >= limit)
            return out;
        out.push_back(b);
    }
    for (std::size_t i = 0; i < basis.size(); ++i) {
        for (std::size_t j = i + 1; j < basis.size(); ++j) {
            if (out.size() >= limit)
                return out;
            out.push_back(basis[i] ^ basis[j]);
        }
    }
    return out;
}

}  // namespace qsieve
