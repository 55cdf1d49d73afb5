#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qsieve/factor_base.hpp"
#include "qsieve/number_theory.hpp"

namespace qsieve {

// A value x whose Q(x) = x^2 - n factors completely over the factor base.
// `exponents` holds the full (not mod 2) exponent of each factor-base
// prime, in base order; the -1 slot lives in `sign_negative`.
struct SmoothRelation {
    Natural x;
    bool sign_negative = false;
    std::vector<std::uint32_t> exponents;
};

// The sieve polynomial Q(x) = x^2 - n, sign preserved.
inline Natural q_of(const Natural& x, const Natural& n) {
    return x * x - n;
}

// Smallest z >= lo with z = s (mod p).
inline Natural first_root_in(const Natural& lo, std::uint64_t s, SmallPrime p) {
    std::uint64_t lo_mod = mpz_fdiv_ui(lo.get_mpz_t(), p);
    std::uint64_t offset = (s % p + p - lo_mod) % p;
    return lo + static_cast<unsigned long>(offset);
}

class ShardTooLargeError : public std::length_error {
public:
    using std::length_error::length_error;
};

// Residue buffer budget per sieving call; the controller must split the
// interval into finer shards rather than exceed it.
inline constexpr std::size_t kMaxShardWidth = std::size_t{1} << 24;

// Full sieve state of one interval, kept around so tests and diagnostics
// can inspect the residues left after dividing out every base prime.
struct SievedInterval {
    Natural lo;
    std::vector<Natural> residues;  // |Q(x)| after exact division by all base primes
    std::vector<SmoothRelation> relations;
};

/*
 * Exact-division sieve of [lo, hi]. Residues start at |Q(x)|; for every
 * base prime p and each of its roots s the stride x = s (mod p) walks the
 * interval dividing out the highest power of p and recording its exponent.
 * Values whose residue reaches 1 factored completely over the base and are
 * emitted, in ascending x, with exact exponents.
 */
inline SievedInterval sieve_interval(const Natural& lo, const Natural& hi, const FactorBase& fb,
                                     std::size_t max_width = kMaxShardWidth) {
    if (lo < 1 || hi < lo)
        throw std::invalid_argument("sieve_interval: need 1 <= lo <= hi");
    Natural width_z = hi - lo + 1;
    if (!width_z.fits_ulong_p() || width_z.get_ui() > max_width)
        throw ShardTooLargeError("sieve_interval: shard of " + width_z.get_str() +
                                 " values exceeds the memory budget");
    std::size_t width = width_z.get_ui();
    const Natural& n = fb.n();

    SievedInterval out;
    out.lo = lo;
    out.residues.reserve(width);
    std::vector<bool> negative(width);
    Natural x = lo;
    for (std::size_t i = 0; i < width; ++i, ++x) {
        Natural q = q_of(x, n);
        negative[i] = q < 0;
        out.residues.push_back(abs(q));
    }

    // Exponent hits are sparse (a few per x on average), so they are kept
    // as per-x (prime index, exponent) pairs until emission.
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> hits(width);

    for (std::size_t j = 0; j < fb.prime_count(); ++j) {
        const FactorBaseEntry& entry = fb.prime(j);
        SmallPrime p = entry.p;
        std::uint64_t lo_mod = mpz_fdiv_ui(lo.get_mpz_t(), p);
        for (std::uint64_t s : entry.roots) {
            std::uint64_t offset = (s % p + p - lo_mod) % p;
            for (std::uint64_t i = offset; i < width; i += p) {
                Natural& r = out.residues[i];
                if (r == 0)
                    continue;  // Q(x) = 0: perfect-square n, handled upstream
                std::uint32_t e = 0;
                while (mpz_divisible_ui_p(r.get_mpz_t(), p)) {
                    mpz_divexact_ui(r.get_mpz_t(), r.get_mpz_t(), p);
                    ++e;
                }
                if (e > 0)
                    hits[i].emplace_back(static_cast<std::uint32_t>(j), e);
            }
        }
    }

    x = lo;
    for (std::size_t i = 0; i < width; ++i, ++x) {
        if (out.residues[i] != 1)
            continue;
        SmoothRelation rel;
        rel.x = x;
        rel.sign_negative = negative[i];
        rel.exponents.assign(fb.prime_count(), 0);
        for (auto [j, e] : hits[i])
            rel.exponents[j] = e;
        out.relations.push_back(std::move(rel));
    }
    return out;
}

// The mapper's workload: smooth relations of one shard, ascending in x.
inline std::vector<SmoothRelation> sieve_shard(const Natural& lo, const Natural& hi,
                                               const FactorBase& fb,
                                               std::size_t max_width = kMaxShardWidth) {
    return std::move(sieve_interval(lo, hi, fb, max_width).relations);
}

struct SmallFactorization {
    std::vector<std::pair<SmallPrime, std::uint32_t>> factors;
    Natural cofactor;
};

// Strips every prime factor <= bound; the cofactor is coprime to all of
// them (and equals 1 when n was bound-smooth).
inline SmallFactorization trial_divide_small(const Natural& n, std::uint64_t bound) {
    if (n < 2)
        throw std::invalid_argument("trial_divide_small: n must be >= 2");
    SmallFactorization out;
    out.cofactor = n;
    for (SmallPrime p : primes_up_to(bound)) {
        if (out.cofactor == 1)
            break;
        std::uint32_t e = 0;
        while (mpz_divisible_ui_p(out.cofactor.get_mpz_t(), p)) {
            mpz_divexact_ui(out.cofactor.get_mpz_t(), out.cofactor.get_mpz_t(), p);
            ++e;
        }
        if (e > 0)
            out.factors.emplace_back(p, e);
    }
    return out;
}

}  // namespace qsieve
