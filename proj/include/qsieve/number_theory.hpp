#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qsieve {

// Arbitrary-precision non-negative integer. Round-trips exactly through
// decimal strings via mpz_class(std::string) / get_str().
using Natural = mpz_class;

// Machine-word prime. Producers (primes_up_to, factor-base readers) are
// responsible for the primality invariant.
using SmallPrime = std::uint64_t;

class OutOfDomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class NonResidueError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Raised when a prime divides the number whose root was requested. The
// caller must treat the carried prime as a found factor, not a failure.
class PrimeDividesN : public std::domain_error {
public:
    explicit PrimeDividesN(SmallPrime p)
        : std::domain_error("prime " + std::to_string(p) + " divides n"), prime_(p) {}
    SmallPrime prime() const { return prime_; }

private:
    SmallPrime prime_;
};

/*
 * All primes in [2, bound], ascending. Sieve of Eratosthenes.
 * bound < 2 yields an empty list.
 */
inline std::vector<SmallPrime> primes_up_to(std::uint64_t bound) {
    std::vector<SmallPrime> primes;
    if (bound < 2)
        return primes;
    std::vector<bool> composite(bound + 1, false);
    for (std::uint64_t p = 2; p <= bound; ++p) {
        if (composite[p])
            continue;
        primes.push_back(p);
        if (p > bound / p)
            continue;  // p * p would overflow or exceed bound
        for (std::uint64_t m = p * p; m <= bound; m += p)
            composite[m] = true;
    }
    return primes;
}

// Machine-word modular arithmetic widened through 128 bits so that
// products of 64-bit operands cannot overflow.
inline std::uint64_t mul_mod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(a) * b) % m);
}

inline std::uint64_t pow_mod(std::uint64_t base, std::uint64_t exp, std::uint64_t m) {
    std::uint64_t result = 1 % m;
    base %= m;
    while (exp > 0) {
        if (exp & 1)
            result = mul_mod(result, base, m);
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    return result;
}

/*
 * Legendre symbol (n/p) for an odd prime p, via Euler's criterion
 * n^((p-1)/2) mod p. Returns 0 iff p | n, +1 for a nonzero quadratic
 * residue, -1 otherwise. p = 2 is rejected; admitting 2 into a factor
 * base is the base builder's decision.
 */
inline int legendre_symbol(const Natural& n, SmallPrime p) {
    if (p < 3 || p % 2 == 0)
        throw std::invalid_argument("legendre_symbol: p must be an odd prime");
    std::uint64_t r = mpz_fdiv_ui(n.get_mpz_t(), p);
    if (r == 0)
        return 0;
    return pow_mod(r, (p - 1) / 2, p) == 1 ? 1 : -1;
}

/*
 * Both square roots of n modulo a prime p: (s, p - s) with s*s = n (mod p).
 * For p = 2 and odd n the unique root class is represented as (1, 1).
 * Uses the p = 3 (mod 4) exponentiation shortcut s = n^((p+1)/4) where it
 * applies and Tonelli-Shanks otherwise.
 *
 * Throws PrimeDividesN when p | n (the caller holds a factor) and
 * NonResidueError when no root exists.
 */
inline std::pair<std::uint64_t, std::uint64_t> sqrt_mod(const Natural& n, SmallPrime p) {
    if (p == 2) {
        if (mpz_fdiv_ui(n.get_mpz_t(), 2) == 0)
            throw PrimeDividesN(2);
        return {1, 1};
    }
    std::uint64_t r = mpz_fdiv_ui(n.get_mpz_t(), p);
    if (r == 0)
        throw PrimeDividesN(p);
    if (pow_mod(r, (p - 1) / 2, p) != 1)
        throw NonResidueError("sqrt_mod: " + std::to_string(r) + " is not a residue mod " +
                              std::to_string(p));

    if (p % 4 == 3) {
        std::uint64_t s = pow_mod(r, (p + 1) / 4, p);
        return {s, p - s};
    }

    // Tonelli-Shanks. Write p - 1 = q * 2^e with q odd.
    std::uint64_t q = p - 1;
    unsigned e = 0;
    while (q % 2 == 0) {
        q /= 2;
        ++e;
    }
    // Any quadratic non-residue serves as the generator of the 2-Sylow part.
    std::uint64_t z = 2;
    while (pow_mod(z, (p - 1) / 2, p) != p - 1)
        ++z;

    std::uint64_t c = pow_mod(z, q, p);
    std::uint64_t t = pow_mod(r, q, p);
    std::uint64_t s = pow_mod(r, (q + 1) / 2, p);
    unsigned m = e;
    while (t != 1) {
        std::uint64_t t2 = t;
        unsigned i = 0;
        while (t2 != 1) {
            t2 = mul_mod(t2, t2, p);
            ++i;
        }
        std::uint64_t b = c;
        for (unsigned j = 0; j + i + 1 < m; ++j)
            b = mul_mod(b, b, p);
        s = mul_mod(s, b, p);
        c = mul_mod(b, b, p);
        t = mul_mod(t, c, p);
        m = i;
    }
    return {s, p - s};
}

// Integer square root: the unique r with r^2 <= n < (r+1)^2.
inline Natural isqrt(const Natural& n) {
    if (n < 0)
        throw OutOfDomainError("isqrt: negative argument");
    Natural r;
    mpz_sqrt(r.get_mpz_t(), n.get_mpz_t());
    return r;
}

inline Natural gcd(const Natural& a, const Natural& b) {
    Natural g;
    mpz_gcd(g.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
    return g;
}

namespace detail {

// Returns true when `witness` proves n composite. n odd, n >= 3,
// n - 1 = d * 2^s with d odd.
inline bool miller_rabin_composite(const Natural& n, const Natural& witness, const Natural& d,
                                   unsigned long s) {
    Natural a = witness % n;
    if (a == 0)
        return false;  // witness collapses mod n; no information
    Natural x;
    mpz_powm(x.get_mpz_t(), a.get_mpz_t(), d.get_mpz_t(), n.get_mpz_t());
    Natural n_minus_1 = n - 1;
    if (x == 1 || x == n_minus_1)
        return false;
    for (unsigned long i = 1; i < s; ++i) {
        x = (x * x) % n;
        if (x == n_minus_1)
            return false;
    }
    return true;
}

}  // namespace detail

/*
 * Miller-Rabin primality test. The first thirteen prime witnesses are a
 * deterministic set for n < 3.3 * 10^24, which covers the sieve's input
 * range; beyond that bound twenty pseudo-random witnesses (seeded from n,
 * for reproducibility) are added, giving error probability <= 4^-20.
 */
inline bool is_probable_prime(const Natural& n) {
    if (n < 2)
        throw OutOfDomainError("is_probable_prime: argument must be >= 2");
    if (n == 2 || n == 3)
        return true;
    if (mpz_even_p(n.get_mpz_t()))
        return false;

    Natural d = n - 1;
    unsigned long s = mpz_scan1(d.get_mpz_t(), 0);
    d >>= s;

    static constexpr std::uint64_t kSmallWitnesses[] = {2,  3,  5,  7,  11, 13, 17,
                                                        19, 23, 29, 31, 37, 41};
    for (std::uint64_t w : kSmallWitnesses) {
        if (detail::miller_rabin_composite(n, Natural(static_cast<unsigned long>(w)), d, s))
            return false;
    }

    static const Natural kDeterministicBound("3317044064679887385961981");
    if (n >= kDeterministicBound) {
        gmp_randclass rng(gmp_randinit_mt);
        rng.seed(n);
        for (int i = 0; i < 20; ++i) {
            Natural w = rng.get_z_range(n - 3) + 2;
            if (detail::miller_rabin_composite(n, w, d, s))
                return false;
        }
    }
    return true;
}

}  // namespace qsieve
