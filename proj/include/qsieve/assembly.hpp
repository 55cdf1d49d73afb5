#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qsieve/factor_base.hpp"
#include "qsieve/gf2.hpp"
#include "qsieve/number_theory.hpp"
#include "qsieve/sieve.hpp"

namespace qsieve {

// a^2 = b^2 (mod n), asserted at construction time by assemble().
struct Congruence {
    Natural a;
    Natural b;
    Natural n;
};

class NotASquareError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class FactorizationStatus { complete, partial };

// factors are ascending (factor, multiplicity) pairs whose product is n;
// with status complete every factor is a probable prime.
struct Factorization {
    Natural n;
    std::vector<std::pair<Natural, std::uint32_t>> factors;
    FactorizationStatus status = FactorizationStatus::complete;
};

/*
 * Turns a kernel dependency into a congruence of squares:
 * a = prod of the selected x_i (mod n), and b is rebuilt from the summed
 * prime exponents, halved exactly -- this is why relations carry full
 * exponents, and it avoids ever forming the huge product of Q values.
 * A true kernel vector makes every exponent sum (and the sign count) even;
 * anything else indicates corrupted relations and raises NotASquareError.
 */
inline Congruence assemble(const Gf2Vector& dep, const std::vector<SmoothRelation>& relations,
                           const FactorBase& fb, const Natural& n) {
    if (dep.size() != relations.size())
        throw std::invalid_argument("assemble: dependency length does not match relations");
    if (dep.none())
        throw std::invalid_argument("assemble: empty relation subset");

    Natural a = 1;
    std::vector<std::uint64_t> exponent_sums(fb.prime_count(), 0);
    std::uint64_t sign_count = 0;
    for (std::size_t i = 0; i < relations.size(); ++i) {
        if (!dep.test(i))
            continue;
        const SmoothRelation& rel = relations[i];
        a = (a * rel.x) % n;
        if (rel.sign_negative)
            ++sign_count;
        for (std::size_t j = 0; j < rel.exponents.size(); ++j)
            exponent_sums[j] += rel.exponents[j];
    }

    if (sign_count % 2 != 0)
        throw NotASquareError("assemble: odd count of negative Q values");
    Natural b = 1;
    Natural p_power;
    for (std::size_t j = 0; j < exponent_sums.size(); ++j) {
        if (exponent_sums[j] % 2 != 0)
            throw NotASquareError("assemble: odd exponent sum at base index " +
                                  std::to_string(j + 1));
        if (exponent_sums[j] == 0)
            continue;
        Natural base(static_cast<unsigned long>(fb.prime(j).p));
        mpz_powm_ui(p_power.get_mpz_t(), base.get_mpz_t(),
                    static_cast<unsigned long>(exponent_sums[j] / 2), n.get_mpz_t());
        b = (b * p_power) % n;
    }

    if ((a * a - b * b) % n != 0)
        throw NotASquareError("assemble: congruence a^2 = b^2 (mod n) failed");
    return Congruence{a, b, n};
}

/*
 * gcd(a - b, n), then gcd(a + b, n); the first nontrivial one is a factor.
 * Both trivial (a = +-b mod n) yields nullopt and the caller moves on to
 * the next dependency.
 */
inline std::optional<Natural> extract_factor(const Congruence& c) {
    Natural diff = (c.a - c.b) % c.n;
    if (diff < 0)
        diff += c.n;
    Natural g = gcd(diff, c.n);
    if (g > 1 && g < c.n)
        return g;
    Natural sum = (c.a + c.b) % c.n;
    g = gcd(sum, c.n);
    if (g > 1 && g < c.n)
        return g;
    return std::nullopt;
}

// Completely factors a composite; used by finalize() to re-enter the
// pipeline on composite parts. The budget bounds the recursion depth.
using Refactor = std::function<Factorization(const Natural&, int budget)>;

inline constexpr int kDefaultRecursionBudget = 16;

/*
 * Completes a factorization from one known divisor: splits n into found
 * and n / found, keeps probable-prime parts, and hands composite parts
 * back to `refactor` while budget remains. Exhausting the budget yields
 * status partial with the decomposition found so far (composite leaves
 * included, so the product invariant still holds).
 */
inline Factorization finalize(const Natural& n, const Natural& found, const Refactor& refactor,
                              int budget = kDefaultRecursionBudget) {
    if (found <= 1 || found >= n || n % found != 0)
        throw std::invalid_argument("finalize: found is not a nontrivial divisor");

    std::map<Natural, std::uint32_t> counts;
    FactorizationStatus status = FactorizationStatus::complete;

    auto absorb = [&](const Natural& part) {
        if (is_probable_prime(part)) {
            counts[part] += 1;
            return;
        }
        if (budget <= 0) {
            counts[part] += 1;
            status = FactorizationStatus::partial;
            return;
        }
        Factorization sub = refactor(part, budget - 1);
        if (sub.status == FactorizationStatus::partial)
            status = FactorizationStatus::partial;
        for (const auto& [f, mult] : sub.factors)
            counts[f] += mult;
    };

    absorb(found);
    absorb(n / found);

    Factorization result;
    result.n = n;
    result.status = status;
    result.factors.assign(counts.begin(), counts.end());
    return result;
}

}  // namespace qsieve
