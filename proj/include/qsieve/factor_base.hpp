#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qsieve/number_theory.hpp"

namespace qsieve {

// One prime of the factor base together with the solutions of
// x^2 = n (mod p): a single root {1} for p = 2, otherwise two roots
// {s, p - s} stored ascending.
struct FactorBaseEntry {
    SmallPrime p = 0;
    std::vector<std::uint64_t> roots;
};

struct FoundFactor {
    Natural factor;
};

/*
 * The factor base for n: a leading -1 sign slot (logical entry 0) followed
 * by the primes p <= B for which n is a quadratic residue. Indices used by
 * parity vectors and the factor-base file count the sign slot, so logical
 * entry j >= 1 is prime(j - 1).
 */
class FactorBase {
public:
    FactorBase(Natural n, std::vector<FactorBaseEntry> primes)
        : n_(std::move(n)), primes_(std::move(primes)) {}

    const Natural& n() const { return n_; }

    // Logical entry count, including the -1 sign slot.
    std::size_t size() const { return primes_.size() + 1; }

    std::size_t prime_count() const { return primes_.size(); }
    const FactorBaseEntry& prime(std::size_t j) const { return primes_[j]; }
    const std::vector<FactorBaseEntry>& primes() const { return primes_; }

private:
    Natural n_;
    std::vector<FactorBaseEntry> primes_;
};

class TooSmallError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

struct SieveParameters {
    std::uint64_t smoothness_bound = 0;  // B
    Natural half_width;                  // M
    Natural center;                      // floor(sqrt(n))
};

// Smallest default smoothness bound. The asymptotic formula below yields
// bases too thin to close the relation target within the retry budget for
// inputs under ~12 digits, so small inputs are floored here.
inline constexpr std::uint64_t kMinSmoothnessBound = 150;

namespace detail {

inline double natural_log(const Natural& n) {
    signed long int exp2;
    double d = mpz_get_d_2exp(&exp2, n.get_mpz_t());
    return std::log(d) + static_cast<double>(exp2) * std::log(2.0);
}

}  // namespace detail

/*
 * Sieve parameters for an odd composite n >= 15. Without overrides,
 * B = ceil(exp(0.5 * sqrt(ln n * ln ln n))) scaled by `bound_multiplier`
 * and floored at kMinSmoothnessBound, and M = max(B^1.5, 10 B). Explicit
 * overrides pass through verbatim. The default M is clamped so the
 * interval [center - M, center + M] stays at x >= 1; the job runner grows
 * M geometrically when the relation yield falls short.
 */
inline SieveParameters select_parameters(const Natural& n,
                                         std::optional<std::uint64_t> bound_override = {},
                                         std::optional<Natural> half_width_override = {},
                                         double bound_multiplier = 1.0) {
    if (n < 15)
        throw TooSmallError("select_parameters: n < 15, use trial division");

    SieveParameters params;
    params.center = isqrt(n);

    if (bound_override) {
        params.smoothness_bound = *bound_override;
    } else {
        double ln = detail::natural_log(n);
        double raw = std::exp(0.5 * std::sqrt(ln * std::log(ln))) * bound_multiplier;
        auto b = static_cast<std::uint64_t>(std::ceil(raw));
        params.smoothness_bound = std::max<std::uint64_t>(kMinSmoothnessBound, b);
    }

    if (half_width_override) {
        params.half_width = *half_width_override;
    } else {
        double b = static_cast<double>(params.smoothness_bound);
        auto from_bound = static_cast<std::uint64_t>(std::ceil(b * std::sqrt(b)));
        std::uint64_t m = std::max(from_bound, 10 * params.smoothness_bound);
        params.half_width = Natural(static_cast<unsigned long>(m));
        if (params.half_width >= params.center)
            params.half_width = params.center - 1;
    }
    return params;
}

/*
 * Builds the factor base for odd n: entry 0 is -1, p = 2 enters with root 1
 * (n odd means n = 1^2 mod 2), and each odd prime p <= bound with
 * (n/p) = +1 enters with both roots of x^2 = n (mod p). A prime dividing n
 * short-circuits into FoundFactor -- that is an answer, not an error.
 */
inline std::variant<FactorBase, FoundFactor> build_factor_base(const Natural& n,
                                                               std::uint64_t bound) {
    std::vector<FactorBaseEntry> entries;
    for (SmallPrime p : primes_up_to(bound)) {
        if (p == 2) {
            if (mpz_even_p(n.get_mpz_t()))
                return FoundFactor{Natural(2)};
            entries.push_back({2, {1}});
            continue;
        }
        if (mpz_fdiv_ui(n.get_mpz_t(), p) == 0)
            return FoundFactor{Natural(static_cast<unsigned long>(p))};
        if (legendre_symbol(n, p) != 1)
            continue;
        auto [s1, s2] = sqrt_mod(n, p);
        FactorBaseEntry entry{p, {std::min(s1, s2), std::max(s1, s2)}};
        entries.push_back(std::move(entry));
    }
    return FactorBase(n, std::move(entries));
}

/*
 * Factor-base file: one entry per line, space-separated decimal fields
 * `index p root1 [root2]`, line 0 being the sign slot `0 -1`. LF newlines.
 */
inline std::uint64_t write_factor_base(const FactorBase& fb, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open factor-base file for writing: " + path.string());
    std::ostringstream text;
    text << "0 -1\n";
    for (std::size_t j = 0; j < fb.prime_count(); ++j) {
        const FactorBaseEntry& entry = fb.prime(j);
        text << (j + 1) << ' ' << entry.p;
        for (std::uint64_t root : entry.roots)
            text << ' ' << root;
        text << '\n';
    }
    std::string payload = text.str();
    out << payload;
    if (!out)
        throw std::runtime_error("failed writing factor-base file: " + path.string());
    return payload.size();
}

inline FactorBase read_factor_base(const std::filesystem::path& path, const Natural& n) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open factor-base file: " + path.string());

    std::vector<FactorBaseEntry> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream fields(line);
        long long index = -1;
        if (!(fields >> index) || index != static_cast<long long>(line_no) - 1)
            throw std::runtime_error(path.string() + ": line " + std::to_string(line_no) +
                                     ": bad entry index");
        if (line_no == 1) {
            std::string sign;
            if (!(fields >> sign) || sign != "-1")
                throw std::runtime_error(path.string() + ": line 1: expected the -1 sign slot");
            continue;
        }
        FactorBaseEntry entry;
        if (!(fields >> entry.p) || entry.p < 2)
            throw std::runtime_error(path.string() + ": line " + std::to_string(line_no) +
                                     ": bad prime");
        std::uint64_t root;
        while (fields >> root) {
            if (root >= entry.p)
                throw std::runtime_error(path.string() + ": line " + std::to_string(line_no) +
                                         ": root out of range");
            if (mul_mod(root, root, entry.p) != mpz_fdiv_ui(n.get_mpz_t(), entry.p))
                throw std::runtime_error(path.string() + ": line " + std::to_string(line_no) +
                                         ": root does not solve x^2 = n mod p");
            entry.roots.push_back(root);
        }
        if (!fields.eof())
            throw std::runtime_error(path.string() + ": line " + std::to_string(line_no) +
                                     ": trailing garbage after roots");
        if (entry.roots.empty() || entry.roots.size() > 2)
            throw std::runtime_error(path.string() + ": line " + std::to_string(line_no) +
                                     ": expected one or two roots");
        if (!entries.empty() && entries.back().p >= entry.p)
            throw std::runtime_error(path.string() + ": line " + std::to_string(line_no) +
                                     ": primes not strictly increasing");
        entries.push_back(std::move(entry));
    }
    if (line_no == 0)
        throw std::runtime_error(path.string() + ": empty factor-base file");
    return FactorBase(n, std::move(entries));
}

}  // namespace qsieve
