#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "CLI11.hpp"

#include "qsieve/engine.hpp"

namespace qsieve::cli {

struct CliOptions {
    std::string number;  // decimal N
    std::optional<std::uint64_t> bound;
    std::optional<Natural> half_width;
    unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    std::uint64_t shard_size = 65536;
    RecordMode record_mode = RecordMode::interval;
    std::optional<std::filesystem::path> workdir;
    bool emit_stats = false;
    int verbosity = 0;
};

// Everything the pre-filter settled without sieving. `prime_input` marks
// the n-is-prime case so the frontend can say so instead of printing a
// one-factor product.
struct ShortCircuit {
    Factorization factorization;
    bool prime_input = false;
};

// The sieve's actual workload: n = (product of small factors) * cofactor^power
// with the cofactor an odd composite non-power, coprime to every prime
// <= 10^4 and hence >= 10^8.
struct Proceed {
    std::vector<std::pair<SmallPrime, std::uint32_t>> small_factors;
    Natural cofactor;
    std::uint32_t power = 1;
};

inline constexpr std::uint64_t kPreflightTrialBound = 10000;

namespace detail {

// Decomposes m into (base, k) with k maximal (base is not itself a
// perfect power), probing k-th roots up to log2 m.
inline std::pair<Natural, std::uint32_t> peel_perfect_power(Natural m) {
    std::uint32_t total = 1;
    bool reduced = true;
    while (reduced && m > 3) {
        reduced = false;
        unsigned long max_k = mpz_sizeinbase(m.get_mpz_t(), 2);
        for (unsigned long k = 2; k <= max_k; ++k) {
            Natural root, rem;
            mpz_rootrem(root.get_mpz_t(), rem.get_mpz_t(), m.get_mpz_t(), k);
            if (rem == 0 && root > 1) {
                m = root;
                total *= static_cast<std::uint32_t>(k);
                reduced = true;
                break;
            }
        }
    }
    return {m, total};
}

}  // namespace detail

/*
 * Pre-filter, in order: strip every prime factor <= 10^4, peel perfect
 * powers off the cofactor, and primality-check what remains. Only an odd
 * composite non-power cofactor proceeds to the sieve; the quadratic sieve
 * cannot split p^k through a nontrivial congruence, and even or tiny
 * inputs never reach it.
 */
inline std::variant<ShortCircuit, Proceed> preflight(const Natural& n) {
    if (n < 2)
        throw OutOfDomainError("preflight: n must be >= 2");

    SmallFactorization small = trial_divide_small(n, kPreflightTrialBound);
    std::map<Natural, std::uint32_t> counts;
    for (const auto& [p, e] : small.factors)
        counts[Natural(static_cast<unsigned long>(p))] += e;

    if (small.cofactor == 1) {
        ShortCircuit out;
        out.factorization.n = n;
        out.factorization.factors.assign(counts.begin(), counts.end());
        out.prime_input = counts.size() == 1 && counts.begin()->second == 1;
        return out;
    }

    auto [base, power] = detail::peel_perfect_power(small.cofactor);
    if (is_probable_prime(base)) {
        counts[base] += power;
        ShortCircuit out;
        out.factorization.n = n;
        out.factorization.factors.assign(counts.begin(), counts.end());
        out.prime_input = small.factors.empty() && power == 1;
        return out;
    }

    Proceed proceed;
    proceed.small_factors = std::move(small.factors);
    proceed.cofactor = base;
    proceed.power = power;
    return proceed;
}

namespace detail {

inline std::filesystem::path fresh_temp_workdir() {
    std::random_device rd;
    std::ostringstream name;
    name << "qsieve-" << std::hex << rd() << rd();
    return std::filesystem::temp_directory_path() / name.str();
}

struct WorkdirGuard {
    std::filesystem::path path;
    bool owned = false;
    ~WorkdirGuard() {
        if (owned) {
            std::error_code ec;
            std::filesystem::remove_all(path, ec);
        }
    }
};

inline std::string format_factor_list(const Factorization& fz) {
    std::ostringstream out;
    bool first = true;
    for (const auto& [factor, mult] : fz.factors) {
        if (!first)
            out << " * ";
        first = false;
        out << factor.get_str();
        if (mult > 1)
            out << '^' << mult;
    }
    return out.str();
}

}  // namespace detail

/*
 * Frontend: validate, pre-filter, run the job on the surviving cofactor,
 * and report. Prints `N = f1^m1 * f2^m2 * ...` (or `N is prime`) on
 * standard out and diagnostics on standard error. Exit code 0 for a
 * complete factorization, 2 for partial, 1 for errors.
 */
inline int run(const CliOptions& options, std::ostream& out, std::ostream& err) {
    Natural n;
    if (options.number.empty() ||
        mpz_set_str(n.get_mpz_t(), options.number.c_str(), 10) != 0 || n < 2) {
        err << "factor: expected an integer >= 2, got '" << options.number << "'\n";
        return 1;
    }

    try {
        JobStats stats;
        Factorization result;
        result.n = n;
        bool prime_input = false;

        auto sifted = preflight(n);
        if (std::holds_alternative<ShortCircuit>(sifted)) {
            auto& sc = std::get<ShortCircuit>(sifted);
            result = std::move(sc.factorization);
            prime_input = sc.prime_input;
            if (options.verbosity > 0)
                err << "preflight settled the factorization without sieving\n";
        } else {
            auto& proceed = std::get<Proceed>(sifted);

            detail::WorkdirGuard guard;
            if (options.workdir) {
                guard.path = *options.workdir;
            } else {
                guard.path = detail::fresh_temp_workdir();
                guard.owned = true;
            }

            JobConfig config;
            config.n = proceed.cofactor;
            config.params = select_parameters(proceed.cofactor, options.bound,
                                              options.half_width);
            config.workdir = guard.path;
            config.num_workers = std::max(1u, options.workers);
            config.shard_size = std::max<std::uint64_t>(1, options.shard_size);
            config.record_mode = options.record_mode;
            if (options.verbosity > 0)
                config.log = [&err](const std::string& line) { err << line << '\n'; };

            auto [sub, job_stats] = run_job(config);
            stats = job_stats;

            std::map<Natural, std::uint32_t> counts;
            for (const auto& [p, e] : proceed.small_factors)
                counts[Natural(static_cast<unsigned long>(p))] += e;
            for (const auto& [f, mult] : sub.factors)
                counts[f] += mult * proceed.power;
            result.factors.assign(counts.begin(), counts.end());
            result.status = sub.status;
        }

        // The printed factors must multiply back to the input, always.
        Natural product = 1;
        for (const auto& [factor, mult] : result.factors)
            for (std::uint32_t i = 0; i < mult; ++i)
                product *= factor;
        if (product != n)
            throw std::logic_error("internal error: factor product does not equal the input");

        if (prime_input)
            out << n.get_str() << " is prime\n";
        else
            out << n.get_str() << " = " << detail::format_factor_list(result) << '\n';

        if (options.emit_stats) {
            out << "digits=" << n.get_str().size() << '\n';
            out << format_stats(stats);
        }

        if (result.status == FactorizationStatus::partial) {
            err << "factor: factorization incomplete (recursion budget exhausted)\n";
            return 2;
        }
        return 0;
    } catch (const SieveExhaustedError& e) {
        err << "factor: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "factor: " << e.what() << '\n';
        return 1;
    }
}

// argv-level entry point: `factor <N> [--bound B] [--half-width M]
// [--workers W] [--shard-size S] [--record-mode value|interval]
// [--workdir DIR] [--stats] [-v]`.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CliOptions options;
    CLI::App app{"quadratic sieve factorization over a local map-reduce runtime", "factor"};
    app.add_option("N", options.number, "integer to factor (decimal)")->required();
    app.add_option("--bound", options.bound, "smoothness bound B override");
    std::string half_width_text;
    app.add_option("--half-width", half_width_text, "sieve half-width M override");
    app.add_option("--workers", options.workers, "concurrent mapper count");
    app.add_option("--shard-size", options.shard_size, "records per shard");
    std::string mode = "interval";
    app.add_option("--record-mode", mode, "shard record encoding")
        ->check(CLI::IsMember({"value", "interval"}));
    std::string workdir_text;
    app.add_option("--workdir", workdir_text, "working directory (kept after the run)");
    app.add_flag("--stats", options.emit_stats, "print job statistics");
    app.add_flag("-v", options.verbosity, "verbose diagnostics on stderr");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    if (!half_width_text.empty()) {
        Natural m;
        if (mpz_set_str(m.get_mpz_t(), half_width_text.c_str(), 10) != 0 || m < 0) {
            err << "factor: bad --half-width value '" << half_width_text << "'\n";
            return 1;
        }
        options.half_width = m;
    }
    options.record_mode = mode == "value" ? RecordMode::per_value : RecordMode::interval;
    if (!workdir_text.empty())
        options.workdir = std::filesystem::path(workdir_text);
    return run(options, out, err);
}

}  // namespace qsieve::cli
