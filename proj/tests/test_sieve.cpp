#include <catch2/catch_amalgamated.hpp>

#include <variant>

#include "oracles.hpp"
#include "qsieve/factor_base.hpp"
#include "qsieve/sieve.hpp"

using qsieve::FactorBase;
using qsieve::FoundFactor;
using qsieve::Natural;

namespace {

FactorBase make_base(const Natural& n, std::uint64_t bound) {
    auto result = qsieve::build_factor_base(n, bound);
    REQUIRE(std::holds_alternative<FactorBase>(result));
    return std::get<FactorBase>(std::move(result));
}

std::vector<std::uint64_t> base_primes(const FactorBase& fb) {
    std::vector<std::uint64_t> primes;
    for (const auto& entry : fb.primes())
        primes.push_back(entry.p);
    return primes;
}

}  // namespace

TEST_CASE("select_parameters") {
    SECTION("overrides pass through verbatim") {
        auto params = qsieve::select_parameters(Natural("1164656837"), 2916, Natural(5000));
        CHECK(params.smoothness_bound == 2916);
        CHECK(params.half_width == 5000);
        CHECK(params.center == 34127);
    }
    SECTION("defaults for a 10-digit input") {
        auto params = qsieve::select_parameters(Natural("1164656837"));
        CHECK(params.smoothness_bound >= 50);
        CHECK(params.smoothness_bound <= 10000);
        CHECK(params.half_width >= 10 * params.smoothness_bound);
        CHECK(params.center == 34127);
    }
    SECTION("small but admissible n gets the floor bound") {
        auto params = qsieve::select_parameters(Natural(77));
        CHECK(params.smoothness_bound >= 50);
        // interval must stay at x >= 1
        CHECK(params.center - params.half_width >= 1);
    }
    SECTION("n below 15 is rejected") {
        CHECK_THROWS_AS(qsieve::select_parameters(Natural(13)), qsieve::TooSmallError);
    }
    SECTION("bound multiplier scales the default B") {
        Natural n("10446257742110057983");
        auto base = qsieve::select_parameters(n);
        auto doubled = qsieve::select_parameters(n, {}, {}, 2.0);
        CHECK(doubled.smoothness_bound > base.smoothness_bound);
        CHECK(doubled.smoothness_bound <= 2 * base.smoothness_bound + 1);
    }
}

TEST_CASE("build_factor_base") {
    SECTION("77 with bound 6 keeps only -1 and 2") {
        FactorBase fb = make_base(Natural(77), 6);
        CHECK(fb.size() == 2);
        CHECK(base_primes(fb) == std::vector<std::uint64_t>{2});
        CHECK(fb.prime(0).roots == std::vector<std::uint64_t>{1});
    }
    SECTION("a base prime dividing n short-circuits") {
        auto result = qsieve::build_factor_base(Natural(77), 12);
        REQUIRE(std::holds_alternative<FoundFactor>(result));
        CHECK(std::get<FoundFactor>(result).factor == 7);
    }
    SECTION("every entry's roots solve x^2 = n (mod p)") {
        Natural n("1164656837");
        auto params = qsieve::select_parameters(n);
        FactorBase fb = make_base(n, params.smoothness_bound);
        CHECK(fb.prime_count() >= 2);
        for (const auto& entry : fb.primes()) {
            if (entry.p == 2) {
                CHECK(entry.roots == std::vector<std::uint64_t>{1});
                continue;
            }
            REQUIRE(entry.roots.size() == 2);
            for (std::uint64_t s : entry.roots)
                REQUIRE(qsieve::mul_mod(s, s, entry.p) == mpz_fdiv_ui(n.get_mpz_t(), entry.p));
            CHECK(entry.roots[0] + entry.roots[1] == entry.p);
            // Euler criterion holds for every admitted odd prime.
            CHECK(qsieve::pow_mod(mpz_fdiv_ui(n.get_mpz_t(), entry.p), (entry.p - 1) / 2,
                                  entry.p) == 1);
        }
    }
}

TEST_CASE("factor base file carries the sign slot and roots verbatim") {
    FactorBase fb = make_base(Natural(77), 6);
    auto path = std::filesystem::temp_directory_path() / "qsieve_test_fb77.txt";
    qsieve::write_factor_base(fb, path);
    std::ifstream in(path);
    std::stringstream text;
    text << in.rdbuf();
    CHECK(text.str() == "0 -1\n1 2 1\n");
    std::filesystem::remove(path);
}

TEST_CASE("factor base file round-trip") {
    Natural n("1164656837");
    FactorBase fb = make_base(n, 150);
    auto path = std::filesystem::temp_directory_path() / "qsieve_test_fb.txt";
    qsieve::write_factor_base(fb, path);
    FactorBase back = qsieve::read_factor_base(path, n);
    REQUIRE(back.prime_count() == fb.prime_count());
    for (std::size_t j = 0; j < fb.prime_count(); ++j) {
        CHECK(back.prime(j).p == fb.prime(j).p);
        CHECK(back.prime(j).roots == fb.prime(j).roots);
    }
    std::filesystem::remove(path);
}

TEST_CASE("factor base file rejects corrupt content") {
    auto path = std::filesystem::temp_directory_path() / "qsieve_test_fb_bad.txt";
    {
        std::ofstream out(path);
        out << "0 -1\n1 5 3\n";  // 3^2 = 4 != 77 mod 5
    }
    CHECK_THROWS_WITH(qsieve::read_factor_base(path, Natural(77)),
                      Catch::Matchers::ContainsSubstring("line 2"));
    {
        std::ofstream out(path);
        out << "0 -1\n1 2 1 junk\n";
    }
    CHECK_THROWS_WITH(qsieve::read_factor_base(path, Natural(77)),
                      Catch::Matchers::ContainsSubstring("trailing garbage"));
    std::filesystem::remove(path);
}

TEST_CASE("q_of") {
    CHECK(qsieve::q_of(Natural(9), Natural(77)) == 4);
    CHECK(qsieve::q_of(Natural(6), Natural(77)) == -41);
    CHECK(qsieve::q_of(Natural(0), Natural(77)) == -77);
}

TEST_CASE("first_root_in") {
    CHECK(qsieve::first_root_in(Natural(6), 1, 2) == 7);
    CHECK(qsieve::first_root_in(Natural(10), 3, 7) == 10);
    CHECK(qsieve::first_root_in(Natural(11), 3, 7) == 17);
    CHECK(qsieve::first_root_in(Natural(1), 0, 5) == 5);
}

TEST_CASE("sieving x in [6,10] for n = 77 reproduces the worked trace") {
    FactorBase fb = make_base(Natural(77), 6);  // base {-1, 2}
    auto sieved = qsieve::sieve_interval(Natural(6), Natural(10), fb);

    // Q values (-41, -28, -13, 4, 23); after dividing out powers of 2 the
    // magnitudes are (41, 7, 13, 1, 23).
    std::vector<Natural> expected{41, 7, 13, 1, 23};
    REQUIRE(sieved.residues.size() == 5);
    for (std::size_t i = 0; i < 5; ++i)
        CHECK(sieved.residues[i] == expected[i]);

    REQUIRE(sieved.relations.size() == 1);
    const auto& rel = sieved.relations[0];
    CHECK(rel.x == 9);
    CHECK_FALSE(rel.sign_negative);  // Q(9) = 4 > 0
    CHECK(rel.exponents == std::vector<std::uint32_t>{2});  // 4 = 2^2
}

TEST_CASE("sieve emits nothing when no residue reaches 1") {
    FactorBase fb = make_base(Natural(77), 6);
    // [2,4] has Q = -73, -68, -61; x = 3 hits the stride of 2 but
    // 68 / 4 = 17 is outside the base, so no relation survives.
    auto relations = qsieve::sieve_shard(Natural(2), Natural(4), fb);
    CHECK(relations.empty());
}

TEST_CASE("sieve rejects oversized shards") {
    FactorBase fb = make_base(Natural(77), 6);
    CHECK_THROWS_AS(qsieve::sieve_shard(Natural(1), Natural(100), fb, 50),
                    qsieve::ShardTooLargeError);
}

TEST_CASE("emitted relations reconstruct Q(x) exactly") {
    auto rng = oracles::test_rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        Natural n = oracles::random_semiprime(rng, 1000, 30000);
        auto params = qsieve::select_parameters(n);
        auto base = qsieve::build_factor_base(n, params.smoothness_bound);
        if (!std::holds_alternative<FactorBase>(base))
            continue;  // a small prime divides n; nothing to sieve
        const FactorBase& fb = std::get<FactorBase>(base);
        Natural lo = params.center - params.half_width;
        if (lo < 1)
            lo = 1;
        Natural hi = params.center + params.half_width;
        auto relations = qsieve::sieve_shard(lo, hi, fb);
        for (const auto& rel : relations) {
            Natural product = 1;
            for (std::size_t j = 0; j < rel.exponents.size(); ++j)
                for (std::uint32_t e = 0; e < rel.exponents[j]; ++e)
                    product *= static_cast<unsigned long>(fb.prime(j).p);
            Natural q = qsieve::q_of(rel.x, n);
            REQUIRE(rel.sign_negative == (q < 0));
            REQUIRE(product == abs(q));
        }
    }
}

TEST_CASE("sieve emits exactly the smooth values (trial-division oracle)") {
    auto rng = oracles::test_rng(4);
    int counted = 0;
    int draws = 0;
    while (counted < 25) {
        REQUIRE(++draws < 10000);
        std::uint64_t n64 = oracles::random_odd_composite(rng, 30 + counted % 10);
        Natural n(static_cast<unsigned long>(n64));
        auto params = qsieve::select_parameters(n);
        auto base = qsieve::build_factor_base(n, params.smoothness_bound);
        if (!std::holds_alternative<FactorBase>(base))
            continue;  // a base prime divides n; redraw
        ++counted;
        const FactorBase& fb = std::get<FactorBase>(base);
        auto primes = base_primes(fb);

        Natural center = params.center;
        Natural lo = center - 400;
        if (lo < 1)
            lo = 1;
        Natural hi = center + 400;
        auto relations = qsieve::sieve_shard(lo, hi, fb);

        std::size_t expected_count = 0;
        std::size_t next_rel = 0;
        for (Natural x = lo; x <= hi; ++x) {
            Natural q = abs(qsieve::q_of(x, n));
            std::optional<std::vector<std::uint32_t>> exps;
            if (q != 0)
                exps = oracles::smooth_exponents(q, primes);
            if (!exps)
                continue;
            ++expected_count;
            REQUIRE(next_rel < relations.size());
            REQUIRE(relations[next_rel].x == x);
            REQUIRE(relations[next_rel].exponents == *exps);
            ++next_rel;
        }
        REQUIRE(relations.size() == expected_count);
    }
}

TEST_CASE("shard-split invariance") {
    Natural n("1022117");  // 1009 * 1013
    FactorBase fb = make_base(n, 150);
    Natural lo(900), hi(1121);
    auto whole = qsieve::sieve_shard(lo, hi, fb);
    auto rng = oracles::test_rng(5);
    for (int trial = 0; trial < 12; ++trial) {
        Natural mid = lo + static_cast<unsigned long>(rng() % 221);
        auto left = qsieve::sieve_shard(lo, mid, fb);
        auto right = qsieve::sieve_shard(mid + 1, hi, fb);
        left.insert(left.end(), right.begin(), right.end());
        REQUIRE(left.size() == whole.size());
        for (std::size_t i = 0; i < whole.size(); ++i) {
            REQUIRE(left[i].x == whole[i].x);
            REQUIRE(left[i].sign_negative == whole[i].sign_negative);
            REQUIRE(left[i].exponents == whole[i].exponents);
        }
    }
}

TEST_CASE("stride soundness: p | Q(x) implies p | Q(x + kp)") {
    Natural n("1022117");
    FactorBase fb = make_base(n, 150);
    auto rng = oracles::test_rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        const auto& entry = fb.prime(rng() % fb.prime_count());
        std::uint64_t s = entry.roots[rng() % entry.roots.size()];
        Natural x = qsieve::first_root_in(Natural(1 + rng() % 5000), s, entry.p);
        REQUIRE(mpz_fdiv_ui(Natural(qsieve::q_of(x, n)).get_mpz_t(), entry.p) == 0);
        for (std::uint64_t k = 1; k <= 5; ++k) {
            Natural xk = x + static_cast<unsigned long>(k * entry.p);
            REQUIRE(mpz_fdiv_ui(Natural(qsieve::q_of(xk, n)).get_mpz_t(), entry.p) == 0);
        }
    }
}

TEST_CASE("trial_divide_small") {
    auto full = qsieve::trial_divide_small(Natural(84), 10);
    CHECK(full.factors == std::vector<std::pair<std::uint64_t, std::uint32_t>>{
                              {2, 2}, {3, 1}, {7, 1}});
    CHECK(full.cofactor == 1);

    auto none = qsieve::trial_divide_small(Natural(77), 5);
    CHECK(none.factors.empty());
    CHECK(none.cofactor == 77);

    auto mixed = qsieve::trial_divide_small(Natural("2329313674"), 10);  // 2 * 1164656837
    CHECK(mixed.factors ==
          std::vector<std::pair<std::uint64_t, std::uint32_t>>{{2, 1}});
    CHECK(mixed.cofactor == Natural("1164656837"));
}
