#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "qsieve/assembly.hpp"
#include "qsieve/factor_base.hpp"
#include "qsieve/formats.hpp"
#include "qsieve/gf2.hpp"
#include "qsieve/number_theory.hpp"
#include "qsieve/sieve.hpp"

namespace qsieve {

/*
 * Controller-to-worker parameters of one factorization job. The round-1
 * interval is [center - M, center + M] clamped to x >= 1; an explicit
 * interval override pins the materialized records exactly (the symmetric
 * 2M + 1 form cannot express the even sieve sizes used by the disk-usage
 * reproduction). On relation shortfall the runner doubles M and sieves
 * only the new flanks, up to max_rounds.
 */
struct JobConfig {
    Natural n;
    SieveParameters params;
    std::filesystem::path workdir;
    std::filesystem::path fb_path;  // defaults to workdir/factor_base.txt when empty
    unsigned num_workers = 1;
    std::uint64_t shard_size = 65536;  // records per shard
    RecordMode record_mode = RecordMode::interval;
    std::uint64_t relation_surplus = 10;
    std::uint32_t max_rounds = 8;
    std::uint64_t retry_cap = 128;  // kernel dependencies tried per reduce
    int recursion_budget = kDefaultRecursionBudget;
    std::optional<std::pair<Natural, Natural>> interval_override;  // exact round-1 [lo, hi]
    std::function<void(const std::string&)> log;                   // optional progress sink
};

// One mapper input: a contiguous x-range materialized as a file.
struct Shard {
    std::uint64_t shard_id = 0;
    std::filesystem::path path;
    Natural x_lo;
    Natural x_hi;
};

struct NeedMoreRelations {
    std::uint64_t have = 0;
    std::uint64_t want = 0;
    std::uint64_t dependencies_tried = 0;
};

class SieveExhaustedError : public std::runtime_error {
public:
    SieveExhaustedError(const std::string& what, JobStats stats)
        : std::runtime_error(what), stats_(std::move(stats)) {}
    const JobStats& stats() const { return stats_; }

private:
    JobStats stats_;
};

struct PreparedJob {
    FactorBase fb;
    std::vector<Shard> shards;
};

namespace detail {

inline std::filesystem::path shard_path(const std::filesystem::path& workdir, std::uint64_t id) {
    char name[32];
    std::snprintf(name, sizeof(name), "shard_%05llu.txt", static_cast<unsigned long long>(id));
    return workdir / "shards" / name;
}

inline std::filesystem::path relation_path(const std::filesystem::path& workdir,
                                           std::uint64_t id) {
    char name[32];
    std::snprintf(name, sizeof(name), "shard_%05llu.rel", static_cast<unsigned long long>(id));
    return workdir / "relations" / name;
}

inline std::uint64_t interval_width(const Natural& lo, const Natural& hi) {
    Natural w = hi - lo + 1;
    if (!w.fits_ulong_p())
        throw std::invalid_argument("interval too wide to materialize: " + w.get_str());
    return w.get_ui();
}

/*
 * Materializes [lo, hi] as one staging input file, then splits it into
 * shard files of at most shard_size records each, continuing the shard id
 * sequence. Only the post-split shard bytes enter bytes_input; the staging
 * file is the controller's single-file handoff and is not double-counted.
 */
inline std::vector<Shard> materialize_interval(const JobConfig& config, const Natural& lo,
                                               const Natural& hi, std::uint32_t round,
                                               std::uint64_t first_shard_id, JobStats& stats) {
    std::vector<Shard> shards;
    if (hi < lo)
        return shards;
    std::uint64_t width = interval_width(lo, hi);
    std::uint64_t shard_size = std::max<std::uint64_t>(1, config.shard_size);

    // Plan the shard spans.
    struct Span {
        Natural lo;
        std::uint64_t count;
    };
    std::vector<Span> spans;
    Natural span_lo = lo;
    for (std::uint64_t off = 0; off < width; off += shard_size) {
        std::uint64_t count = std::min(shard_size, width - off);
        spans.push_back({span_lo, count});
        span_lo += static_cast<unsigned long>(count);
    }

    std::filesystem::path input_path =
        config.workdir / ("input_r" + std::to_string(round) + ".txt");
    {
        std::ofstream input(input_path, std::ios::binary);
        if (!input)
            throw std::runtime_error("cannot open input file for writing: " +
                                     input_path.string());
        for (const Span& span : spans) {
            if (config.record_mode == RecordMode::per_value) {
                Natural x = span.lo;
                for (std::uint64_t i = 0; i < span.count; ++i, ++x)
                    input << x << '\n';
            } else {
                input << span.lo << ' ' << span.count << '\n';
            }
        }
        if (!input)
            throw std::runtime_error("failed writing input file: " + input_path.string());
    }

    std::uint64_t id = first_shard_id;
    for (const Span& span : spans) {
        Shard shard;
        shard.shard_id = id;
        shard.path = shard_path(config.workdir, id);
        shard.x_lo = span.lo;
        shard.x_hi = span.lo + static_cast<unsigned long>(span.count - 1);
        stats.bytes_input += write_shard_file(shard.path, span.lo, span.count,
                                              config.record_mode);
        shards.push_back(std::move(shard));
        ++id;
    }
    stats.sieve_size += width;
    return shards;
}

}  // namespace detail

inline std::filesystem::path factor_base_path(const JobConfig& config) {
    return config.fb_path.empty() ? config.workdir / "factor_base.txt" : config.fb_path;
}

/*
 * Controller phase: builds the factor base (short-circuiting when a base
 * prime divides n), serializes it to the factor-base file, materializes
 * the round-1 interval and splits it into shards.
 */
inline std::variant<PreparedJob, FoundFactor> controller_prepare(const JobConfig& config,
                                                                 JobStats& stats) {
    std::error_code ec;
    std::filesystem::create_directories(config.workdir, ec);
    if (ec || !std::filesystem::is_directory(config.workdir))
        throw std::runtime_error("workdir is not writable: " + config.workdir.string());
    std::filesystem::create_directories(config.workdir / "shards");
    std::filesystem::create_directories(config.workdir / "relations");

    auto base = build_factor_base(config.n, config.params.smoothness_bound);
    if (std::holds_alternative<FoundFactor>(base))
        return std::get<FoundFactor>(std::move(base));
    FactorBase fb = std::get<FactorBase>(std::move(base));
    stats.bytes_factor_base = write_factor_base(fb, factor_base_path(config));

    Natural lo, hi;
    if (config.interval_override) {
        lo = config.interval_override->first;
        hi = config.interval_override->second;
    } else {
        lo = config.params.center - config.params.half_width;
        if (lo < 1)
            lo = 1;
        hi = config.params.center + config.params.half_width;
    }
    std::vector<Shard> shards = detail::materialize_interval(config, lo, hi, 1, 0, stats);
    return PreparedJob{std::move(fb), std::move(shards)};
}

/*
 * Mapper phase for one shard: loads the factor base and the shard records
 * from disk, sieves the range, and writes the relations next to the other
 * mapper outputs. Output bytes are a pure function of (shard bounds, base,
 * n), so reruns are byte-identical.
 */
inline std::filesystem::path run_mapper(const Shard& shard, const std::filesystem::path& fb_path,
                                        const Natural& n,
                                        const std::filesystem::path& workdir) {
    FactorBase fb = read_factor_base(fb_path, n);
    ShardRecords records = read_shard_file(shard.path);
    if (records.lo != shard.x_lo ||
        records.lo + static_cast<unsigned long>(records.count - 1) != shard.x_hi)
        throw std::runtime_error(shard.path.string() + ": records do not match shard bounds");

    std::vector<SmoothRelation> relations =
        sieve_shard(records.lo, shard.x_hi, fb);
    std::filesystem::path out = detail::relation_path(workdir, shard.shard_id);
    write_relation_file(out, relations);
    return out;
}

/*
 * Reducer phase: concatenates all mapper outputs in (shard_id, x) order,
 * refuses to solve until the relation count clears base size plus surplus,
 * then walks kernel dependencies until one of them splits n. Composite
 * parts are completed through `refactor`.
 */
inline std::variant<Factorization, NeedMoreRelations> run_reducer(
    const std::vector<std::filesystem::path>& relation_files, const FactorBase& fb,
    const Natural& n, std::uint64_t relation_surplus, std::uint64_t retry_cap,
    const Refactor& refactor, int recursion_budget = kDefaultRecursionBudget,
    std::uint64_t* relations_seen = nullptr) {
    std::vector<SmoothRelation> relations;
    for (const auto& file : relation_files) {
        std::vector<SmoothRelation> part = read_relation_file(file, fb.prime_count());
        relations.insert(relations.end(), std::make_move_iterator(part.begin()),
                         std::make_move_iterator(part.end()));
    }
    if (relations_seen)
        *relations_seen = relations.size();

    NeedMoreRelations shortfall;
    shortfall.have = relations.size();
    shortfall.want = fb.size() + relation_surplus;
    if (shortfall.have < shortfall.want)
        return shortfall;

    Gf2Matrix matrix = build_matrix(relations, fb.size());
    std::vector<Gf2Vector> basis = kernel_basis(matrix);
    for (const Gf2Vector& dep : enumerate_dependencies(basis, retry_cap)) {
        ++shortfall.dependencies_tried;
        Congruence congruence = assemble(dep, relations, fb, n);
        if (std::optional<Natural> factor = extract_factor(congruence))
            return finalize(n, *factor, refactor, recursion_budget);
    }
    return shortfall;  // every dependency was trivial; widen the sieve
}

inline std::pair<Factorization, JobStats> run_job(const JobConfig& config);

namespace detail {

// Re-enters the pipeline on a composite part produced by finalize():
// perfect powers are peeled by root probing, everything else gets a fresh
// sub-job under the parent's workdir.
inline Factorization refactor_part(const Natural& part, const JobConfig& parent, int budget) {
    for (unsigned long k = 2; k <= mpz_sizeinbase(part.get_mpz_t(), 2); ++k) {
        Natural root, rem;
        mpz_rootrem(root.get_mpz_t(), rem.get_mpz_t(), part.get_mpz_t(), k);
        if (rem != 0)
            continue;
        Factorization inner;
        if (is_probable_prime(root)) {
            inner.n = root;
            inner.factors = {{root, 1}};
        } else if (budget > 0) {
            inner = refactor_part(root, parent, budget - 1);
        } else {
            Factorization out;
            out.n = part;
            out.factors = {{part, 1}};
            out.status = FactorizationStatus::partial;
            return out;
        }
        Factorization out;
        out.n = part;
        out.status = inner.status;
        for (auto& [f, mult] : inner.factors)
            out.factors.emplace_back(f, mult * static_cast<std::uint32_t>(k));
        return out;
    }

    JobConfig sub;
    sub.n = part;
    sub.params = select_parameters(part);
    sub.workdir = parent.workdir / ("sub_" + part.get_str());
    sub.num_workers = parent.num_workers;
    sub.shard_size = parent.shard_size;
    sub.record_mode = parent.record_mode;
    sub.relation_surplus = parent.relation_surplus;
    sub.max_rounds = parent.max_rounds;
    sub.retry_cap = parent.retry_cap;
    sub.recursion_budget = budget;
    sub.log = parent.log;
    return run_job(sub).first;
}

}  // namespace detail

/*
 * The full controller / mapper / reducer loop. Mappers run num_workers at
 * a time over the unprocessed shards, each owning its input and output
 * file; the phase barrier (joining the pool) is the only synchronization.
 * When the reducer comes back short, M doubles and only the new flanks are
 * materialized and sieved. The result is independent of num_workers.
 */
inline std::pair<Factorization, JobStats> run_job(const JobConfig& config) {
    using clock = std::chrono::steady_clock;
    auto seconds_since = [](clock::time_point start) {
        return std::chrono::duration<double>(clock::now() - start).count();
    };
    JobStats stats;
    auto t_total = clock::now();

    Refactor refactor = [&config](const Natural& part, int budget) {
        return detail::refactor_part(part, config, budget);
    };

    auto t_prepare = clock::now();
    auto prepared = controller_prepare(config, stats);
    stats.time_prepare_s += seconds_since(t_prepare);

    if (std::holds_alternative<FoundFactor>(prepared)) {
        const Natural& factor = std::get<FoundFactor>(prepared).factor;
        if (config.log)
            config.log("factor base short-circuit: " + factor.get_str() + " divides n");
        Factorization result = finalize(config.n, factor, refactor, config.recursion_budget);
        stats.time_total_s = seconds_since(t_total);
        write_stats_file(config.workdir / "stats.json", stats);
        return {std::move(result), stats};
    }

    PreparedJob job = std::get<PreparedJob>(std::move(prepared));
    std::vector<Shard> pending = std::move(job.shards);
    std::vector<std::filesystem::path> relation_files;

    Natural cur_lo = pending.empty() ? config.params.center : pending.front().x_lo;
    Natural cur_hi = pending.empty() ? config.params.center : pending.back().x_hi;
    Natural half_width = config.params.half_width;
    if (config.interval_override) {
        Natural left = config.params.center - cur_lo;
        Natural right = cur_hi - config.params.center;
        half_width = left > right ? left : right;
        if (half_width < 1)
            half_width = 1;
    }
    std::uint64_t next_shard_id = pending.size();

    for (std::uint32_t round = 1; round <= config.max_rounds; ++round) {
        stats.rounds = round;

        // Map phase: the pool pulls shards until none remain, then joins.
        auto t_map = clock::now();
        std::atomic<std::size_t> next_index{0};
        std::mutex failure_mutex;
        std::exception_ptr failure;
        auto worker = [&] {
            for (;;) {
                std::size_t i = next_index.fetch_add(1);
                if (i >= pending.size())
                    return;
                try {
                    run_mapper(pending[i], factor_base_path(config), config.n, config.workdir);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure)
                        failure = std::current_exception();
                    return;
                }
            }
        };
        {
            std::vector<std::thread> pool;
            unsigned pool_size = std::max(1u, config.num_workers);
            pool.reserve(pool_size);
            for (unsigned w = 0; w < pool_size; ++w)
                pool.emplace_back(worker);
            for (std::thread& t : pool)
                t.join();
        }
        if (failure)
            std::rethrow_exception(failure);
        for (const Shard& shard : pending) {
            std::filesystem::path rel = detail::relation_path(config.workdir, shard.shard_id);
            stats.bytes_relations += std::filesystem::file_size(rel);
            relation_files.push_back(std::move(rel));
        }
        pending.clear();
        stats.time_map_s += seconds_since(t_map);

        auto t_reduce = clock::now();
        std::uint64_t relations_seen = 0;
        auto reduced = run_reducer(relation_files, job.fb, config.n, config.relation_surplus,
                                   config.retry_cap, refactor, config.recursion_budget,
                                   &relations_seen);
        stats.relations_found = relations_seen;
        stats.time_reduce_s += seconds_since(t_reduce);

        if (std::holds_alternative<Factorization>(reduced)) {
            stats.time_total_s = seconds_since(t_total);
            write_stats_file(config.workdir / "stats.json", stats);
            return {std::get<Factorization>(std::move(reduced)), stats};
        }

        const auto& shortfall = std::get<NeedMoreRelations>(reduced);
        if (config.log) {
            std::ostringstream msg;
            msg << "round " << round << ": M=" << half_width.get_str() << " relations "
                << shortfall.have << "/" << shortfall.want;
            if (shortfall.dependencies_tried > 0)
                msg << " (all " << shortfall.dependencies_tried << " dependencies trivial)";
            config.log(msg.str());
        }
        if (round == config.max_rounds)
            break;

        // Widen: double M and materialize only the new flanks.
        auto t_grow = clock::now();
        if (half_width < 1)
            half_width = 1;
        half_width *= 2;
        Natural new_lo = config.params.center - half_width;
        if (new_lo < 1)
            new_lo = 1;
        Natural new_hi = config.params.center + half_width;
        std::uint32_t next_round = round + 1;
        if (new_lo < cur_lo) {
            auto left = detail::materialize_interval(config, new_lo, cur_lo - 1, next_round,
                                                     next_shard_id, stats);
            next_shard_id += left.size();
            pending.insert(pending.end(), std::make_move_iterator(left.begin()),
                           std::make_move_iterator(left.end()));
        }
        if (new_hi > cur_hi) {
            auto right = detail::materialize_interval(config, cur_hi + 1, new_hi, next_round,
                                                      next_shard_id, stats);
            next_shard_id += right.size();
            pending.insert(pending.end(), std::make_move_iterator(right.begin()),
                           std::make_move_iterator(right.end()));
        }
        cur_lo = new_lo;
        cur_hi = new_hi;
        stats.time_prepare_s += seconds_since(t_grow);
    }

    stats.time_total_s = seconds_since(t_total);
    write_stats_file(config.workdir / "stats.json", stats);
    throw SieveExhaustedError("sieve exhausted after " + std::to_string(config.max_rounds) +
                                  " rounds with " + std::to_string(stats.relations_found) +
                                  " relations",
                              stats);
}

}  // namespace qsieve
