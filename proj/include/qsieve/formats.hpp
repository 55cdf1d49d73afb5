#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qsieve/number_theory.hpp"
#include "qsieve/sieve.hpp"

namespace qsieve {

// Shard record encoding. per_value writes one decimal x per line and makes
// disk usage proportional to the sieve size; interval writes a single
// `start count` record covering the same range and is the practical
// default.
enum class RecordMode { per_value, interval };

inline const char* record_mode_name(RecordMode mode) {
    return mode == RecordMode::per_value ? "value" : "interval";
}

namespace detail {

inline std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open for writing: " + path.string());
    return out;
}

[[noreturn]] inline void parse_fail(const std::filesystem::path& path, std::size_t line_no,
                                    const std::string& what) {
    throw std::runtime_error(path.string() + ": line " + std::to_string(line_no) + ": " + what);
}

}  // namespace detail

// Writes the shard covering `count` consecutive values from `lo`.
// Returns the bytes written.
inline std::uint64_t write_shard_file(const std::filesystem::path& path, const Natural& lo,
                                      std::uint64_t count, RecordMode mode) {
    std::ostringstream text;
    if (mode == RecordMode::per_value) {
        Natural x = lo;
        for (std::uint64_t i = 0; i < count; ++i, ++x)
            text << x << '\n';
    } else {
        text << lo << ' ' << count << '\n';
    }
    std::string payload = text.str();
    auto out = detail::open_for_write(path);
    out << payload;
    if (!out)
        throw std::runtime_error("failed writing shard file: " + path.string());
    return payload.size();
}

struct ShardRecords {
    Natural lo;
    std::uint64_t count = 0;
};

/*
 * Reads a shard file in either record encoding: lines of single decimal
 * values, or `start count` interval records. Records must be contiguous
 * and ascending; anything else is a parse error naming the line.
 */
inline ShardRecords read_shard_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open shard file: " + path.string());

    ShardRecords records;
    Natural next;
    bool has_next = false;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            detail::parse_fail(path, line_no, "empty record");
        std::istringstream fields(line);
        std::string first, second, extra;
        fields >> first;
        Natural start;
        if (mpz_set_str(start.get_mpz_t(), first.c_str(), 10) != 0 || start < 1)
            detail::parse_fail(path, line_no, "bad value '" + first + "'");
        std::uint64_t count = 1;
        if (fields >> second) {
            try {
                count = std::stoull(second);
            } catch (const std::exception&) {
                detail::parse_fail(path, line_no, "bad count '" + second + "'");
            }
            if (count == 0)
                detail::parse_fail(path, line_no, "zero-length interval record");
            if (fields >> extra)
                detail::parse_fail(path, line_no, "trailing fields");
        }
        if (!has_next) {
            records.lo = start;
            has_next = true;
        } else if (start != next) {
            detail::parse_fail(path, line_no, "records are not contiguous");
        }
        next = start + static_cast<unsigned long>(count);
        records.count += count;
    }
    if (!has_next)
        throw std::runtime_error(path.string() + ": empty shard file");
    return records;
}

/*
 * Relation file: one relation per line,
 * `<x> <sign:0|1> <e_1> ... <e_k>` with k exponents ordered by factor-base
 * prime index. The sign field is the -1 slot of the base.
 */
inline std::uint64_t write_relation_file(const std::filesystem::path& path,
                                         const std::vector<SmoothRelation>& relations) {
    std::ostringstream text;
    for (const SmoothRelation& rel : relations) {
        text << rel.x << ' ' << (rel.sign_negative ? 1 : 0);
        for (std::uint32_t e : rel.exponents)
            text << ' ' << e;
        text << '\n';
    }
    std::string payload = text.str();
    auto out = detail::open_for_write(path);
    out << payload;
    if (!out)
        throw std::runtime_error("failed writing relation file: " + path.string());
    return payload.size();
}

inline std::vector<SmoothRelation> read_relation_file(const std::filesystem::path& path,
                                                      std::size_t prime_count) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open relation file: " + path.string());

    std::vector<SmoothRelation> relations;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream fields(line);
        SmoothRelation rel;
        std::string x_text;
        if (!(fields >> x_text) ||
            mpz_set_str(rel.x.get_mpz_t(), x_text.c_str(), 10) != 0 || rel.x < 1)
            detail::parse_fail(path, line_no, "bad x value");
        int sign = -1;
        if (!(fields >> sign) || (sign != 0 && sign != 1))
            detail::parse_fail(path, line_no, "bad sign field");
        rel.sign_negative = sign == 1;
        rel.exponents.reserve(prime_count);
        std::int64_t e = 0;
        while (fields >> e) {
            if (e < 0)
                detail::parse_fail(path, line_no, "negative exponent");
            rel.exponents.push_back(static_cast<std::uint32_t>(e));
        }
        if (!fields.eof())
            detail::parse_fail(path, line_no, "bad exponent field");
        if (rel.exponents.size() != prime_count)
            detail::parse_fail(path, line_no,
                               "expected " + std::to_string(prime_count) + " exponents, got " +
                                   std::to_string(rel.exponents.size()));
        relations.push_back(std::move(rel));
    }
    return relations;
}

// Run telemetry. Byte counts are per phase; input bytes count the
// materialized records once, post-split (the shard files, not the
// controller's pre-split staging file).
struct JobStats {
    std::uint64_t sieve_size = 0;       // records materialized across rounds
    std::uint64_t relations_found = 0;  // relation records seen by the reducer
    std::uint32_t rounds = 0;
    std::uint64_t bytes_factor_base = 0;
    std::uint64_t bytes_input = 0;
    std::uint64_t bytes_relations = 0;
    double time_prepare_s = 0.0;
    double time_map_s = 0.0;
    double time_reduce_s = 0.0;
    double time_total_s = 0.0;
};

inline std::string format_stats(const JobStats& stats) {
    std::ostringstream text;
    text << "sieve_size=" << stats.sieve_size << '\n'
         << "relations_found=" << stats.relations_found << '\n'
         << "rounds=" << stats.rounds << '\n'
         << "bytes_factor_base=" << stats.bytes_factor_base << '\n'
         << "bytes_input=" << stats.bytes_input << '\n'
         << "bytes_relations=" << stats.bytes_relations << '\n'
         << "time_prepare_s=" << stats.time_prepare_s << '\n'
         << "time_map_s=" << stats.time_map_s << '\n'
         << "time_reduce_s=" << stats.time_reduce_s << '\n'
         << "time_total_s=" << stats.time_total_s << '\n'
         << "input_bytes_note=post_split_shards\n";
    return text.str();
}

// One `key=value` per line at workdir/stats.json.
inline void write_stats_file(const std::filesystem::path& path, const JobStats& stats) {
    auto out = detail::open_for_write(path);
    out << format_stats(stats);
    if (!out)
        throw std::runtime_error("failed writing stats file: " + path.string());
}

}  // namespace qsieve
