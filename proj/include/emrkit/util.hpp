#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace emrkit::util {

std::string trim(const std::string& s);
std::string lower(const std::string& s);
std::vector<std::string> split(const std::string& s, char sep);

// Collapses every run of whitespace to a single space and trims the ends.
std::string collapse_ws(const std::string& s);

// Lowercase + collapsed whitespace; used to compare SQL statements and
// classification tokens without being fooled by formatting.
std::string normalize_ws_lower(const std::string& s);

// Lowercase with every non-alphanumeric character removed; used for
// literal-containment checks between feature names and column names.
std::string normalize_alnum(const std::string& s);

bool starts_with(const std::string& s, const std::string& prefix);
std::string join(const std::vector<std::string>& parts, const std::string& sep);
std::string replace_all(std::string s, const std::string& from, const std::string& to);

// Fixed-precision decimal rendering, e.g. format_decimal(30.0, 4) == "30.0000".
std::string format_decimal(double value, int decimals);

// Shortest text that round-trips the double, matching SQLite's rendering of
// simple values ("30.0", "52.3167").
std::string format_double(double value);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);
void append_file(const std::string& path, const std::string& content);
bool file_exists(const std::string& path);
bool dir_exists(const std::string& path);
void ensure_dir(const std::string& path);

std::string sha256_hex(const std::string& data);

std::optional<long long> parse_int(const std::string& s);
std::optional<double> parse_real(const std::string& s);

// Deterministic splitmix64-based generator. The standard <random>
// distributions are not bit-identical across library implementations, so
// fixture generation rolls its own uniform draws on top of this.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next();
    // Uniform integer in [lo, hi] inclusive.
    std::int64_t range(std::int64_t lo, std::int64_t hi);
    // Uniform double in [0, 1).
    double unit();
    // True with the given probability.
    bool chance(double p);

private:
    std::uint64_t state_;
};

std::uint64_t fnv1a64(const std::string& s);

// Minimal RFC 4180 CSV handling; cells containing separators, quotes, or
// newlines are quoted with doubled inner quotes.
std::string csv_render_row(const std::vector<std::string>& cells);
std::vector<std::vector<std::string>> csv_parse(const std::string& text);

}  // namespace emrkit::util
