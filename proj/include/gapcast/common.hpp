#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gapcast {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Library error carrying a stable machine-readable kind string
/// ("MissingColumn", "BadDatetime", ...) next to the human message.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}

    const std::string& kind() const { return kind_; }

private:
    std::string kind_;
};

[[noreturn]] inline void fail(const std::string& kind, const std::string& message) {
    throw Error(kind, message);
}

// ---------------------------------------------------------------------------
// Dense row-major matrix
// ---------------------------------------------------------------------------

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // row-major

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    bool empty() const { return rows == 0 || cols == 0; }
};

inline Matrix submatrix_rows(const Matrix& m, std::size_t first, std::size_t count) {
    Matrix out(count, m.cols);
    std::copy(m.data.begin() + static_cast<std::ptrdiff_t>(first * m.cols),
              m.data.begin() + static_cast<std::ptrdiff_t>((first + count) * m.cols),
              out.data.begin());
    return out;
}

// ---------------------------------------------------------------------------
// Deterministic random numbers
//
// mt19937_64 output is specified bit-for-bit by the standard, but the
// <random> distributions are not, so the few distributions needed here are
// hand-rolled on top of the raw engine to keep seeded runs reproducible
// across compilers.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {
        // scramble so that small consecutive seeds give unrelated streams
        s_[0] = splitmix64(state_);
        s_[1] = splitmix64(s_[0]);
        s_[2] = splitmix64(s_[1]);
        s_[3] = splitmix64(s_[2]);
    }

    /// Independent child stream, stable in (seed, stream).
    Rng child(std::uint64_t stream) const {
        return Rng(splitmix64(state_ ^ splitmix64(stream + 0x517cc1b727220a95ULL)));
    }

    std::uint64_t next_u64() {
        // xoshiro256** step
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Unbiased integer in [0, n).
    std::size_t uniform_index(std::size_t n) {
        const std::uint64_t bound = n;
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return static_cast<std::size_t>(x % bound);
    }

    /// Standard normal via the polar method.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[uniform_index(i)]);
        }
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t state_;
    std::uint64_t s_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Hourly timestamps (hours since the Unix epoch, UTC)
// ---------------------------------------------------------------------------

using HourStamp = std::int64_t;

// civil <-> serial day conversions (Hinnant's algorithms)
inline std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yr = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y = static_cast<int>(yr + (m <= 2));
}

inline HourStamp make_hour(int year, unsigned month, unsigned day, unsigned hour) {
    return days_from_civil(year, month, day) * 24 + static_cast<std::int64_t>(hour);
}

/// Parses "YYYY-MM-DDTHH:MM", "YYYY-MM-DD HH:MM" or ":SS" suffixed forms.
/// Minutes/seconds are floored away: the table index is the hour of day.
/// Returns false on malformed input.
inline bool parse_hour(std::string_view s, HourStamp& out) {
    auto num = [&](std::size_t pos, std::size_t len, int& v) {
        if (pos + len > s.size()) return false;
        auto res = std::from_chars(s.data() + pos, s.data() + pos + len, v);
        return res.ec == std::errc() && res.ptr == s.data() + pos + len;
    };
    int y, mo, d, h, mi;
    if (!num(0, 4, y) || !num(5, 2, mo) || !num(8, 2, d) || !num(11, 2, h) || !num(14, 2, mi))
        return false;
    if (s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':')
        return false;
    if (s.size() > 16 && !(s.size() >= 19 && s[16] == ':')) return false;
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 || mi > 59)
        return false;
    out = make_hour(y, static_cast<unsigned>(mo), static_cast<unsigned>(d),
                    static_cast<unsigned>(h));
    return true;
}

inline std::string format_hour(HourStamp t) {
    std::int64_t day = t / 24;
    std::int64_t hour = t % 24;
    if (hour < 0) {
        hour += 24;
        day -= 1;
    }
    int y;
    unsigned m, d;
    civil_from_days(day, y, m, d);
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02lld:00", y, m, d,
                  static_cast<long long>(hour));
    return buf;
}

// ---------------------------------------------------------------------------
// Locale-free numeric formatting (shortest round-trip, for stable CSV output)
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline bool parse_double(std::string_view s, double& out) {
    // from_chars accepts no leading whitespace or '+'
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return false;
    std::size_t e = s.find_last_not_of(" \t\r");
    s = s.substr(b, e - b + 1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

// ---------------------------------------------------------------------------
// Small vector helpers shared across modules
// ---------------------------------------------------------------------------

inline double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace gapcast
