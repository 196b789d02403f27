#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace teffect {

// ---------------------------------------------------------------------------
// Errors. Every failure carries a stable code string; the kind maps onto the
// CLI exit-code contract (validation=1, estimation=2, io=3).
// ---------------------------------------------------------------------------

enum class ErrorKind { validation, estimation, io };

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), kind_(kind), code_(std::move(code)) {}

    ErrorKind kind() const { return kind_; }
    const std::string& code() const { return code_; }

  private:
    ErrorKind kind_;
    std::string code_;
};

class ValidationError : public Error {
  public:
    ValidationError(std::string code, const std::string& message)
        : Error(ErrorKind::validation, std::move(code), message) {}
};

class EstimationError : public Error {
  public:
    EstimationError(std::string code, const std::string& message)
        : Error(ErrorKind::estimation, std::move(code), message) {}
};

class IoError : public Error {
  public:
    IoError(std::string code, const std::string& message)
        : Error(ErrorKind::io, std::move(code), message) {}
};

// ---------------------------------------------------------------------------
// Logging. Progress goes to stderr; machine output only ever goes to files.
// ---------------------------------------------------------------------------

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

LogLevel log_level();
void set_log_level(LogLevel level);
void set_log_level_from_env();  // reads TEFFECT_LOG_LEVEL
void log_message(LogLevel level, const std::string& msg);

inline void log_error(const std::string& m) { log_message(LogLevel::error, m); }
inline void log_warn(const std::string& m) { log_message(LogLevel::warn, m); }
inline void log_info(const std::string& m) { log_message(LogLevel::info, m); }
inline void log_debug(const std::string& m) { log_message(LogLevel::debug, m); }

// ---------------------------------------------------------------------------
// Worker pool size. All parallel loops consult this; results are written into
// preallocated slots so output is identical for any job count.
// ---------------------------------------------------------------------------

int jobs();
void set_jobs(int n);

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

// ---------------------------------------------------------------------------
// Seeded random generator. Distributions are implemented here rather than
// taken from <random> so that generated data is bit-identical across
// standard-library implementations.
// ---------------------------------------------------------------------------

uint64_t splitmix64(uint64_t x);

// Independent stream for work item `stream` under a base seed.
inline uint64_t derive_seed(uint64_t base, uint64_t stream) {
    return splitmix64(base + 0x9e3779b97f4a7c15ULL * (stream + 1));
}

class Rng {
  public:
    explicit Rng(uint64_t seed);

    uint64_t next_u64();
    double uniform01();                    // [0, 1)
    double uniform(double lo, double hi);  // [lo, hi)
    uint64_t uniform_int(uint64_t n);      // [0, n)
    double normal();                       // standard normal, Marsaglia polar
    double normal(double mean, double sd) { return mean + sd * normal(); }
    bool bernoulli(double p) { return uniform01() < p; }

    // Fisher-Yates shuffle of an index vector.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    // xoshiro256** state, seeded through splitmix64.
    uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// ---------------------------------------------------------------------------
// Calendar dates (ISO-8601, proleptic Gregorian).
// ---------------------------------------------------------------------------

struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    static Date parse_iso(const std::string& text);  // throws InvalidDate
    static Date from_serial(int64_t days);           // days since 1970-01-01
    int64_t serial() const;
    std::string iso() const;

    auto operator<=>(const Date&) const = default;
};

// ---------------------------------------------------------------------------
// Small numeric helpers.
// ---------------------------------------------------------------------------

double mean_of(const std::vector<double>& v);
double stddev_pop(const std::vector<double>& v);   // population (divide by n)
double stddev_samp(const std::vector<double>& v);  // sample (divide by n-1)

// Round to `digits` significant decimal digits; used to pin file output.
double round_sig(double x, int digits);

inline bool is_missing(double x) { return std::isnan(x); }
inline double missing_value() { return std::numeric_limits<double>::quiet_NaN(); }

}  // namespace teffect
