#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace gnom {

// Error categories map onto CLI exit codes: config=2, data=3, divergence=4.
enum class ErrorKind { config, data, engine, divergence };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

    static Error config(const std::string& m) { return {ErrorKind::config, m}; }
    static Error data(const std::string& m) { return {ErrorKind::data, m}; }
    static Error engine(const std::string& m) { return {ErrorKind::engine, m}; }
    static Error divergence(const std::string& m) { return {ErrorKind::divergence, m}; }

private:
    ErrorKind kind_;
};

// Deterministic RNG. mt19937_64 core with hand-rolled draws so values do not
// depend on libstdc++ distribution internals.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // uniform in [0,1) with 53-bit resolution
    double uniform() { return (engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller, no spare cached (keeps the stream position obvious)
    double normal(double mean = 0.0, double stddev = 1.0);

    // unbiased integer in [0, n)
    uint64_t below(uint64_t n);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

uint64_t fnv1a64(const std::string& s);
std::string hex64(uint64_t v);

// little-endian scalar IO helpers for binary files
void write_u32(std::ostream& os, uint32_t v);
void write_u64(std::ostream& os, uint64_t v);
void write_f64(std::ostream& os, double v);
uint32_t read_u32(std::istream& is);
uint64_t read_u64(std::istream& is);
double read_f64(std::istream& is);

// shortest round-trippable decimal form of a double
std::string format_double(double v);

std::vector<std::string> split(const std::string& s, char sep);

}  // namespace gnom
