#ifndef GRAFT_RNG_HPP
#define GRAFT_RNG_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

namespace graft {

// Deterministic counter-based RNG with named sub-streams. All sampling is
// built on the raw engine output, so results are identical across platforms
// and standard library implementations (std::*_distribution is not portable).
class Rng {
  public:
    explicit Rng(uint64_t seed) : seed_(splitmix(seed ^ 0x9e3779b97f4a7c15ull)), state_(seed_) {}

    // Independent child stream derived from this stream's seed and a label.
    Rng child(std::string_view name) const {
        uint64_t h = seed_ ^ 0xcbf29ce484222325ull;
        for (unsigned char c : name) h = (h ^ c) * 0x100000001b3ull;
        return Rng(h);
    }
    Rng child(std::string_view name, uint64_t index) const {
        Rng base = child(name);
        return Rng(base.seed_ ^ splitmix(index));
    }

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        return splitmix(state_);
    }

    // Uniform in [0, 1).
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Integer in [0, n).
    uint64_t below(uint64_t n) { return n ? next_u64() % n : 0; }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + int(below(uint64_t(hi - lo + 1)));
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via Box-Muller on raw uniforms.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Beta(a, 1) has CDF x^a on [0,1]: inverse-CDF sampling. The general
    // case goes through a gamma ratio (Marsaglia-Tsang).
    double beta(double a, double b) {
        if (b == 1.0) return std::pow(uniform_open(), 1.0 / a);
        if (a == 1.0) return 1.0 - std::pow(uniform_open(), 1.0 / b);
        double x = gamma_sample(a);
        double y = gamma_sample(b);
        return x / (x + y);
    }

  private:
    static uint64_t splitmix(uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    double uniform_open() {
        double u = uniform();
        return u > 0.0 ? u : 0x1.0p-53;
    }

    double gamma_sample(double shape) {
        double boost = 1.0;
        if (shape < 1.0) {
            boost = std::pow(uniform_open(), 1.0 / shape);
            shape += 1.0;
        }
        double d = shape - 1.0 / 3.0;
        double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            double u = uniform_open();
            if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return boost * d * v;
        }
    }

    uint64_t seed_;
    uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace graft

#endif  // GRAFT_RNG_HPP
