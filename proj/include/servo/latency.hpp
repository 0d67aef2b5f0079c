#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "servo/rng.hpp"

namespace servo {

// A latency distribution. Samples are in milliseconds and always >= 0.
//
// Supported forms (and their config syntax):
//   constant:V               fixed V ms
//   lognormal:MEDIAN,SIGMA   exp(Normal(ln MEDIAN, SIGMA))
//   mixture:MEDIAN,SIGMA,P,LO,HI
//                            lognormal body; with probability P the sample is
//                            instead LO + (HI-LO)*u^2, a heavy right tail
//   trace:V1,V2,...          replayed by sample index, wrapping at the end
struct DistSpec {
    enum class Kind { Constant, Lognormal, Mixture, Trace };

    Kind kind = Kind::Constant;
    double value = 0.0;
    double median = 0.0;
    double sigma = 0.0;
    double tail_prob = 0.0;
    double tail_lo = 0.0;
    double tail_hi = 0.0;
    std::vector<double> trace;

    static DistSpec constant(double v);
    static DistSpec lognormal(double median, double sigma);
    static DistSpec mixture(double median, double sigma, double p, double lo, double hi);
    static DistSpec from_trace(std::vector<double> values);
    static DistSpec parse(const std::string& text);

    std::string to_string() const;

    // index identifies the draw within a stream; only Trace uses it.
    double sample(Rng& rng, uint64_t index) const;
};

}  // namespace servo
