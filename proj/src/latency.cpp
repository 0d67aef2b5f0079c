#include "servo/latency.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace servo {

DistSpec DistSpec::constant(double v) {
    DistSpec d;
    d.kind = Kind::Constant;
    d.value = v;
    return d;
}

DistSpec DistSpec::lognormal(double median, double sigma) {
    DistSpec d;
    d.kind = Kind::Lognormal;
    d.median = median;
    d.sigma = sigma;
    return d;
}

DistSpec DistSpec::mixture(double median, double sigma, double p, double lo, double hi) {
    DistSpec d;
    d.kind = Kind::Mixture;
    d.median = median;
    d.sigma = sigma;
    d.tail_prob = p;
    d.tail_lo = lo;
    d.tail_hi = hi;
    return d;
}

DistSpec DistSpec::from_trace(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("latency trace must not be empty");
    DistSpec d;
    d.kind = Kind::Trace;
    d.trace = std::move(values);
    return d;
}

static std::vector<double> parse_doubles(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stod(item));
    }
    return out;
}

DistSpec DistSpec::parse(const std::string& text) {
    auto colon = text.find(':');
    if (colon == std::string::npos)
        throw std::invalid_argument("latency spec missing ':': " + text);
    std::string kind = text.substr(0, colon);
    std::vector<double> args = parse_doubles(text.substr(colon + 1));
    auto need = [&](size_t n) {
        if (args.size() != n)
            throw std::invalid_argument("latency spec '" + kind + "' wants " +
                                        std::to_string(n) + " args: " + text);
    };
    if (kind == "constant") {
        need(1);
        return constant(args[0]);
    }
    if (kind == "lognormal") {
        need(2);
        return lognormal(args[0], args[1]);
    }
    if (kind == "mixture") {
        need(5);
        return mixture(args[0], args[1], args[2], args[3], args[4]);
    }
    if (kind == "trace") {
        return from_trace(args);
    }
    throw std::invalid_argument("unknown latency spec kind: " + kind);
}

std::string DistSpec::to_string() const {
    std::ostringstream os;
    switch (kind) {
        case Kind::Constant:
            os << "constant:" << value;
            break;
        case Kind::Lognormal:
            os << "lognormal:" << median << "," << sigma;
            break;
        case Kind::Mixture:
            os << "mixture:" << median << "," << sigma << "," << tail_prob << ","
               << tail_lo << "," << tail_hi;
            break;
        case Kind::Trace:
            os << "trace:";
            for (size_t i = 0; i < trace.size(); ++i) {
                if (i) os << ",";
                os << trace[i];
            }
            break;
    }
    return os.str();
}

double DistSpec::sample(Rng& rng, uint64_t index) const {
    switch (kind) {
        case Kind::Constant:
            return value;
        case Kind::Lognormal: {
            double n = rng.normal(std::log(median), sigma);
            return std::exp(n);
        }
        case Kind::Mixture: {
            double u = rng.next_double();
            if (u < tail_prob) {
                double t = rng.next_double();
                return tail_lo + (tail_hi - tail_lo) * t * t;
            }
            double n = rng.normal(std::log(median), sigma);
            return std::exp(n);
        }
        case Kind::Trace:
            return trace[index % trace.size()];
    }
    return 0.0;
}

}  // namespace servo
