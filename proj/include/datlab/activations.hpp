#pragma once

#include <cmath>
#include <string>

#include "datlab/errors.hpp"

namespace datlab {

enum class ActKind { identity, relu, leaky_relu, tanh_ };

constexpr double kLeakySlope = 0.2;

inline double act_f(ActKind k, double x) {
    switch (k) {
        case ActKind::identity: return x;
        case ActKind::relu: return x > 0.0 ? x : 0.0;
        case ActKind::leaky_relu: return x >= 0.0 ? x : kLeakySlope * x;
        case ActKind::tanh_: return std::tanh(x);
    }
    return x;
}

// Derivative convention at the kink (x == 0): positive branch, slope 1.
inline double act_df(ActKind k, double x) {
    switch (k) {
        case ActKind::identity: return 1.0;
        case ActKind::relu: return x >= 0.0 ? 1.0 : 0.0;
        case ActKind::leaky_relu: return x >= 0.0 ? 1.0 : kLeakySlope;
        case ActKind::tanh_: {
            double t = std::tanh(x);
            return 1.0 - t * t;
        }
    }
    return 1.0;
}

inline std::string act_name(ActKind k) {
    switch (k) {
        case ActKind::identity: return "identity";
        case ActKind::relu: return "relu";
        case ActKind::leaky_relu: return "leaky_relu";
        case ActKind::tanh_: return "tanh";
    }
    return "identity";
}

inline ActKind act_from_name(const std::string& s) {
    if (s == "identity") return ActKind::identity;
    if (s == "relu") return ActKind::relu;
    if (s == "leaky_relu") return ActKind::leaky_relu;
    if (s == "tanh") return ActKind::tanh_;
    throw ConfigError("unknown activation '" + s + "'");
}

}  // namespace datlab
