#pragma once

// Radial cut-off profile: identically 1 on [0,2], identically 0 on [3,inf),
// strictly decreasing in between, smooth everywhere. Built from the standard
// smooth step g(x) = exp(-1/x):  beta(r) = g(3-r) / (g(3-r) + g(r-2)).

#include <cmath>
#include <stdexcept>

namespace kinlab {

class BumpProfile {
public:
    static double eval(double r) {
        check(r);
        if (r <= 2.0) return 1.0;
        if (r >= 3.0) return 0.0;
        double a = g(3.0 - r), b = g(r - 2.0);
        return a / (a + b);
    }

    static double deriv(double r) {
        check(r);
        if (r <= 2.0 || r >= 3.0) return 0.0;
        double a = g(3.0 - r), b = g(r - 2.0);
        double da = -dg(3.0 - r);  // d/dr g(3-r)
        double db = dg(r - 2.0);
        double s = a + b;
        return (da * b - a * db) / (s * s);
    }

private:
    static void check(double r) {
        if (!(r >= 0.0)) throw std::invalid_argument("BumpProfile: r must be >= 0");
    }
    static double g(double x) { return x > 0.0 ? std::exp(-1.0 / x) : 0.0; }
    static double dg(double x) { return x > 0.0 ? std::exp(-1.0 / x) / (x * x) : 0.0; }
};

}  // namespace kinlab
