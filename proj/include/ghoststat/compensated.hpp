#pragma once

#include <cmath>

namespace ghoststat {

// Neumaier's variant of Kahan summation: the correction also tracks the
// case |x| > |sum|. Merging two sums is exact up to one extra rounding.
struct CompensatedSum {
    double sum = 0.0;
    double c = 0.0;

    void add(double x) {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x))
            c += (sum - t) + x;
        else
            c += (x - t) + sum;
        sum = t;
    }

    void merge(const CompensatedSum& other) {
        add(other.sum);
        c += other.c;
    }

    double value() const { return sum + c; }
};

} // namespace ghoststat
