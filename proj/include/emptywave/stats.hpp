#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace ew {

struct FringeFit {
    double offset = 0.0;     // a
    double amplitude = 0.0;  // |b| of a + b cos(phase + c)
    double phase = 0.0;      // c

    double visibility() const { return offset == 0.0 ? 0.0 : amplitude / offset; }
};

// Least-squares fit of y = a + B cos(x) + C sin(x); visibility = |b|/a.
inline FringeFit fit_fringe(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 3)
        throw std::invalid_argument("fringe fit needs >= 3 points");
    Eigen::MatrixXd m(xs.size(), 3);
    Eigen::VectorXd y(ys.size());
    for (size_t i = 0; i < xs.size(); ++i) {
        m(i, 0) = 1.0;
        m(i, 1) = std::cos(xs[i]);
        m(i, 2) = std::sin(xs[i]);
        y(i) = ys[i];
    }
    Eigen::Vector3d beta = (m.transpose() * m).ldlt().solve(m.transpose() * y);
    FringeFit fit;
    fit.offset = beta(0);
    fit.amplitude = std::hypot(beta(1), beta(2));
    fit.phase = std::atan2(-beta(2), beta(1));
    return fit;
}

}  // namespace ew
