#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>

namespace loadgen::testkit {

struct GradCheck {
    Eigen::Index parameters = 0;
    Eigen::Index within_1e4 = 0;
    double worst = 0.0;

    double share_within_1e4() const
    {
        return parameters == 0 ? 1.0 : static_cast<double>(within_1e4) / static_cast<double>(parameters);
    }
};

// |a - f| / max(|a|, |f|, floor): the floor keeps parameters whose true
// gradient is zero from reporting noise as relative error.
inline double relative_error(double analytic, double numeric, double floor = 1e-7)
{
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Central differences of `loss` around `theta` against `analytic`.
inline GradCheck check_gradient(const std::function<double(const Eigen::VectorXd&)>& loss, Eigen::VectorXd theta,
                                const Eigen::VectorXd& analytic, double step = 1e-5)
{
    GradCheck r;
    r.parameters = theta.size();
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        const double saved = theta(i);
        theta(i) = saved + step;
        const double up = loss(theta);
        theta(i) = saved - step;
        const double down = loss(theta);
        theta(i) = saved;
        const double err = relative_error(analytic(i), (up - down) / (2.0 * step));
        r.worst = std::max(r.worst, err);
        if (err <= 1e-4) {
            ++r.within_1e4;
        }
    }
    return r;
}

} // namespace loadgen::testkit
