#pragma once

#include <string>
#include <vector>

#include "ctsm/model_zoo.hpp"

namespace ctsm::testing {

inline const std::vector<std::string> kEvenFutures{"F2", "F4", "F6", "F8", "F10"};
inline const std::vector<std::string> kOddFutures{"F3", "F5", "F7", "F9", "F11"};
inline const std::vector<std::string> kYields{"R3", "R6"};

// SRV-4f estimates on crude-oil futures and Treasury yields (futures and
// bonds column), in ParamSet::names() order.
inline ParamSet srv_joint_estimates() {
    NoiseSpec noise;
    noise.futures_labels = kEvenFutures;
    noise.sigma_eps = Eigen::VectorXd{{0.017, 4.0e-3, 6.881e-5, 2.0e-4, 2.0e-3}};
    noise.yield_labels = kYields;
    noise.sigma_psi = Eigen::VectorXd{{7.535e-6, 2.0e-3}};
    return ParamSet(ModelId::SRV4F,
                    {0.622, -0.151, 0.244, 0.317, -0.053, 1.577, 0.095, 1.075, 1.516,
                     0.030, -0.022, 4.945, 1.097, 0.045, 0.249, 0.001, 0.001, 0.006,
                     0.572, -0.445, 0.385, -0.933, 0.330, 0.568, 0.309, 0.015, 0.155},
                    noise);
}

// SRV-4f estimates on futures alone.
inline ParamSet srv_futures_estimates() {
    NoiseSpec noise;
    noise.futures_labels = kEvenFutures;
    noise.sigma_eps = Eigen::VectorXd{{0.011, 1.582e-5, 1.0e-3, 6.948e-5, 3.539e-5}};
    return ParamSet(ModelId::SRV4F,
                    {1.670, 4.962, 1.989, 2.027, 2.051, -2.763, 0.227, 0.222, -0.723,
                     2.712, 4.711, 1.557, 2.075, -0.055, 0.019, -0.171, 0.102, 0.772,
                     0.998, 0.444, 0.725, 0.827, 0.583, -0.001, 0.375, 0.595, 0.194},
                    noise);
}

inline BuildOptions unchecked() {
    BuildOptions b;
    b.check_psd = false;
    return b;
}

}  // namespace ctsm::testing
