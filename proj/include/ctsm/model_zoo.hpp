#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "ctsm/affine_model.hpp"

namespace ctsm {

enum class ModelId { SRV4F, SCH1F, SCH2F, SCH3F, HU3F, YAN4F, SS4F };

inline constexpr ModelId kAllModels[] = {ModelId::SRV4F, ModelId::SCH1F, ModelId::SCH2F,
                                         ModelId::SCH3F, ModelId::HU3F,  ModelId::YAN4F,
                                         ModelId::SS4F};

std::string_view to_string(ModelId id);
/// Accepts "srv4f", "SRV-4f", "sch1f", ... (case and '-' insensitive).
ModelId model_id_from_string(std::string_view name);

// Map between an unconstrained optimizer coordinate c and the model value.
enum class Transform {
    Identity,     // value = c
    Exponential,  // value = exp(c)
    Correlation,  // value = 0.999 * tanh(c)
    LogOnePlus,   // value = exp(c) - 1, for quantities above -1
};

inline constexpr double kCorrelationBound = 0.999;

double to_constrained(Transform t, double c);
double to_unconstrained(Transform t, double value);

struct ParamDescriptor {
    std::string_view name;
    Transform transform;
};

/// Ordered parameter list of a model, excluding measurement noise.
std::span<const ParamDescriptor> parameter_descriptors(ModelId id);

/// Measurement noise standard deviations keyed by series label ("F2", "R3").
struct NoiseSpec {
    std::vector<std::string> futures_labels;
    Eigen::VectorXd sigma_eps;
    std::vector<std::string> yield_labels;
    Eigen::VectorXd sigma_psi;

    static NoiseSpec uniform(std::vector<std::string> futures_labels, double sigma_eps,
                             std::vector<std::string> yield_labels = {}, double sigma_psi = 0.0);

    /// Standard deviation for a series label; throws InvalidArgument when the
    /// label is unknown.
    double sigma_for(std::string_view label) const;
    bool has(std::string_view label) const;
    int size() const { return static_cast<int>(sigma_eps.size() + sigma_psi.size()); }
};

/// Named parameter values of one zoo model plus its measurement noise.
class ParamSet {
public:
    ParamSet() = default;
    ParamSet(ModelId model, std::vector<double> values, NoiseSpec noise);

    ModelId model() const { return model_; }
    const std::vector<double>& values() const { return values_; }
    const NoiseSpec& noise() const { return noise_; }
    NoiseSpec& noise() { return noise_; }

    double operator[](std::string_view name) const;
    void set(std::string_view name, double value);
    bool has(std::string_view name) const;

    /// Free parameter count including noise.
    int size() const { return static_cast<int>(values_.size()) + noise_.size(); }

    /// Parameter names in packing order (model parameters, sigma_eps_*, sigma_psi_*).
    std::vector<std::string> names() const;
    /// Constrained values in packing order.
    Eigen::VectorXd flat() const;
    /// Inverse of flat(); the layout is taken from *this.
    ParamSet with_flat(std::span<const double> flat) const;

private:
    int index_of(std::string_view name) const;

    ModelId model_ = ModelId::SRV4F;
    std::vector<double> values_;
    NoiseSpec noise_;
};

/// Documented starting point of each model; noise defaults to 0.01 for
/// futures and 0.002 for yields.
ParamSet default_params(ModelId id, const std::vector<std::string>& futures_labels,
                        const std::vector<std::string>& yield_labels = {});

/// Throws ConstraintViolation naming the first failed sign/range invariant.
void validate(const ParamSet& params);

struct BuildOptions {
    double v_min = 1e-8;
    double v_max = 10.0;
    bool check_psd = true;
};

/// Populates the affine dynamics for the parameter set. Throws
/// ConstraintViolation or, when check_psd is set, PsdViolation.
AffineModelSpec build_model(const ParamSet& params, const BuildOptions& options = {});

/// Unconstrained optimizer coordinates, in ParamSet::names() order.
Eigen::VectorXd pack(const ParamSet& params);
/// Any finite coordinates map to a ParamSet satisfying the sign/range
/// invariants. The noise layout (labels) comes from `layout`.
ParamSet unpack(ModelId id, const NoiseSpec& layout, std::span<const double> coords);

/// Transform of each packed coordinate, in ParamSet::names() order.
std::vector<Transform> packed_transforms(const ParamSet& params);

/// Flat JSON object: {"model": "srv4f", "<param>": value, ...,
/// "sigma_eps_F2": value, "sigma_psi_R3": value}.
nlohmann::json to_json(const ParamSet& params);
/// Rejects unknown and missing keys with InvalidArgument.
ParamSet param_set_from_json(const nlohmann::json& j);

}  // namespace ctsm
