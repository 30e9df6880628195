#include "ctsm/model_zoo.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <string>

#include "ctsm/errors.hpp"

namespace ctsm {

namespace {

using T = Transform;

constexpr ParamDescriptor kSrv4f[] = {
    {"mu1_hat", T::Identity},  {"mu2", T::Identity},      {"mu2_hat", T::Identity},
    {"mu3", T::Identity},      {"mu3_hat", T::Identity},  {"mu4", T::Identity},
    {"mu4_hat", T::Exponential}, {"k2", T::Identity},     {"k2_hat", T::Identity},
    {"k3", T::Identity},       {"k3_hat", T::Identity},   {"k4", T::Identity},
    {"k4_hat", T::Exponential}, {"s12", T::Identity},     {"s22", T::Identity},
    {"s13", T::Identity},      {"s23", T::Identity},      {"s33", T::Identity},
    {"rho12", T::Correlation}, {"rho13", T::Correlation}, {"rho14", T::Correlation},
    {"rho23", T::Correlation}, {"rho24", T::Correlation}, {"rho34", T::Correlation},
    {"sigma22", T::Exponential}, {"sigma33", T::Exponential}, {"sigma44", T::Exponential},
};

constexpr ParamDescriptor kSch1f[] = {
    {"kappa", T::Identity}, {"alpha", T::Identity}, {"lambda", T::Identity},
    {"sigma", T::Exponential},
};

constexpr ParamDescriptor kSch2f[] = {
    {"mu", T::Identity},        {"kappa", T::Identity},     {"alpha", T::Identity},
    {"lambda", T::Identity},    {"sigma1", T::Exponential}, {"sigma2", T::Exponential},
    {"rho", T::Correlation},    {"r", T::Identity},
};

constexpr ParamDescriptor kSch3f[] = {
    {"mu1_hat", T::Identity},   {"kappa", T::Identity},     {"alpha", T::Identity},
    {"alpha_hat", T::Identity}, {"a", T::Identity},         {"mu", T::Identity},
    {"mu_hat", T::Identity},    {"sigma1", T::Exponential}, {"sigma2", T::Exponential},
    {"sigma3", T::Exponential}, {"rho1", T::Correlation},   {"rho2", T::Correlation},
    {"rho3", T::Correlation},
};

constexpr ParamDescriptor kHu3f[] = {
    {"mu1_hat", T::Identity}, {"mu2", T::Identity},       {"mu2_hat", T::Identity},
    {"mu3", T::Identity},     {"mu3_hat", T::Identity},   {"kappa12", T::Identity},
    {"kappa22", T::Identity}, {"kappa23", T::Identity},   {"kappa33", T::Identity},
    {"s12", T::Identity},     {"s22", T::Identity},       {"vartheta", T::Identity},
    {"sigma12", T::Identity}, {"sigma13", T::Identity},   {"sigma22", T::Exponential},
    {"sigma23", T::Identity}, {"sigma33", T::Exponential},
};

constexpr ParamDescriptor kYan4f[] = {
    {"mu1_hat", T::Identity},        {"kappa_delta", T::Identity},
    {"mu_delta", T::Identity},       {"mu_delta_hat", T::Identity},
    {"kappa_r", T::Identity},        {"mu_r", T::Identity},
    {"mu_r_hat", T::Identity},       {"kappa_v", T::Identity},
    {"mu_v", T::Identity},           {"kappa_v_hat", T::Exponential},
    {"mu_v_hat", T::Exponential},    {"sigma_x", T::Exponential},
    {"sigma_delta", T::Exponential}, {"sigma_r", T::Exponential},
    {"sigma_v", T::Exponential},     {"rho_xdelta", T::Correlation},
    {"rho_xv", T::Correlation},      {"jump_intensity", T::Exponential},
    {"jump_mean", T::LogOnePlus},      {"jump_vol", T::Exponential},
    {"vol_jump_scale", T::Exponential},
};

constexpr ParamDescriptor kSs4f[] = {
    {"mu1_hat", T::Identity},  {"mu2", T::Identity},         {"mu2_hat", T::Identity},
    {"kappa11", T::Identity},  {"kappa14", T::Identity},     {"kappa33", T::Identity},
    {"mu3", T::Identity},      {"mu3_hat", T::Identity},     {"kappa44", T::Identity},
    {"mu4", T::Identity},      {"kappa44_hat", T::Exponential}, {"mu4_hat", T::Exponential},
    {"s12", T::Identity},      {"s13", T::Identity},         {"s22", T::Identity},
    {"s23", T::Identity},      {"s33", T::Identity},         {"vartheta", T::Identity},
    {"sigma12", T::Identity},  {"sigma13", T::Identity},     {"sigma14", T::Identity},
    {"sigma22", T::Exponential}, {"sigma23", T::Identity},   {"sigma24", T::Identity},
    {"sigma33", T::Exponential}, {"sigma34", T::Identity},   {"sigma44", T::Exponential},
};

// Parameters that must be strictly positive; other exponential-mapped
// parameters may be zero (degenerate, deterministic factors).
constexpr std::string_view kStrictlyPositive[] = {
    "mu4_hat", "k4_hat", "kappa_v_hat", "mu_v_hat", "kappa44_hat", "vol_jump_scale",
};

std::string normalized(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '-' || c == '_') continue;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

// Natural order for labels like F2 < F10, R3 < R6.
bool label_less(const std::string& a, const std::string& b) {
    auto split = [](const std::string& s) {
        std::size_t i = 0;
        while (i < s.size() && !std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
        const long num = i < s.size() ? std::stol(s.substr(i)) : -1;
        return std::make_pair(s.substr(0, i), num);
    };
    return split(a) < split(b);
}

StateMatrix symmetric(int n, std::initializer_list<double> upper) {
    StateMatrix m = StateMatrix::Zero(n, n);
    auto it = upper.begin();
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j, ++it) m(i, j) = m(j, i) = *it;
    return m;
}

StateMatrix rows(int n, std::initializer_list<double> values) {
    StateMatrix m(n, n);
    auto it = values.begin();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j, ++it) m(i, j) = *it;
    return m;
}

StateVector vec(std::initializer_list<double> values) {
    StateVector v(static_cast<int>(values.size()));
    int i = 0;
    for (double x : values) v(i++) = x;
    return v;
}

}  // namespace

std::string_view to_string(ModelId id) {
    switch (id) {
        case ModelId::SRV4F: return "srv4f";
        case ModelId::SCH1F: return "sch1f";
        case ModelId::SCH2F: return "sch2f";
        case ModelId::SCH3F: return "sch3f";
        case ModelId::HU3F: return "hu3f";
        case ModelId::YAN4F: return "yan4f";
        case ModelId::SS4F: return "ss4f";
    }
    return "unknown";
}

ModelId model_id_from_string(std::string_view name) {
    const std::string key = normalized(name);
    for (ModelId id : kAllModels) {
        if (key == to_string(id)) return id;
    }
    throw InvalidArgument("unknown model id '" + std::string(name) + "'");
}

double to_constrained(Transform t, double c) {
    switch (t) {
        case Transform::Identity: return c;
        case Transform::Exponential: return std::exp(std::clamp(c, -300.0, 300.0));
        case Transform::Correlation: return kCorrelationBound * std::tanh(c);
        case Transform::LogOnePlus: return std::expm1(std::clamp(c, -30.0, 300.0));
    }
    return c;
}

double to_unconstrained(Transform t, double value) {
    switch (t) {
        case Transform::Identity: return value;
        case Transform::Exponential:
            if (!(value > 0.0)) throw InvalidArgument("pack: exponential-mapped value must be > 0");
            return std::log(value);
        case Transform::Correlation:
            if (!(std::abs(value) < kCorrelationBound))
                throw InvalidArgument("pack: correlation outside (-0.999, 0.999)");
            return std::atanh(value / kCorrelationBound);
        case Transform::LogOnePlus:
            if (!(value > -1.0)) throw InvalidArgument("pack: value must be > -1");
            return std::log1p(value);
    }
    return value;
}

std::span<const ParamDescriptor> parameter_descriptors(ModelId id) {
    switch (id) {
        case ModelId::SRV4F: return kSrv4f;
        case ModelId::SCH1F: return kSch1f;
        case ModelId::SCH2F: return kSch2f;
        case ModelId::SCH3F: return kSch3f;
        case ModelId::HU3F: return kHu3f;
        case ModelId::YAN4F: return kYan4f;
        case ModelId::SS4F: return kSs4f;
    }
    return {};
}

// ---------------------------------------------------------------------------
// NoiseSpec

NoiseSpec NoiseSpec::uniform(std::vector<std::string> futures_labels, double sigma_eps,
                             std::vector<std::string> yield_labels, double sigma_psi) {
    NoiseSpec out;
    out.sigma_eps = Eigen::VectorXd::Constant(static_cast<int>(futures_labels.size()), sigma_eps);
    out.sigma_psi = Eigen::VectorXd::Constant(static_cast<int>(yield_labels.size()), sigma_psi);
    out.futures_labels = std::move(futures_labels);
    out.yield_labels = std::move(yield_labels);
    return out;
}

bool NoiseSpec::has(std::string_view label) const {
    return std::find(futures_labels.begin(), futures_labels.end(), label) != futures_labels.end() ||
           std::find(yield_labels.begin(), yield_labels.end(), label) != yield_labels.end();
}

double NoiseSpec::sigma_for(std::string_view label) const {
    for (std::size_t i = 0; i < futures_labels.size(); ++i)
        if (futures_labels[i] == label) return sigma_eps(static_cast<int>(i));
    for (std::size_t i = 0; i < yield_labels.size(); ++i)
        if (yield_labels[i] == label) return sigma_psi(static_cast<int>(i));
    throw InvalidArgument("no measurement noise for series '" + std::string(label) + "'");
}

// ---------------------------------------------------------------------------
// ParamSet

ParamSet::ParamSet(ModelId model, std::vector<double> values, NoiseSpec noise)
    : model_(model), values_(std::move(values)), noise_(std::move(noise)) {
    if (values_.size() != parameter_descriptors(model_).size()) {
        throw InvalidArgument("ParamSet: expected " +
                              std::to_string(parameter_descriptors(model_).size()) +
                              " values for " + std::string(to_string(model_)));
    }
}

int ParamSet::index_of(std::string_view name) const {
    const auto desc = parameter_descriptors(model_);
    for (std::size_t i = 0; i < desc.size(); ++i)
        if (desc[i].name == name) return static_cast<int>(i);
    return -1;
}

bool ParamSet::has(std::string_view name) const { return index_of(name) >= 0; }

double ParamSet::operator[](std::string_view name) const {
    const int i = index_of(name);
    if (i < 0) {
        throw InvalidArgument("parameter '" + std::string(name) + "' not defined for " +
                              std::string(to_string(model_)));
    }
    return values_[static_cast<std::size_t>(i)];
}

void ParamSet::set(std::string_view name, double value) {
    const int i = index_of(name);
    if (i < 0) {
        throw InvalidArgument("parameter '" + std::string(name) + "' not defined for " +
                              std::string(to_string(model_)));
    }
    values_[static_cast<std::size_t>(i)] = value;
}

std::vector<std::string> ParamSet::names() const {
    std::vector<std::string> out;
    for (const auto& d : parameter_descriptors(model_)) out.emplace_back(d.name);
    for (const auto& l : noise_.futures_labels) out.push_back("sigma_eps_" + l);
    for (const auto& l : noise_.yield_labels) out.push_back("sigma_psi_" + l);
    return out;
}

Eigen::VectorXd ParamSet::flat() const {
    Eigen::VectorXd out(size());
    int k = 0;
    for (double v : values_) out(k++) = v;
    for (int i = 0; i < noise_.sigma_eps.size(); ++i) out(k++) = noise_.sigma_eps(i);
    for (int i = 0; i < noise_.sigma_psi.size(); ++i) out(k++) = noise_.sigma_psi(i);
    return out;
}

ParamSet ParamSet::with_flat(std::span<const double> flat) const {
    if (static_cast<int>(flat.size()) != size())
        throw InvalidArgument("ParamSet::with_flat: size mismatch");
    ParamSet out = *this;
    std::size_t k = 0;
    for (double& v : out.values_) v = flat[k++];
    for (int i = 0; i < out.noise_.sigma_eps.size(); ++i) out.noise_.sigma_eps(i) = flat[k++];
    for (int i = 0; i < out.noise_.sigma_psi.size(); ++i) out.noise_.sigma_psi(i) = flat[k++];
    return out;
}

// ---------------------------------------------------------------------------

ParamSet default_params(ModelId id, const std::vector<std::string>& futures_labels,
                        const std::vector<std::string>& yield_labels) {
    NoiseSpec noise = NoiseSpec::uniform(futures_labels, 0.01, yield_labels, 0.002);
    switch (id) {
        case ModelId::SRV4F:
            return ParamSet(id,
                            {0.10, 0.05, 0.08, 0.04, 0.03, 0.12, 0.10, 1.0, 1.5, 0.3, 0.5, 2.0,
                             1.5, 0.0, 0.02, 0.0, 0.0005, 0.0001, 0.5, -0.1, 0.3, -0.2, 0.2, 0.1,
                             0.3, 0.02, 0.15},
                            noise);
        case ModelId::SCH1F:
            return ParamSet(id, {1.0, 4.0, 0.1, 0.35}, noise);
        case ModelId::SCH2F:
            return ParamSet(id, {0.10, 1.2, 0.05, 0.02, 0.35, 0.30, 0.6, 0.04}, noise);
        case ModelId::SCH3F:
            return ParamSet(id,
                            {0.10, 1.2, 0.05, 0.07, 0.3, 0.04, 0.035, 0.35, 0.30, 0.01, 0.6, 0.1,
                             0.05},
                            noise);
        case ModelId::HU3F:
            return ParamSet(id,
                            {0.05, 0.0, 0.02, 0.2, 0.24, 0.0, -1.0, 0.0, -2.0, 0.0, 0.02, 0.0,
                             0.1, 0.05, 0.09, 0.01, 0.04},
                            noise);
        case ModelId::YAN4F:
            return ParamSet(id,
                            {0.05, 1.0, 0.03, 0.03, 0.5, 0.02, 0.02, 2.0, 0.12, 2.0, 0.06, 0.15,
                             0.10, 0.05, 0.30, 0.5, -0.3, 0.5, -0.02, 0.05, 0.01},
                            noise);
        case ModelId::SS4F:
            return ParamSet(id,
                            {0.0, 0.0, 0.01, 1.0, -0.5, 1.5, 0.0, 0.02, 2.0, 0.1, 1.5, 0.1, 0.0,
                             0.0, 0.01, 0.0, 0.01, 0.0, 0.05, 0.05, 0.1, 0.02, 0.0, 0.0, 0.05, 0.0,
                             0.04},
                            noise);
    }
    throw InvalidArgument("default_params: unknown model");
}

void validate(const ParamSet& params) {
    const auto desc = parameter_descriptors(params.model());
    const auto& values = params.values();
    for (std::size_t i = 0; i < desc.size(); ++i) {
        const double v = values[i];
        const std::string name(desc[i].name);
        if (!std::isfinite(v)) throw ConstraintViolation(name + " is not finite");
        const bool strict = std::find(std::begin(kStrictlyPositive), std::end(kStrictlyPositive),
                                      desc[i].name) != std::end(kStrictlyPositive);
        switch (desc[i].transform) {
            case Transform::Correlation:
                if (!(std::abs(v) < 1.0)) throw ConstraintViolation("|" + name + "| < 1 violated");
                break;
            case Transform::Exponential:
                if (strict ? !(v > 0.0) : !(v >= 0.0)) {
                    throw ConstraintViolation(name + (strict ? " > 0" : " >= 0") + " violated");
                }
                break;
            case Transform::LogOnePlus:
                if (!(v > -1.0)) throw ConstraintViolation(name + " > -1 violated");
                break;
            case Transform::Identity: break;
        }
    }
    const auto& noise = params.noise();
    for (int i = 0; i < noise.sigma_eps.size(); ++i) {
        if (!(noise.sigma_eps(i) > 0.0) || !std::isfinite(noise.sigma_eps(i)))
            throw ConstraintViolation("sigma_eps_" + noise.futures_labels[i] + " > 0 violated");
    }
    for (int i = 0; i < noise.sigma_psi.size(); ++i) {
        if (!(noise.sigma_psi(i) > 0.0) || !std::isfinite(noise.sigma_psi(i)))
            throw ConstraintViolation("sigma_psi_" + noise.yield_labels[i] + " > 0 violated");
    }
}

AffineModelSpec build_model(const ParamSet& params, const BuildOptions& options) {
    validate(params);
    const auto p = [&](std::string_view name) { return params[name]; };
    AffineModelSpec s;
    s.v_min = options.v_min;
    s.v_max = options.v_max;

    switch (params.model()) {
        case ModelId::SRV4F: {
            s.n = 4;
            s.roles = {FactorRole::LogSpot, FactorRole::ConvenienceYield, FactorRole::ShortRate,
                       FactorRole::Variance};
            const double k2 = p("k2"), k3 = p("k3"), k4 = p("k4");
            const double k2h = p("k2_hat"), k3h = p("k3_hat"), k4h = p("k4_hat");
            s.a_q = vec({0.0, k2 * p("mu2"), k3 * p("mu3"), k4 * p("mu4")});
            s.b_q = rows(4, {0, -1, 1, -0.5, 0, -k2, 0, 0, 0, 0, -k3, 0, 0, 0, 0, -k4});
            s.a_p = vec({p("mu1_hat"), k2h * p("mu2_hat"), k3h * p("mu3_hat"), k4h * p("mu4_hat")});
            s.b_p = rows(4, {0, -1, 0, -0.5, 0, -k2h, 0, 0, 0, 0, -k3h, 0, 0, 0, 0, -k4h});
            s.omega0 = symmetric(4, {0, p("s12"), p("s13"), 0,  //
                                     p("s22"), p("s23"), 0,     //
                                     p("s33"), 0,               //
                                     0});
            const double s2 = p("sigma22"), s3 = p("sigma33"), s4 = p("sigma44");
            s.omega1 = symmetric(4, {1.0, p("rho12") * s2, p("rho13") * s3, p("rho14") * s4,
                                     s2 * s2, p("rho23") * s2 * s3, p("rho24") * s2 * s4,
                                     s3 * s3, p("rho34") * s3 * s4,  //
                                     s4 * s4});
            s.vol_index = 3;
            s.short_rate_index = 2;
            s.carry_index = 1;
            break;
        }
        case ModelId::SCH1F: {
            s.n = 1;
            s.roles = {FactorRole::LogSpot};
            const double kappa = p("kappa"), sigma = p("sigma");
            s.a_q = vec({kappa * (p("alpha") - p("lambda"))});
            s.b_q = rows(1, {-kappa});
            s.a_p = vec({kappa * p("alpha")});
            s.b_p = s.b_q;
            s.omega0 = symmetric(1, {sigma * sigma});
            s.omega1 = StateMatrix::Zero(1, 1);
            break;
        }
        case ModelId::SCH2F: {
            s.n = 2;
            s.roles = {FactorRole::LogSpot, FactorRole::ConvenienceYield};
            const double kappa = p("kappa"), s1 = p("sigma1"), s2 = p("sigma2");
            s.a_q = vec({p("r") - 0.5 * s1 * s1, kappa * (p("alpha") - p("lambda"))});
            s.b_q = rows(2, {0, -1, 0, -kappa});
            s.a_p = vec({p("mu") - 0.5 * s1 * s1, kappa * p("alpha")});
            s.b_p = s.b_q;
            s.omega0 = symmetric(2, {s1 * s1, p("rho") * s1 * s2, s2 * s2});
            s.omega1 = StateMatrix::Zero(2, 2);
            s.carry_index = 1;
            break;
        }
        case ModelId::SCH3F: {
            s.n = 3;
            s.roles = {FactorRole::LogSpot, FactorRole::ConvenienceYield, FactorRole::ShortRate};
            const double kappa = p("kappa"), a = p("a");
            const double s1 = p("sigma1"), s2 = p("sigma2"), s3 = p("sigma3");
            s.a_q = vec({-0.5 * s1 * s1, kappa * p("alpha"), a * p("mu")});
            s.b_q = rows(3, {0, -1, 1, 0, -kappa, 0, 0, 0, -a});
            s.a_p = vec({p("mu1_hat") - 0.5 * s1 * s1, kappa * p("alpha_hat"), a * p("mu_hat")});
            s.b_p = rows(3, {0, -1, 0, 0, -kappa, 0, 0, 0, -a});
            s.omega0 = symmetric(3, {s1 * s1, p("rho1") * s1 * s2, p("rho3") * s1 * s3,  //
                                     s2 * s2, p("rho2") * s2 * s3,                       //
                                     s3 * s3});
            s.omega1 = StateMatrix::Zero(3, 3);
            s.short_rate_index = 2;
            s.carry_index = 1;
            break;
        }
        case ModelId::HU3F: {
            s.n = 3;
            s.roles = {FactorRole::LogSpot, FactorRole::ConvenienceYield, FactorRole::Variance};
            s.a_q = vec({0.0, p("mu2"), p("mu3")});
            s.b_q = rows(3, {0, 1, -0.5,                                   //
                             p("kappa12"), p("kappa22"), p("kappa23"),     //
                             0, 0, p("kappa33")});
            s.a_p = vec({p("mu1_hat"), p("mu2_hat"), p("mu3_hat")});
            s.b_p = s.b_q;
            const double th = p("vartheta");
            s.omega0 = symmetric(3, {0, p("s12"), p("sigma13") * th,  //
                                     p("s22"), p("sigma23") * th,     //
                                     p("sigma33") * th});
            s.omega1 = symmetric(3, {1.0, p("sigma12"), p("sigma13"),  //
                                     p("sigma22"), p("sigma23"),       //
                                     p("sigma33")});
            s.vol_index = 2;
            s.carry_index = 1;
            break;
        }
        case ModelId::YAN4F: {
            s.n = 4;
            s.roles = {FactorRole::LogSpot, FactorRole::ConvenienceYield, FactorRole::ShortRate,
                       FactorRole::Variance};
            JumpSpec jump{p("jump_intensity"), p("jump_mean"), p("jump_vol"), p("vol_jump_scale")};
            const double kd = p("kappa_delta"), kr = p("kappa_r");
            const double kv = p("kappa_v"), kvh = p("kappa_v_hat");
            const double sx = p("sigma_x"), sd = p("sigma_delta"), sr = p("sigma_r"),
                         sv = p("sigma_v");
            s.a_q = vec({-jump.intensity * jump.mean_jump - 0.5 * sx * sx, p("mu_delta"),
                         p("mu_r"), p("mu_v")});
            s.b_q = rows(4, {0, -1, 1, -0.5, 0, -kd, 0, 0, 0, 0, -kr, 0, 0, 0, 0, -kv});
            s.a_p = vec({p("mu1_hat"), p("mu_delta_hat"), p("mu_r_hat"), kvh * p("mu_v_hat")});
            s.b_p = rows(4, {0, -1, 0, -0.5, 0, -kd, 0, 0, 0, 0, -kr, 0, 0, 0, 0, -kvh});
            s.omega0 = symmetric(4, {sx * sx, p("rho_xdelta") * sx * sd, 0, 0,  //
                                     sd * sd, 0, 0,                            //
                                     0, 0,                                     //
                                     0});
            s.omega1 = symmetric(4, {1.0, 0, 0, p("rho_xv") * sv,  //
                                     0, 0, 0,                      //
                                     0, 0,                         //
                                     sv * sv});
            s.sqrt_short_rate = true;
            s.rate_variance = sr * sr;
            s.jump = jump;
            s.vol_index = 3;
            s.short_rate_index = 2;
            s.carry_index = 1;
            break;
        }
        case ModelId::SS4F: {
            s.n = 4;
            s.roles = {FactorRole::LogSpot, FactorRole::LongTermLevel, FactorRole::CostOfCarry,
                       FactorRole::Variance};
            const double k11 = p("kappa11"), k14 = p("kappa14"), k33 = p("kappa33");
            const double k44 = p("kappa44"), k44h = p("kappa44_hat");
            s.a_q = vec({0.0, p("mu2"), k33 * p("mu3"), k44 * p("mu4")});
            s.b_q = rows(4, {-k11, k11, -1, k14, 0, 0, 0, 0, 0, 0, -k33, 0, 0, 0, 0, -k44});
            s.a_p = vec({p("mu1_hat"), p("mu2_hat"), k33 * p("mu3_hat"), k44h * p("mu4_hat")});
            s.b_p = rows(4, {-k11, k11, -1, k14, 0, 0, 0, 0, 0, 0, -k33, 0, 0, 0, 0, -k44h});
            const double th = p("vartheta");
            s.omega0 = symmetric(4, {0, p("s12"), p("s13"), th * p("sigma14"),  //
                                     p("s22"), p("s23"), th * p("sigma24"),     //
                                     p("s33"), th * p("sigma34"),               //
                                     th * p("sigma44")});
            s.omega1 = symmetric(4, {1.0, p("sigma12"), p("sigma13"), p("sigma14"),  //
                                     p("sigma22"), p("sigma23"), p("sigma24"),       //
                                     p("sigma33"), p("sigma34"),                     //
                                     p("sigma44")});
            s.vol_index = 3;
            s.carry_index = 2;
            break;
        }
    }

    if (options.check_psd) {
        const double defect = psd_violation(s);
        if (defect > 0.0) {
            throw PsdViolation("Omega0 + Omega1 v is not PSD on [" + std::to_string(s.v_min) +
                               ", " + std::to_string(s.v_max) + "] for " +
                               std::string(to_string(params.model())) + " (eigenvalue " +
                               std::to_string(-defect) + ")");
        }
    }
    return s;
}

std::vector<Transform> packed_transforms(const ParamSet& params) {
    std::vector<Transform> out;
    for (const auto& d : parameter_descriptors(params.model())) out.push_back(d.transform);
    for (int i = 0; i < params.noise().size(); ++i) out.push_back(Transform::Exponential);
    return out;
}

Eigen::VectorXd pack(const ParamSet& params) {
    validate(params);
    const Eigen::VectorXd flat = params.flat();
    const auto transforms = packed_transforms(params);
    Eigen::VectorXd out(flat.size());
    for (int i = 0; i < flat.size(); ++i) out(i) = to_unconstrained(transforms[i], flat(i));
    return out;
}

ParamSet unpack(ModelId id, const NoiseSpec& layout, std::span<const double> coords) {
    const auto desc = parameter_descriptors(id);
    const std::size_t expected = desc.size() + static_cast<std::size_t>(layout.size());
    if (coords.size() != expected) {
        throw InvalidArgument("unpack: expected " + std::to_string(expected) + " coordinates, got " +
                              std::to_string(coords.size()));
    }
    std::vector<double> values(desc.size());
    for (std::size_t i = 0; i < desc.size(); ++i)
        values[i] = to_constrained(desc[i].transform, coords[i]);
    NoiseSpec noise = layout;
    std::size_t k = desc.size();
    for (int i = 0; i < noise.sigma_eps.size(); ++i)
        noise.sigma_eps(i) = to_constrained(Transform::Exponential, coords[k++]);
    for (int i = 0; i < noise.sigma_psi.size(); ++i)
        noise.sigma_psi(i) = to_constrained(Transform::Exponential, coords[k++]);
    return ParamSet(id, std::move(values), std::move(noise));
}

nlohmann::json to_json(const ParamSet& params) {
    nlohmann::json j;
    j["model"] = std::string(to_string(params.model()));
    const auto names = params.names();
    const Eigen::VectorXd flat = params.flat();
    for (std::size_t i = 0; i < names.size(); ++i) j[names[i]] = flat(static_cast<int>(i));
    return j;
}

ParamSet param_set_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("model"))
        throw InvalidArgument("parameter JSON must be an object with a 'model' key");
    const ModelId id = model_id_from_string(j.at("model").get<std::string>());
    const auto desc = parameter_descriptors(id);
    std::vector<double> values(desc.size());
    std::vector<bool> seen(desc.size(), false);
    std::map<std::string, double> eps, psi;
    for (const auto& [key, value] : j.items()) {
        if (key == "model") continue;
        if (!value.is_number()) throw InvalidArgument("parameter '" + key + "' is not a number");
        const double x = value.get<double>();
        bool matched = false;
        for (std::size_t i = 0; i < desc.size(); ++i) {
            if (desc[i].name == key) {
                values[i] = x;
                seen[i] = true;
                matched = true;
            }
        }
        if (matched) continue;
        if (key.rfind("sigma_eps_", 0) == 0) {
            eps[key.substr(10)] = x;
        } else if (key.rfind("sigma_psi_", 0) == 0) {
            psi[key.substr(10)] = x;
        } else {
            throw InvalidArgument("unknown parameter '" + key + "' for model " +
                                  std::string(to_string(id)));
        }
    }
    for (std::size_t i = 0; i < desc.size(); ++i) {
        if (!seen[i]) throw InvalidArgument("missing parameter '" + std::string(desc[i].name) + "'");
    }
    auto sorted = [](const std::map<std::string, double>& m) {
        std::vector<std::string> labels;
        for (const auto& kv : m) labels.push_back(kv.first);
        std::sort(labels.begin(), labels.end(), label_less);
        return labels;
    };
    NoiseSpec noise;
    noise.futures_labels = sorted(eps);
    noise.yield_labels = sorted(psi);
    noise.sigma_eps.resize(static_cast<int>(noise.futures_labels.size()));
    noise.sigma_psi.resize(static_cast<int>(noise.yield_labels.size()));
    for (std::size_t i = 0; i < noise.futures_labels.size(); ++i)
        noise.sigma_eps(static_cast<int>(i)) = eps.at(noise.futures_labels[i]);
    for (std::size_t i = 0; i < noise.yield_labels.size(); ++i)
        noise.sigma_psi(static_cast<int>(i)) = psi.at(noise.yield_labels[i]);
    ParamSet out(id, std::move(values), std::move(noise));
    validate(out);
    return out;
}

}  // namespace ctsm
