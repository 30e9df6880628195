#pragma once

#include <stdexcept>
#include <string>

namespace ctsm {

// Root of every domain error raised by the library. The CLI maps these to
// exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error { public: using Error::Error; };

// affine_core
class IndefiniteMatrix : public Error { public: using Error::Error; };
class SingularCovariance : public Error { public: using Error::Error; };

// model_zoo
class ConstraintViolation : public Error { public: using Error::Error; };
class PsdViolation : public Error { public: using Error::Error; };

// loadings
class OdeBlowup : public Error { public: using Error::Error; };
class OutOfGrid : public Error { public: using Error::Error; };

// kalman
class SingularInnovation : public Error { public: using Error::Error; };

// estimation
class DegenerateObjective : public Error { public: using Error::Error; };

// simulation
class FellerViolation : public Error { public: using Error::Error; };

// data_io
class ParseError : public Error { public: using Error::Error; };
class EmptyPanel : public Error { public: using Error::Error; };

// evaluation
class LengthMismatch : public Error { public: using Error::Error; };
class ZeroDenominator : public Error { public: using Error::Error; };

}  // namespace ctsm
