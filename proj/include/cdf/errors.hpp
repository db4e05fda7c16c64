#ifndef CDF_ERRORS_HPP
#define CDF_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace cdf {

/// Base class for all library errors. The CLI maps these to exit code 1
/// (runtime) or 2 (ConfigError).
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// data
struct MissingColumnError : Error { using Error::Error; };
struct NonNumericCellError : Error { using Error::Error; };
struct EmptyFileError : Error { using Error::Error; };
struct UnknownAttributeError : Error { using Error::Error; };
struct CutOutOfRangeError : Error { using Error::Error; };
struct InvalidRangeError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct SchemaMismatchError : Error { using Error::Error; };

// preprocess
struct ZeroWindowError : Error { using Error::Error; };
struct TooShortError : Error { using Error::Error; };
struct InsufficientDataError : Error { using Error::Error; };
struct DimensionMismatchError : Error { using Error::Error; };

// causal
struct SingularDesignError : Error { using Error::Error; };
struct InsufficientRowsError : Error { using Error::Error; };
struct MaskedInputError : Error { using Error::Error; };
struct DegenerateColumnError : Error { using Error::Error; };
struct TooFewSamplesError : Error { using Error::Error; };

// nn / model
struct MissingCacheError : Error { using Error::Error; };
struct EmptyTrainingSetError : Error { using Error::Error; };
struct EmptyGridError : Error { using Error::Error; };
struct PanelTooShortError : Error { using Error::Error; };
struct InsufficientHistoryError : Error { using Error::Error; };
struct MissingKnownFutureError : Error { using Error::Error; };

// similarity / coldstart
struct DegenerateCovarianceError : Error { using Error::Error; };
struct LengthMismatchError : Error { using Error::Error; };
struct NoEligibleDonorsError : Error { using Error::Error; };
struct StrategyPreconditionError : Error { using Error::Error; };
struct EmptyCandidatesError : Error { using Error::Error; };
struct EmptyDonorSetError : Error { using Error::Error; };

// synth
struct InvalidSpecError : Error { using Error::Error; };

// cli
struct ConfigError : Error { using Error::Error; };

} // namespace cdf

#endif // CDF_ERRORS_HPP
