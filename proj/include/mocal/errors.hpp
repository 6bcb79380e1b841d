#pragma once

#include <stdexcept>
#include <string>

namespace mocal {

/// Base class of all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data errors
struct EmptyCloud : Error { using Error::Error; };
struct InfeasibleShape : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct TooSmall : Error { using Error::Error; };
struct OutOfBounds : Error { using Error::Error; };
struct EmptySupport : Error { using Error::Error; };

// Calibration pipeline errors
struct NoMotion : Error { using Error::Error; };
struct SyncViolation : Error { using Error::Error; };
struct NonFiniteObjective : Error { using Error::Error; };
struct StaticScene : Error { using Error::Error; };

// File format errors
struct MalformedFile : Error { using Error::Error; };
struct MissingKey : Error { using Error::Error; };
struct NonOrthonormal : Error { using Error::Error; };
struct UnsupportedFormat : Error { using Error::Error; };

}  // namespace mocal
