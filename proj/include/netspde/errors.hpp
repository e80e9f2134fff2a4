#pragma once

#include <stdexcept>
#include <string>

namespace netspde {

/// Base of all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// graph
struct InvalidVertexIndex : Error { using Error::Error; };
struct SelfLoopEdge : Error { using Error::Error; };
struct DisconnectedGraph : Error { using Error::Error; };
struct EmptyEdgeList : Error { using Error::Error; };

// spatial
struct NonPositiveCoefficient : Error { using Error::Error; };
struct TraceMismatch : Error { using Error::Error; };

// delay
struct HorizonMismatch : Error { using Error::Error; };
struct StepNotMultipleOfDelayGrid : Error { using Error::Error; };
struct NonPositiveT0 : Error { using Error::Error; };

// semigroup
struct NonFiniteEntries : Error { using Error::Error; };
struct EigenFailure : Error { using Error::Error; };

// sde
struct ShapeMismatch : Error { using Error::Error; };
struct BlowupDetected : Error { using Error::Error; };

// control
struct EmptyControlDomain : Error { using Error::Error; };

// cli / config
struct ConfigParseError : Error { using Error::Error; };
struct ValidationError : Error { using Error::Error; };
struct ComputeError : Error { using Error::Error; };

}  // namespace netspde
