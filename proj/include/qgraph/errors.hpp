#pragma once

#include <stdexcept>
#include <string>

namespace qgraph {

/// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// graph construction / cutting
struct ZeroOrNegativeLength : Error { using Error::Error; };
struct DanglingEndpoint : Error { using Error::Error; };
struct Disconnected : Error { using Error::Error; };
struct CutPointOffGraph : Error { using Error::Error; };
struct DuplicateCut : Error { using Error::Error; };

// spectral solver
struct ConvergenceFailure : Error { using Error::Error; };
struct ScanExhausted : Error { using Error::Error; };
struct RankMismatch : Error { using Error::Error; };

// morse analysis
struct NotMorse : Error { using Error::Error; };
struct NotEquipartition : Error { using Error::Error; };
struct ZeroAtInterface : Error { using Error::Error; };
struct NotGenericMinimizer : Error { using Error::Error; };

// partition optimizer
struct EmptyBoundary : Error { using Error::Error; };
struct BudgetExceeded : Error { using Error::Error; };
struct InfeasibleK : Error { using Error::Error; };

// input parsing
struct ParseError : Error { using Error::Error; };

} // namespace qgraph
