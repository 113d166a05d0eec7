#pragma once

#include <stdexcept>
#include <string>

namespace reid {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// linalg
struct ShapeMismatch : Error { using Error::Error; };
struct ZeroNormError : Error { using Error::Error; };

// distance / batches
struct EmptyBatch : Error { using Error::Error; };

// sampling
struct InsufficientIdentities : Error { using Error::Error; };
struct InsufficientSamplesPerIdentity : Error { using Error::Error; };
struct KTooSmall : Error { using Error::Error; };
struct NeedThreeIdentities : Error { using Error::Error; };

// losses
struct EmptyTupleList : Error { using Error::Error; };
struct IdentityWithoutPositive : Error { using Error::Error; };
struct SingleIdentityBatch : Error { using Error::Error; };
struct LabelOutOfRange : Error { using Error::Error; };

// model / training
struct CacheMismatch : Error { using Error::Error; };
struct NonFiniteLoss : Error { using Error::Error; };

// eval
struct QueryWithoutMatch : Error { using Error::Error; };
struct EmptyGalleryAfterExclusion : Error { using Error::Error; };
struct NoPositivePairs : Error { using Error::Error; };

// data-io
struct ParseError : Error { using Error::Error; };
struct NonFiniteFeature : Error { using Error::Error; };
struct InconsistentDimension : Error { using Error::Error; };

}  // namespace reid
