#include "klpriv/errors.hpp"

namespace klpriv {

RankDeficientError::RankDeficientError(std::size_t rank, std::size_t dim)
    : Error("matrix is rank deficient: rank " + std::to_string(rank) + " of " +
            std::to_string(dim)),
      rank_(rank),
      dim_(dim) {}

}  // namespace klpriv
