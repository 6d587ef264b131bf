#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "wlecv/core.hpp"

namespace wlecv {

/// Default master seed when neither --seed nor WLECV_SEED is given.
inline constexpr std::uint64_t kDefaultSeed = 42;

/// Closed-form weights for linear families (matrix form for m > 2), the
/// golden-section weight for two aligned lognormal samples, and the
/// numerical minimizer otherwise.
WeightVector select_weights(const MultiSample& ms, const ModelSpec& model, DeletionScheme scheme,
                            std::optional<double> delta);

/// Runs one command line (without the program name). Exit codes: 0 success,
/// 2 usage error, 3 data error, 4 numerical degeneracy.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace wlecv
