// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "pseudoloc/common.hpp"

namespace pseudoloc::harness::detail {

/// 12 significant digits, "nan" for NaN.
std::string fmt(double v);
/// Runs fn(0..count-1) on a pool; each index writes only its own slot.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);
/// BUDGET for numeric/window failures, INVARIANT otherwise.
const char* status_of(const Error& e);

}  // namespace pseudoloc::harness::detail
