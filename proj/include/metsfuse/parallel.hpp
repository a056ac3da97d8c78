#pragma once

#include <cstddef>
#include <functional>

namespace metsfuse {

/// Runs fn(0..n-1) on up to `jobs` threads. Results must be written by index so the outcome
/// does not depend on scheduling. The first exception thrown by any task is rethrown after
/// all threads finish.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace metsfuse
