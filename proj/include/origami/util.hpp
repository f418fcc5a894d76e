#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace origami {

// Nine significant digits, '.' decimal point, "nan"/"inf" spelled out.
std::string fmt9(double v);

// Joins already formatted cells with commas.
std::string csv_row(const std::vector<std::string>& cells);

// Stateless 64-bit mixer; used to derive independent stream seeds.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Calls fn(i) for i in [0, n) on up to `workers` threads. The first exception
// thrown by any call is rethrown after all threads join.
void parallel_for(std::int64_t n, int workers,
                  const std::function<void(std::int64_t)>& fn);

}  // namespace origami
