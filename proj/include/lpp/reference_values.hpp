#pragma once

// Published values at s = 0.8, r = 0.4, sqrt q = 0.5, N = 5.

#include <array>

namespace lpp::published {

inline constexpr std::array<double, 11> kPsiN5 = {
    8.360566982592577e-04, 0.008001718755237, 0.036091649689770, 0.109783132398338,
    0.255788772227839,     0.496704192344632, 0.845600964274872, 1.304995854772828,
    1.868854964827310,     2.525613136190934, 3.261146168402837};

inline constexpr std::array<double, 11> kCdfN5 = {
    0.001672113396519, 0.013495267415696, 0.049014199812088, 0.119293034482603,
    0.218319796950434, 0.335825200404085, 0.456878123743687, 0.569893009065672,
    0.668323329611008, 0.749657232672766, 0.814307893060182};

// Empirical CDF from 20 runs of 500000 samples each.
inline constexpr std::array<double, 11> kMcCdfN5 = {
    0.0016726, 0.0134631, 0.0495106, 0.1186529, 0.2181491, 0.3356810,
    0.4566831, 0.5699657, 0.6684062, 0.7496881, 0.8142741};
inline constexpr long kMcSamplesN5 = 20L * 500000L;

// P(G^stat(3, 3) = 0) at s = 0.6, r = 0.8, sqrt q = 0.4.
inline constexpr double kPointMassN3 = 0.0896;

}  // namespace lpp::published
