#pragma once

// Exact CDF of G(N, N) for independent geometric weights on the triangle
// j <= i <= N by a transfer recursion over the row profile.  Any partial value
// above d_max forces G(N, N) > d_max, so those states are dropped and every
// state fits in (d_max + 1)^N cells.  Independent of all Pfaffian code.

#include <cmath>
#include <functional>
#include <vector>

namespace lpp_test {

// x(i, j) is the Geom parameter of w_{ij}; returns P(G(N, N) <= d), d = 0..d_max.
inline std::vector<double> exact_lpp_cdf(int n, int d_max,
                                         const std::function<double(int, int)>& x) {
    const int base = d_max + 1;
    std::size_t nstates = 1;
    for (int i = 0; i < n; ++i) nstates *= base;
    std::vector<std::size_t> stride(n + 1, 1);
    for (int i = 2; i <= n; ++i) stride[i] = stride[i - 1] * base;
    auto digit = [&](std::size_t s, int i) { return static_cast<int>((s / stride[i]) % base); };

    std::vector<double> cur(nstates, 0.0), nxt(nstates, 0.0);
    cur[0] = 1.0;
    for (int j = 1; j <= n; ++j) {
        for (int i = j; i <= n; ++i) {
            const double xi = x(i, j);
            std::vector<double> pmf(base);
            for (int k = 0; k < base; ++k) pmf[k] = (1.0 - xi) * std::pow(xi, k);
            std::fill(nxt.begin(), nxt.end(), 0.0);
            for (std::size_t s = 0; s < nstates; ++s) {
                const double pr = cur[s];
                if (pr == 0.0) continue;
                int prev;
                if (j == 1) prev = (i == 1) ? 0 : digit(s, i - 1);
                else if (i == j) prev = digit(s, i);
                else prev = std::max(digit(s, i - 1), digit(s, i));
                std::size_t cleared = s - digit(s, i) * stride[i];
                // Column j - 1 is never read again; fold it to 0.
                if (i == j && j >= 2) cleared -= digit(s, j - 1) * stride[j - 1];
                for (int k = 0; prev + k <= d_max; ++k)
                    nxt[cleared + (prev + k) * stride[i]] += pr * pmf[k];
            }
            std::swap(cur, nxt);
        }
    }
    std::vector<double> cdf(d_max + 1, 0.0);
    for (std::size_t s = 0; s < nstates; ++s)
        if (cur[s] != 0.0) cdf[digit(s, n)] += cur[s];
    for (int d = 1; d <= d_max; ++d) cdf[d] += cdf[d - 1];
    return cdf;
}

// Exact CDF of a sum of independent Geom(x_k) variables.
inline std::vector<double> geom_sum_cdf(const std::vector<double>& xs, int d_max) {
    std::vector<double> pmf(d_max + 1, 0.0);
    pmf[0] = 1.0;
    for (double x : xs) {
        std::vector<double> out(d_max + 1, 0.0);
        for (int a = 0; a <= d_max; ++a)
            for (int b = 0; a + b <= d_max; ++b) out[a + b] += pmf[a] * (1.0 - x) * std::pow(x, b);
        pmf = out;
    }
    for (int d = 1; d <= d_max; ++d) pmf[d] += pmf[d - 1];
    return pmf;
}

}  // namespace lpp_test
