"""Independent reference computations used as test oracles.

These are written from the defining formulas with plain loops and closed forms,
never by calling the package's own helpers.
"""

from __future__ import annotations

import math
from fractions import Fraction

# Resistance per unit mass of the first tabulated vehicle at 20 m/s, evaluated by hand:
# drag 0.5 * 1.225 * 0.35 * 2.2 / 1500 * 20^2 = 0.12576666666666667
# rolling and grade 9.81 * (0.02 cos 30deg + sin 30deg) = 5.074914184222507
VEH1_RESISTANCE_AT_20 = -5.200680850889174


def tanh_series(x: float, terms: int = 12) -> float:
    """tanh from its odd Taylor series; accurate for |x| well below pi/2."""
    # tanh x = sum 2^{2k}(2^{2k}-1) B_{2k} x^{2k-1} / (2k)!
    bern = [Fraction(1, 6), Fraction(-1, 30), Fraction(1, 42), Fraction(-1, 30), Fraction(5, 66),
            Fraction(-691, 2730), Fraction(7, 6), Fraction(-3617, 510), Fraction(43867, 798),
            Fraction(-174611, 330), Fraction(854513, 138), Fraction(-236364091, 2730)]
    total = 0.0
    for k in range(1, min(terms, len(bern)) + 1):
        c = 2 ** (2 * k) * (2 ** (2 * k) - 1) * bern[k - 1] / math.factorial(2 * k)
        total += float(c) * x ** (2 * k - 1)
    return total


def sherman_morrison_inverse(b, eps):
    """(b b' + diag(eps))^{-1} via the rank-one update formula, as nested lists."""
    n = len(b)
    Dinv = [1.0 / e for e in eps]
    denom = 1.0 + sum(b[k] * b[k] * Dinv[k] for k in range(n))
    return [[(Dinv[r] if r == c else 0.0) - Dinv[r] * b[r] * b[c] * Dinv[c] / denom for c in range(n)]
            for r in range(n)]


def matvec(M, v):
    return [sum(M[r][c] * v[c] for c in range(len(v))) for r in range(len(M))]


def dot(a, b):
    return sum(x * y for x, y in zip(a, b))


def weighted_sum(eta, phi) -> float:
    total = 0.0
    for r in range(len(eta)):
        for c in range(len(eta[r])):
            total += eta[r][c] * phi[r][c]
    return total


def norm(v) -> float:
    return math.sqrt(sum(x * x for x in v))


def brute_force_schedule_ok(starts_ends, n0, tau_D: Fraction, T: Fraction, tick: Fraction, n_ticks: int,
                            offset: Fraction = Fraction(0), grid: int = 4) -> tuple[bool, bool]:
    """(frequency ok, energy ok) over every window with endpoints on a 1/grid-tick lattice.

    Counts onsets in [tau, t) and measures attacked time exactly with fractions.
    """
    freq_ok = energy_ok = True
    step = Fraction(1, grid)
    points = [k * step for k in range(n_ticks * grid + 1)]
    for i, a in enumerate(points):
        for b in points[i + 1:]:
            count = sum(1 for s, _ in starts_ends if a <= s < b)
            meas = sum(max(Fraction(0), min(Fraction(e), b) - max(Fraction(s), a)) for s, e in starts_ends)
            length = (b - a) * tick
            if count > n0 + length / tau_D:
                freq_ok = False
            if meas * tick > offset + length / T:
                energy_ok = False
            if not (freq_ok or energy_ok):
                return freq_ok, energy_ok
    return freq_ok, energy_ok
