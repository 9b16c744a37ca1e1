"""Independent derivative oracle: Richardson-extrapolated central differences.

Used to validate jet-propagated partials against a method that shares no
code with the jet arithmetic.  Mixed partials are tensor products of 1-d
central stencils (each of even-order accuracy, so the combined error is a
series in h^2), evaluated at a geometric ladder of step sizes and
Richardson-extrapolated.

Accuracy is limited by roundoff amplification ~eps/h^k for a k-th
derivative and by the h^6 extrapolation remainder; with the default step
and 3 levels the oracle is good to roughly 1e-9 relative for first/second
partials and 1e-6..1e-5 for third/fourth (worse when the function's
higher derivatives carry large constants, and shrinking the step trades
that truncation for amplified evaluation roundoff instead).  Values below
:func:`noise_floor` are invisible to the oracle entirely, so comparisons
should gate on it rather than trust a raw relative error.
"""

from __future__ import annotations

import itertools

__all__ = ["fd_partial", "noise_floor", "DEFAULT_BASE_H", "DEFAULT_LEVELS"]

DEFAULT_BASE_H = 0.04
DEFAULT_LEVELS = 3

# (offset, weight) pairs; weight already includes the stencil's rational
# factor, so the k-th derivative is sum(w * f(x + off*h)) / h^k.
_STENCILS = {
    1: ((-1, -0.5), (1, 0.5)),
    2: ((-1, 1.0), (0, -2.0), (1, 1.0)),
    3: ((-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)),
    4: ((-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)),
}


def fd_partial(fn, coords, orders, base_h: float = DEFAULT_BASE_H, levels: int = DEFAULT_LEVELS) -> float:
    """Mixed partial of ``fn`` at ``coords`` by finite differences.

    ``fn`` maps a list of floats to a float; ``orders`` gives the
    derivative order per variable (each <= 4, total unrestricted but
    accuracy beyond total order 4 is poor).  Steps scale with the
    magnitude of each coordinate.
    """
    coords = [float(v) for v in coords]
    active = [(i, k) for i, k in enumerate(orders) if k > 0]
    for _, k in active:
        if k not in _STENCILS:
            raise ValueError(f"no stencil for single-variable order {k}")
    if not active:
        return float(fn(coords))

    def resolved(h: float) -> float:
        acc = 0.0
        stencil_sets = [_STENCILS[k] for _, k in active]
        steps = [h * max(1.0, abs(coords[i])) for i, _ in active]
        for combo in itertools.product(*stencil_sets):
            point = list(coords)
            weight = 1.0
            for (i, k), (off, w), hi in zip(active, combo, steps):
                point[i] += off * hi
                weight *= w / hi**k
            acc += weight * fn(point)
        return acc

    if levels < 1:
        raise ValueError("levels must be >= 1")
    values = [resolved(base_h / 2.0**j) for j in range(levels)]
    for stage in range(1, levels):
        factor = 4.0**stage
        values = [(factor * values[j + 1] - values[j]) / (factor - 1.0) for j in range(len(values) - 1)]
    return values[0]


def noise_floor(
    f_scale: float,
    coords,
    orders,
    base_h: float = DEFAULT_BASE_H,
    levels: int = DEFAULT_LEVELS,
) -> float:
    """Roundoff bound for the matching :func:`fd_partial` call.

    Each function evaluation carries absolute error ~eps * f_scale; the
    stencil sums amplify it by prod(sum|w| / h_i^k_i), worst at the
    smallest ladder step, and the extrapolation stages multiply it by at
    most prod (4^s + 1)/(4^s - 1).  A comparison whose true value sits
    below this bound measures nothing but floating-point noise.
    """
    coords = [float(v) for v in coords]
    active = [(i, k) for i, k in enumerate(orders) if k > 0]
    if not active:
        return 2.3e-16 * abs(f_scale)
    h_min = base_h / 2.0 ** (levels - 1)
    amp = 1.0
    for i, k in active:
        hi = h_min * max(1.0, abs(coords[i]))
        amp *= sum(abs(w) for _, w in _STENCILS[k]) / hi**k
    for stage in range(1, levels):
        factor = 4.0**stage
        amp *= (factor + 1.0) / (factor - 1.0)
    return 2.3e-16 * abs(f_scale) * amp
