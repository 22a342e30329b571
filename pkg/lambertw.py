from __future__ import annotations

"""Principal branch W0 of the Lambert W function.

W0(x) is the real solution w >= -1 of w * exp(w) = x for x >= -1/e. It is needed to invert
the offload-rate stationarity condition. Evaluation: a starting point from a branch-point
series (near -1/e), an asymptotic form (large x) or log1p (elsewhere), then Halley steps.
"""

from dataclasses import dataclass
import math

from mec_utils import DomainError


INV_E = math.exp(-1.0)
MAX_ITER = 50
CLAMP_TOL = 1e-12


@dataclass(frozen=True)
class W0Result:
    value: float
    iterations: int
    residual: float


def _initial_guess(x: float) -> float:
    if x < -0.25:
        p = math.sqrt(max(0.0, 2.0 * (math.e * x + 1.0)))
        return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3
    if x > 3.0:
        l1 = math.log(x)
        l2 = math.log(l1)
        return l1 - l2 + l2 / l1
    return math.log1p(x)


def _relative_residual(w: float, x: float) -> float:
    return abs(w * math.exp(w) - x) / max(1.0, abs(x))


def lambert_w0(x: float) -> W0Result:
    x = float(x)
    if math.isnan(x):
        raise DomainError("lambert_w0 of NaN")
    if x < -INV_E:
        if x < -INV_E - CLAMP_TOL:
            raise DomainError(f"lambert_w0 undefined for x={x!r} < -1/e")
        x = -INV_E
    if x == -INV_E:
        return W0Result(value=-1.0, iterations=0, residual=_relative_residual(-1.0, x))
    if x == 0.0:
        return W0Result(value=0.0, iterations=0, residual=0.0)
    if math.isinf(x):
        return W0Result(value=math.inf, iterations=0, residual=0.0)

    w = _initial_guess(x)
    it = 0
    for it in range(1, MAX_ITER + 1):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if f == 0.0 or wp1 <= 0.0:
            break
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        if denom == 0.0:
            break
        step = f / denom
        w = max(-1.0, w - step)
        if abs(step) <= 4e-16 * (1.0 + abs(w)):
            break

    return W0Result(value=w, iterations=it, residual=_relative_residual(w, x))
