"""Phase-setting measurements, correlations and the CHSH functional.

A setting ``theta`` on a side is the relative phase between that path's two
modes.  The analyzer projects onto ``(|0> +/- e^{i theta}|1>)/sqrt2``; the
observable is the difference of the two projectors.

Two sign patterns are supported for the S functional:

* ``"appendix"`` (default): ``E11 + E12 - E21 + E22``
* ``"main_text"``: ``E11 - E12 + E21 + E22``

and two setting conventions:

* ``"phase"`` (default): settings are phase shifts, ``E = cos(theta + phi)``
  on the Bell analog;
* ``"angle"``: polarizer angles, ``E = cos(theta_a - theta_b)``, obtained
  from the phase convention by ``phi -> -phi`` on side ``b``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .algebra import CompositeState, Operator, Support, expectation
from .circuit import ProductStateParams
from .errors import DegenerateQuad

TWO_PI = 2 * math.pi
CLASSICAL_BOUND = 2.0
TSIRELSON = 2 * math.sqrt(2)
VIOLATION_EPS = 1e-9
QUAD_CLAMP = 1e-12
DEGENERATE_SUM = 1e-12
TIE_TOL = 1e-12
REFINE_TOL = 1e-6
REFINE_MAX_SWEEPS = 200
# Intensities are reported in units of one output beam: the two beams carry
# one unit each, so the four joint intensities of a normalized state sum to 2.
INTENSITY_UNITS = 2.0

SIGN_PATTERNS = {
    "appendix": (1, 1, -1, 1),
    "main_text": (1, -1, 1, 1),
}
_SIDES = {"a": Support.PATH_A, "b": Support.PATH_B}
_OUTCOMES = {"plus": 1, 0: 1, "minus": -1, math.pi: -1}


@dataclass(frozen=True)
class MeasurementSetting:
    theta: float
    phi: float


@dataclass(frozen=True)
class IntensityQuad:
    i00: float
    i_pipi: float
    i_pi0: float
    i0pi: float

    def __post_init__(self):
        for name in ("i00", "i_pipi", "i_pi0", "i0pi"):
            value = getattr(self, name)
            if value < -QUAD_CLAMP:
                raise ValueError(f"{name} = {value:.3g} is negative")
            object.__setattr__(self, name, max(float(value), 0.0))

    @property
    def total(self) -> float:
        return self.i00 + self.i_pipi + self.i_pi0 + self.i0pi


@dataclass(frozen=True)
class ChshResult:
    settings: tuple[float, float, float, float]
    correlations: tuple[float, float, float, float]
    s_value: float
    violates_bound: bool
    sign_pattern: str = "appendix"
    convention: str = "phase"


def _local_projector(theta: float, sign: int) -> np.ndarray:
    e = np.exp(1j * theta)
    return 0.5 * np.array([[1, sign * np.conj(e)], [sign * e, 1]])


def _local_observable(theta: float) -> np.ndarray:
    e = np.exp(1j * theta)
    return np.array([[0, np.conj(e)], [e, 0]])


def sigma_projector(theta: float, outcome="plus", side: str = "a") -> Operator:
    """Projector for the ``outcome`` port (``"plus"``/0 or ``"minus"``/pi) on one side."""
    try:
        sign = _OUTCOMES[outcome]
    except KeyError:
        raise ValueError(f"outcome must be 'plus' or 'minus', got {outcome!r}") from None
    return Operator(_local_projector(theta, sign), _SIDES[side])


def sigma_observable(theta: float, side: str = "a") -> Operator:
    return Operator(_local_observable(theta), _SIDES[side])


def _to_phase(m: MeasurementSetting, convention: str) -> MeasurementSetting:
    if convention == "phase":
        return m
    if convention == "angle":
        return MeasurementSetting(m.theta, -m.phi)
    raise ValueError(f"unknown setting convention {convention!r}")


def correlation(state: CompositeState, m: MeasurementSetting,
                convention: str = "phase") -> float:
    m = _to_phase(m, convention)
    op = sigma_observable(m.theta, "a") @ sigma_observable(m.phi, "b")
    return expectation(state, op)


def intensity_quad(state: CompositeState, m: MeasurementSetting,
                   convention: str = "phase") -> IntensityQuad:
    """Joint intensities at the four analyzer port pairs.

    ``i00`` is (plus, plus), ``i_pipi`` (minus, minus), ``i_pi0``
    (minus on a, plus on b) and ``i0pi`` (plus on a, minus on b).
    """
    m = _to_phase(m, convention)

    def joint(out_a, out_b):
        op = sigma_projector(m.theta, out_a, "a") @ sigma_projector(m.phi, out_b, "b")
        return INTENSITY_UNITS * expectation(state, op)

    return IntensityQuad(
        i00=joint("plus", "plus"),
        i_pipi=joint("minus", "minus"),
        i_pi0=joint("minus", "plus"),
        i0pi=joint("plus", "minus"),
    )


def correlation_from_intensities(q: IntensityQuad) -> float:
    total = q.total
    if total <= DEGENERATE_SUM:
        raise DegenerateQuad(f"intensity sum {total:.3g} is too small")
    return (q.i00 + q.i_pipi - q.i_pi0 - q.i0pi) / total


def product_state_correlation_closed_form(p: ProductStateParams,
                                          m: MeasurementSetting) -> float:
    e_a = math.sin(2 * p.alpha) * math.cos(p.beta - m.theta)
    e_b = math.sin(2 * p.gamma) * math.cos(p.delta - m.phi)
    return e_a * e_b


def _combine(correlations: Sequence[float], sign_pattern: str) -> float:
    try:
        signs = SIGN_PATTERNS[sign_pattern]
    except KeyError:
        raise ValueError(f"unknown sign pattern {sign_pattern!r}") from None
    return sum(s * e for s, e in zip(signs, correlations))


def chsh_s(state: CompositeState, settings: Sequence[float],
           sign_pattern: str = "appendix", convention: str = "phase") -> ChshResult:
    """S for ``settings = (theta1, phi1, theta2, phi2)``.

    Correlations are ordered ``E(t1,p1), E(t1,p2), E(t2,p1), E(t2,p2)``.
    """
    t1, p1, t2, p2 = (float(x) for x in settings)
    pairs = ((t1, p1), (t1, p2), (t2, p1), (t2, p2))
    corr = tuple(correlation(state, MeasurementSetting(t, p), convention) for t, p in pairs)
    s = _combine(corr, sign_pattern)
    return ChshResult((t1, p1, t2, p2), corr, s, abs(s) > CLASSICAL_BOUND + VIOLATION_EPS,
                      sign_pattern, convention)


def _expansion_coefficients(state: CompositeState) -> tuple[complex, complex]:
    # <psi| sigma_a(t) (x) sigma_b(p) |psi>
    #   = 2 Re[conj(M00) M11 e^{-i(t+p)}] + 2 Re[conj(M01) M10 e^{-i(t-p)}]
    m = state.matrix
    return 2 * np.conj(m[0, 0]) * m[1, 1], 2 * np.conj(m[0, 1]) * m[1, 0]


def correlation_lattice(state: CompositeState, thetas: np.ndarray,
                        phis: np.ndarray) -> np.ndarray:
    """``E[i, j] = E(thetas[i], phis[j])`` (phase convention) in one batch."""
    c_sum, c_diff = _expansion_coefficients(state)
    t = np.asarray(thetas, dtype=float)[:, None]
    p = np.asarray(phis, dtype=float)[None, :]
    return (c_sum * np.exp(-1j * (t + p))).real + (c_diff * np.exp(-1j * (t - p))).real


def _fast_correlation(state: CompositeState) -> Callable[[float, float], float]:
    c_sum, c_diff = _expansion_coefficients(state)

    def corr(t: float, p: float) -> float:
        return float((c_sum * np.exp(-1j * (t + p))).real
                     + (c_diff * np.exp(-1j * (t - p))).real)

    return corr


def _refine(corr: Callable[[float, float], float], start: Sequence[float],
            step: float, sign_pattern: str, target_sign: float) -> tuple[np.ndarray, float]:
    """Cyclic coordinate ascent on ``target_sign * S`` with bounded 1-D searches."""
    x = np.array(start, dtype=float)

    def s_of(v):
        t1, p1, t2, p2 = v
        return target_sign * _combine(
            (corr(t1, p1), corr(t1, p2), corr(t2, p1), corr(t2, p2)), sign_pattern)

    best = s_of(x)
    for _ in range(REFINE_MAX_SWEEPS):
        moved = 0.0
        for k in range(4):
            def neg(val, k=k):
                y = x.copy()
                y[k] = val
                return -s_of(y)

            res = minimize_scalar(neg, bounds=(x[k] - step, x[k] + step), method="bounded",
                                  options={"xatol": REFINE_TOL * 1e-2})
            # Equal-value moves let flat coordinates drift off degenerate grid
            # points; only strict gains count toward convergence.
            if -res.fun >= best:
                if -res.fun > best:
                    moved = max(moved, abs(res.x - x[k]))
                x[k] = res.x
                best = -res.fun
        if moved < REFINE_TOL:
            break
    return x, best


def _grid_s(lattice: np.ndarray, sign_pattern: str, rows=slice(None)) -> np.ndarray:
    """S over grid index tuples ``(i1, j1, i2, j2)`` with ``i1`` restricted to ``rows``."""
    s1, s2, s3, s4 = SIGN_PATTERNS[sign_pattern]
    e1 = lattice[rows]
    return (s1 * e1[:, :, None, None] + s2 * e1[:, None, None, :]
            + s3 * lattice.T[None, :, :, None] + s4 * lattice[None, None, :, :])


def _best_index(abs_s: np.ndarray) -> tuple[int, ...]:
    # C-order flat index of the first cell within TIE_TOL of the max is the
    # lexicographically smallest setting tuple.
    top = abs_s.max()
    flat = int(np.flatnonzero(abs_s >= top - TIE_TOL)[0])
    return np.unravel_index(flat, abs_s.shape)


@dataclass(frozen=True)
class SearchResult:
    best: ChshResult
    grid_max: float
    grid_settings: tuple[float, float, float, float]


def search_s(state: CompositeState, grid_points_per_angle: int = 16,
             sign_pattern: str = "appendix", workers: int = 1) -> SearchResult:
    """Grid search of ``|S|`` over ``[0, 2pi)^4`` followed by coordinate refinement.

    With ``workers > 1`` the grid is split over ``theta1`` blocks; the
    reduction is independent of the split.
    """
    n = int(grid_points_per_angle)
    if n < 4:
        raise ValueError("grid_points_per_angle must be at least 4")
    angles = TWO_PI * np.arange(n) / n
    lattice = correlation_lattice(state, angles, angles)

    if workers > 1:
        blocks = np.array_split(np.arange(n), workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(lambda rows: np.abs(_grid_s(lattice, sign_pattern, rows)), blocks)
            abs_s = np.concatenate(list(parts), axis=0)
    else:
        abs_s = np.abs(_grid_s(lattice, sign_pattern))

    i1, j1, i2, j2 = _best_index(abs_s)
    start = (angles[i1], angles[j1], angles[i2], angles[j2])
    grid_s = _grid_s(lattice, sign_pattern, [i1])[0, j1, i2, j2]
    sign = 1.0 if grid_s >= 0 else -1.0

    x, _ = _refine(_fast_correlation(state), start, TWO_PI / n, sign_pattern, sign)
    x = np.mod(x, TWO_PI)
    refined = chsh_s(state, x, sign_pattern)
    if abs(refined.s_value) < abs(grid_s):
        refined = chsh_s(state, start, sign_pattern)
    return SearchResult(refined, float(abs(grid_s)), tuple(float(a) for a in start))


def maximize_s(state: CompositeState, grid_points_per_angle: int = 16,
               sign_pattern: str = "appendix", workers: int = 1) -> ChshResult:
    """Setting tuple maximizing ``|S|`` (grid search plus local refinement)."""
    return search_s(state, grid_points_per_angle, sign_pattern, workers).best


def max_abs_s(state: CompositeState, grid_points_per_angle: int = 16,
              sign_pattern: str = "appendix") -> float:
    return abs(maximize_s(state, grid_points_per_angle, sign_pattern).s_value)
