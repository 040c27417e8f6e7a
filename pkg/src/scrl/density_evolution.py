"""Uncoupled and spatially-coupled density evolution, and threshold bisection."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import _fast
from .dd_core import CodeParams, DegreeSystem, Flavor, clamp_unit, de_maps

log = logging.getLogger(__name__)

# tolerance on the per-iteration increase allowed before a trajectory is
# declared non-monotone
MONOTONE_SLACK = 1e-12


class MonotonicityViolation(RuntimeError):
    pass


@dataclass(frozen=True)
class DERunConfig:
    tol: float = 1e-10
    max_iter: int = 100_000
    zero_tol: float = 1e-8

    def __post_init__(self):
        if not 0 < self.tol < 1:
            raise ValueError("tol must lie in (0, 1)")
        if not self.zero_tol > 0:
            raise ValueError("zero_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


COUPLED_DEFAULT = DERunConfig(max_iter=1_000_000)


@dataclass
class CoupledState:
    """Coupled DE state.

    ``x`` has shape ``(L + 2(w-1), 2)``; row ``r`` holds position ``r - (w-1)``,
    so positions run over ``[-(w-1), L+w-2]`` and the channel is active on
    ``[0, L-1]`` only.
    """

    x: np.ndarray
    L: int
    w: int

    def __post_init__(self):
        if self.L < 1 or self.w < 1:
            raise ValueError("L and w must be >= 1")
        if self.x.shape != (self.L + 2 * (self.w - 1), 2):
            raise ValueError(f"state shape {self.x.shape} does not match L={self.L}, w={self.w}")

    @classmethod
    def ones(cls, L: int, w: int) -> "CoupledState":
        return cls(np.ones((L + 2 * (w - 1), 2)), L, w)

    @property
    def positions(self) -> np.ndarray:
        return np.arange(-(self.w - 1), self.L + self.w - 1)

    def channel(self, eps: float) -> np.ndarray:
        e = np.zeros(len(self.x))
        e[self.w - 1 : self.w - 1 + self.L] = eps
        return e

    def interior(self) -> np.ndarray:
        return self.x[self.w - 1 : self.w - 1 + self.L]


@dataclass
class DEOutcome:
    converged_to_zero: bool
    final_state: np.ndarray
    iterations: int
    residual: float
    stalled: bool = False


def de_step(sys: DegreeSystem, x, eps: float) -> np.ndarray:
    f, g = de_maps(sys)
    return f(g(x, eps), eps)


def de_step_dual_closed(params: CodeParams, x, eps) -> np.ndarray:
    """One dual-code DE iteration written out explicitly."""
    x = clamp_unit(x)
    eps = clamp_unit(eps, "eps")
    dl, dr, dg = params.d_r, params.d_l, params.d_g
    x1, x2 = x[..., 0], x[..., 1]
    lam = np.exp(-params.beta * x2)
    x1n = (1 - (1 - x1) ** (dr - 1) * lam) ** (dl - 1)
    x2n = eps * (1 - (1 - x1) ** dr * lam) ** (dg - 1)
    return clamp_unit(np.stack(np.broadcast_arrays(x1n, x2n), axis=-1))


def de_step_primal_closed(params: CodeParams, x, eps) -> np.ndarray:
    x = clamp_unit(x)
    eps = clamp_unit(eps, "eps")
    dl, dr, dg = params.d_l, params.d_r, params.d_g
    x1, x2 = x[..., 0], x[..., 1]
    y1 = 1 - (1 - x1) ** (dr - 1)
    lam = np.exp(-params.beta * (1 - eps) * (1 - x2) ** (dg - 1))
    x1n = y1 ** (dl - 1) * lam
    x2n = y1**dl * lam
    return clamp_unit(np.stack(np.broadcast_arrays(x1n, x2n), axis=-1))


def _iterate(step, x0: np.ndarray, cfg: DERunConfig) -> DEOutcome:
    x = x0
    peak = float(np.max(x))
    stalled = True
    it = 0
    while it < cfg.max_iter:
        nxt = step(x)
        it += 1
        if np.any(nxt > x + MONOTONE_SLACK):
            raise MonotonicityViolation(
                f"DE trajectory increased at iteration {it}: max rise {np.max(nxt - x):.3e}"
            )
        delta = float(np.max(np.abs(nxt - x)))
        x = nxt
        peak = float(np.max(x))
        if peak < cfg.zero_tol or delta < cfg.tol:
            stalled = False
            break
    ok = peak < cfg.zero_tol
    if stalled and not ok:
        log.warning("DE hit max_iter=%d with residual %.3e", cfg.max_iter, peak)
    return DEOutcome(ok, x, it, peak, stalled=stalled and not ok)


def de_run(sys: DegreeSystem, eps: float, cfg: DERunConfig = DERunConfig()) -> DEOutcome:
    """Iterate the uncoupled recursion from the all-ones state."""
    f, g = de_maps(sys)
    return _iterate(lambda x: f(g(x, eps), eps), np.ones(2), cfg)


def _bisect(succeeds, lo: float, hi: float, tol: float) -> float:
    if not succeeds(lo):
        return lo
    if succeeds(hi):
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if succeeds(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def threshold_bracket(params: CodeParams) -> tuple[float, float]:
    return 0.0, min(1.0, params.eps_shannon + 0.05)


def de_threshold(sys: DegreeSystem, cfg: DERunConfig = DERunConfig(), tol: float = 1e-6) -> float:
    """Largest eps for which uncoupled DE from all-ones reaches zero.

    Returns the lower bracket end (0) when DE fails everywhere, which is the
    case for both families here: all-ones is a fixed point of f o g for every eps.
    """
    lo, hi = threshold_bracket(sys.params)
    return _bisect(lambda e: de_run(sys, e, cfg).converged_to_zero, lo, hi, tol)


def _window_mean(a: np.ndarray, w: int) -> np.ndarray:
    """out[m] = mean(a[m : m + w]) along axis 0, ``len(a) - w + 1`` rows."""
    n = len(a) - w + 1
    # direct shifted sums (w is small); exact for w = 1, unlike a cumsum difference
    acc = a[:n].copy()
    for j in range(1, w):
        acc += a[j : j + n]
    return acc / w


def _coupled_update(f, g, x: np.ndarray, eps_pos: np.ndarray, w: int) -> np.ndarray:
    # pad so every read at index i + j - k, j, k in [0, w-1], is in range;
    # reads beyond the state extent are zero
    n = len(x)
    zpad = np.zeros((w - 1, 2))
    xp = np.vstack([zpad, x, zpad])
    ep = np.concatenate([np.zeros(w - 1), eps_pos, np.zeros(w - 1)])
    gv = g(xp, ep)  # factor-side messages at padded rows 0..n+2w-3
    # bit position m (padded index) averages g over [m, m + w - 1]
    ybar = _window_mean(gv, w)  # rows 0..n+w-2, padded index m
    fv = f(ybar, ep[: len(ybar)])
    # x_i averages f over bit positions [i - w + 1, i]; padded index of i is i + w - 1
    return _window_mean(fv, w)[:n]


def coupled_step(sys: DegreeSystem, state: CoupledState, eps: float) -> CoupledState:
    """One Jacobi-style update of every tracked position."""
    f, g = de_maps(sys)
    x = _coupled_update(f, g, state.x, state.channel(eps), state.w)
    return CoupledState(clamp_unit(x), state.L, state.w)


def coupled_run(sys: DegreeSystem, eps: float, L: int, w: int,
                cfg: DERunConfig = COUPLED_DEFAULT, fast: bool = True) -> DEOutcome:
    """Iterate the coupled recursion from all-ones at every tracked position.

    ``fast`` runs the compiled loop over the explicit f, g forms; otherwise
    each iteration goes through :func:`coupled_step`'s generic maps.
    """
    st = CoupledState.ones(L, w)
    eps_pos = st.channel(float(clamp_unit(eps, "eps")))
    if not fast:
        f, g = de_maps(sys)
        return _iterate(lambda x: clamp_unit(_coupled_update(f, g, x, eps_pos, w)), st.x, cfg)
    p = sys.params
    flavor = _fast.PRIMAL if sys.flavor is Flavor.PRIMAL else _fast.DUAL
    x, it, peak, early, monotone = _fast.coupled_iterate(
        flavor, p.d_l, p.d_r, p.d_g, p.beta, eps_pos, w, st.x,
        cfg.tol, cfg.zero_tol, cfg.max_iter, MONOTONE_SLACK,
    )
    if not monotone:
        raise MonotonicityViolation(f"coupled DE trajectory increased at iteration {it}")
    ok = peak < cfg.zero_tol
    if not early and not ok:
        log.warning("coupled DE hit max_iter=%d with residual %.3e", cfg.max_iter, peak)
    return DEOutcome(ok, x, int(it), float(peak), stalled=not early and not ok)


def coupled_threshold(sys: DegreeSystem, L: int, w: int,
                      cfg: DERunConfig = COUPLED_DEFAULT, tol: float = 1e-6) -> float:
    lo, hi = threshold_bracket(sys.params)
    return _bisect(lambda e: coupled_run(sys, e, L, w, cfg).converged_to_zero, lo, hi, tol)
