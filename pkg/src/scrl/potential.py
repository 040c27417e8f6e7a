"""Potential functions, non-trivial fixed-point curves, thresholds and energy gap."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .dd_core import (
    CodeParams,
    DegreeSystem,
    Flavor,
    clamp_unit,
    de_maps,
    dual_de_maps,
)


class CurveOutOfChannelRange(ValueError):
    pass


class BandViolation(ValueError):
    pass


class PointKind(enum.Enum):
    TRIVIAL_ZERO = "trivial-zero"
    TRIVIAL_ONE = "trivial-one"
    NON_TRIVIAL = "non-trivial"


@dataclass(frozen=True)
class FixedPointRecord:
    x1: float
    x2: float
    eps: float
    potential: float
    flavor: Flavor
    kind: PointKind
    in_channel_range: bool = True

    @property
    def state(self) -> np.ndarray:
        return np.array([self.x1, self.x2])


def potential_generic(sys: DegreeSystem, x, eps) -> np.ndarray:
    """Potential of the dd system, built only from nu, mu and their partials."""
    x = clamp_unit(x)
    eps = clamp_unit(eps, "eps")
    _, g = de_maps(sys)
    x1, x2 = x[..., 0], x[..., 1]
    y = g(x, eps)
    mu_full = sys.mu(1.0, 1.0, 1.0 - eps)
    mu_c = sys.mu(1.0 - x1, 1.0 - x2, 1.0 - eps)
    m1, m2 = sys.mu_partials(1.0 - x1, 1.0 - x2, 1.0 - eps)
    return mu_full - mu_c - sys.nu(y[..., 0], y[..., 1], eps) - x1 * m1 - x2 * m2


# Explicit forms.  The unchecked helpers accept any eps so curve scans can
# report points whose channel parameter leaves [0, 1].


def _u_dual(p: CodeParams, x1, x2, eps):
    dl, dr, dg, b = p.d_r, p.d_l, p.d_g, p.beta  # dual degrees
    lam = np.exp(-b * x2)
    c = (1 - x1) ** dr * lam
    y1 = 1 - (1 - x1) ** (dr - 1) * lam
    y2 = 1 - c
    return (
        dg / b
        - dg / b * c
        - (dg * dr / (b * dl) * y1**dl + eps * y2**dg)
        - (dg * dr / b * x1 * (1 - x1) ** (dr - 1) * lam + dg * c * x2)
    )


def _u_primal(p: CodeParams, x1, x2, eps):
    dl, dr, dg, b = p.d_l, p.d_r, p.d_g, p.beta
    k = dg * dl / (b * dr)
    y1 = 1 - (1 - x1) ** (dr - 1)
    lam = np.exp(-b * (1 - eps) * (1 - x2) ** (dg - 1))
    return (
        k + 1 - eps
        - (k * (1 - x1) ** dr + (1 - eps) * (1 - x2) ** dg)
        - dg / b * y1**dl * lam
        - (dg * dl / b * x1 * (1 - x1) ** (dr - 1) + dg * (1 - eps) * x2 * (1 - x2) ** (dg - 1))
    )


def potential_dual_closed(params: CodeParams, x, eps) -> np.ndarray:
    x = clamp_unit(x)
    eps = clamp_unit(eps, "eps")
    return _u_dual(params, x[..., 0], x[..., 1], eps)


def potential_primal_closed(params: CodeParams, x, eps) -> np.ndarray:
    x = clamp_unit(x)
    eps = clamp_unit(eps, "eps")
    return _u_primal(params, x[..., 0], x[..., 1], eps)


def potential(sys: DegreeSystem, x, eps):
    if sys.flavor is Flavor.PRIMAL:
        return potential_primal_closed(sys.params, x, eps)
    return potential_dual_closed(sys.params, x, eps)


# --- non-trivial fixed-point curves -------------------------------------


def primal_curve_arrays(params: CodeParams, x):
    """(x2, eps, U) along the primal curve; eps may leave [0, 1]."""
    x = np.asarray(x, dtype=float)
    dl, dr, dg, b = params.d_l, params.d_r, params.d_g, params.beta
    y1 = -np.expm1((dr - 1) * np.log1p(-x))  # 1 - (1-x)^(dr-1)
    x2 = x * y1
    eps = 1 + (np.log(x) - (dl - 1) * np.log(y1)) / (b * (1 - x2) ** (dg - 1))
    return x2, eps, _u_primal(params, x, x2, eps)


def dual_curve_arrays(params: CodeParams, x):
    x = np.asarray(x, dtype=float)
    dl, dr, dg, b = params.d_r, params.d_l, params.d_g, params.beta
    z = x ** (1.0 / (dl - 1))
    x2 = -(np.log1p(-z) - (dr - 1) * np.log1p(-x)) / b
    y2 = 1 - (1 - x) ** dr * np.exp(-b * x2)
    eps = x2 / y2 ** (dg - 1)
    return x2, eps, _u_dual(params, x, x2, eps)


def _curve_record(arrays, flavor, params, x, strict):
    if not 0 < x < 1:
        raise ValueError(f"curve parameter {x} outside (0, 1)")
    x2, eps, u = (float(v) for v in arrays(params, x))
    ok = 0.0 <= eps <= 1.0
    if strict and not ok:
        raise CurveOutOfChannelRange(f"eps({x}) = {eps} outside [0, 1]")
    return FixedPointRecord(float(x), x2, eps, u, flavor, PointKind.NON_TRIVIAL, ok)


def curve_primal(params: CodeParams, x: float, strict: bool = True) -> FixedPointRecord:
    """Non-trivial primal fixed point with first coordinate ``x``.

    With ``strict=False`` a point whose channel parameter falls outside
    [0, 1] is returned with ``in_channel_range=False`` instead of raising.
    """
    return _curve_record(primal_curve_arrays, Flavor.PRIMAL, params, x, strict)


def curve_dual(params: CodeParams, x: float, strict: bool = True) -> FixedPointRecord:
    return _curve_record(dual_curve_arrays, Flavor.DUAL, params, x, strict)


def curve_arrays(sys: DegreeSystem, x):
    if sys.flavor is Flavor.PRIMAL:
        return primal_curve_arrays(sys.params, x)
    return dual_curve_arrays(sys.params, x)


def trivial_one(sys: DegreeSystem, eps) -> np.ndarray:
    """The all-erased fixed point: (1, 1) for the primal, (1, eps) for the dual."""
    eps = np.asarray(eps, dtype=float)
    x2 = np.ones_like(eps) if sys.flavor is Flavor.PRIMAL else eps
    return np.stack(np.broadcast_arrays(np.ones_like(eps), x2), axis=-1)


# --- duality ---------------------------------------------------------------


def duality_check(params: CodeParams, x, eps):
    """Both sides of the primal/dual potential identity.

    Right side: U_dual(f_dual(1 - x; 1 - eps); 1 - eps) + mu(1; 1 - eps) - nu(1; eps).
    The two sides agree at DE fixed points (x, eps) of the primal system.
    """
    x = clamp_unit(x)
    eps = clamp_unit(eps, "eps")
    primal = DegreeSystem.primal(params)
    f_dual, _ = dual_de_maps(primal)
    lhs = potential_generic(primal, x, eps)
    x_dual = f_dual(1.0 - x, 1.0 - eps)
    rhs = (
        potential_generic(DegreeSystem.dual(params), x_dual, 1.0 - eps)
        + primal.mu(1.0, 1.0, 1.0 - eps)
        - primal.nu(1.0, 1.0, eps)
    )
    return lhs, rhs


def transport_to_dual(params: CodeParams, x, eps):
    """Image of a primal fixed point (x, eps) as a dual fixed point (x_dual, 1 - eps)."""
    f_dual, _ = dual_de_maps(DegreeSystem.primal(params))
    eps = clamp_unit(eps, "eps")
    return f_dual(1.0 - clamp_unit(x), 1.0 - eps), 1.0 - eps


def transport_to_primal(params: CodeParams, x_dual, eps_dual):
    """Image of a dual fixed point as a primal one: x = f(1 - x_dual; 1 - eps_dual)."""
    f, _ = de_maps(DegreeSystem.primal(params))
    eps_dual = clamp_unit(eps_dual, "eps")
    return f(1.0 - clamp_unit(x_dual), 1.0 - eps_dual), 1.0 - eps_dual


# --- thresholds ---------------------------------------------------------------


def _grid(step: float) -> np.ndarray:
    n = int(round(1.0 / step))
    return np.arange(1, n) / n


def _refine(fun, a: float, b: float, iters: int = 60) -> float:
    """Bisect for the point in [a, b] where fun changes from > 0 to <= 0."""
    fa = fun(a) > 0
    for _ in range(iters):
        m = 0.5 * (a + b)
        if (fun(m) > 0) == fa:
            a = m
        else:
            b = m
    return b


def _first_nonpositive_eps(param, eps_of, u_of):
    """Smallest eps on a sampled branch at which the potential is <= 0.

    ``param`` is the sorted branch parameter grid; ``eps_of``/``u_of`` evaluate
    the channel value and potential along the branch.  Sign changes of U
    between neighbouring valid samples are localised by bisection.
    """
    eps = eps_of(param)
    u = u_of(param)
    valid = (eps >= 0) & (eps <= 1) & np.isfinite(u)
    cands = list(eps[valid & (u <= 0)])
    idx = np.nonzero(valid[:-1] & valid[1:] & ((u[:-1] > 0) != (u[1:] > 0)))[0]
    for i in idx:
        a, b = param[i], param[i + 1]
        if u[i] > 0:
            t = _refine(lambda s: float(u_of(np.array([s]))[0]), a, b)
        else:
            t = _refine(lambda s: float(u_of(np.array([s]))[0]), b, a)
        e = float(eps_of(np.array([t]))[0])
        if 0 <= e <= 1:
            cands.append(e)
    return min(cands) if cands else None


def potential_threshold(sys: DegreeSystem, grid_step: float = 1e-4) -> float:
    """Largest channel parameter below which U is positive at every non-zero fixed point.

    The fixed-point set at eps is the trivial all-erased point plus the
    non-trivial curve points with eps(x) = eps, so the threshold is the
    smallest eps at which either branch reaches U <= 0.
    """
    if not 0 < grid_step <= 0.01:
        raise ValueError("grid_step must lie in (0, 0.01]")
    grid = _grid(grid_step)

    def curve_eps(x):
        return curve_arrays(sys, x)[1]

    def curve_u(x):
        return curve_arrays(sys, x)[2]

    def one_u(e):
        return potential(sys, trivial_one(sys, e), e)

    egrid = np.concatenate([[0.0], grid, [1.0]])
    found = [
        _first_nonpositive_eps(grid, curve_eps, curve_u),
        _first_nonpositive_eps(egrid, lambda e: e, one_u),
    ]
    found = [e for e in found if e is not None]
    return min(found) if found else 1.0


def shannon_gap_scan(params: CodeParams, grid_step: float = 1e-4):
    """Rows ``(x, x2, eps, U, gap, in_range)`` along the primal curve, sorted by x.

    ``gap = U - (eps_shannon - eps)``; positive gaps at every in-range point
    mean the potential threshold sits at the Shannon limit.
    """
    xs = _grid(grid_step)
    x2, eps, u = primal_curve_arrays(params, xs)
    gap = u - (params.eps_shannon - eps)
    ok = (eps >= 0) & (eps <= 1)
    return [
        (float(a), float(b), float(c), float(d), float(e), bool(f))
        for a, b, c, d, e, f in zip(xs, x2, eps, u, gap, ok)
    ]


def _inf_potential_by_eps(sys: DegreeSystem, eps_grid: np.ndarray, grid_step: float) -> np.ndarray:
    """inf of U over the non-zero fixed points at each eps in ``eps_grid``."""
    xs = _grid(grid_step)
    _, ce, cu = curve_arrays(sys, xs)
    out = np.asarray(potential(sys, trivial_one(sys, eps_grid), eps_grid), dtype=float).copy()
    e0, e1, u0, u1 = ce[:-1], ce[1:], cu[:-1], cu[1:]
    lo, hi = np.minimum(e0, e1), np.maximum(e0, e1)
    good = np.isfinite(e0) & np.isfinite(e1) & np.isfinite(u0) & np.isfinite(u1)
    lo, hi, e0, e1, u0, u1 = (a[good] for a in (lo, hi, e0, e1, u0, u1))
    for k, e in enumerate(eps_grid):
        hit = (lo <= e) & (e <= hi)
        if not np.any(hit):
            continue
        de = e1[hit] - e0[hit]
        t = np.where(de != 0, (e - e0[hit]) / np.where(de != 0, de, 1.0), 0.0)
        uu = u0[hit] + t * (u1[hit] - u0[hit])
        out[k] = min(out[k], float(np.min(uu)))
    return out


def energy_gap(sys: DegreeSystem, eps: float, grid_step: float = 1e-4,
               eps_threshold: float | None = None) -> float:
    """max over eps' in [eps, 1] of inf_{x in F(eps')} U(x; eps')."""
    star = potential_threshold(sys, grid_step) if eps_threshold is None else eps_threshold
    if eps >= star:
        raise BandViolation(f"eps={eps} is not below the potential threshold {star}")
    n = max(2, int(np.ceil((1.0 - eps) / grid_step)) + 1)
    eps_grid = np.linspace(eps, 1.0, n)
    return float(np.max(_inf_potential_by_eps(sys, eps_grid, grid_step)))
