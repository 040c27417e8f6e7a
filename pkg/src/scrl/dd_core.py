"""Code parameters, degree distributions and the DE maps built from them.

A state is an array whose last axis has length 2: ``x[..., 0]`` is the
precode-edge erasure probability and ``x[..., 1]`` the channel-edge one.
Every function broadcasts over leading axes.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

CLAMP_TOL = 1e-12


class DegreeBoundsViolated(ValueError):
    pass


class RateOutOfRange(ValueError):
    pass


class DegenerateNormalizer(ZeroDivisionError):
    pass


class DomainError(ValueError):
    """Raised when a state or channel parameter leaves [0, 1] by more than the clamp tolerance."""


@dataclass(frozen=True)
class CodeParams:
    d_l: int
    d_r: int
    d_g: int
    beta: float

    def __post_init__(self):
        for name in ("d_l", "d_r", "d_g"):
            v = getattr(self, name)
            if int(v) != v:
                raise DegreeBoundsViolated(f"{name}={v} must be an integer")
        if self.d_l < 2:
            raise DegreeBoundsViolated(f"d_l={self.d_l} violates d_l >= 2")
        if self.d_r < 3:
            raise DegreeBoundsViolated(f"d_r={self.d_r} violates d_r >= 3")
        if self.d_g < 2:
            raise DegreeBoundsViolated(f"d_g={self.d_g} violates d_g >= 2")
        if self.d_r <= self.d_l:
            raise DegreeBoundsViolated(f"d_r={self.d_r} must exceed d_l={self.d_l}")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise RateOutOfRange(f"beta={self.beta} must be positive and finite")
        if not 0 < self.r_total < 1:
            raise RateOutOfRange(
                f"beta={self.beta} gives r_total={self.r_total:.6g}; "
                f"need beta > d_g*r_pre = {self.d_g * self.r_pre:.6g}"
            )

    @property
    def r_pre(self) -> float:
        return 1.0 - self.d_l / self.d_r

    @property
    def r_total(self) -> float:
        return self.d_g / self.beta * self.r_pre

    @property
    def eps_shannon(self) -> float:
        return 1.0 - self.r_total


def derive_params(d_l: int, d_r: int, d_g: int, beta: float) -> CodeParams:
    return CodeParams(int(d_l), int(d_r), int(d_g), float(beta))


def overhead(n: float, k: float, eps: float) -> float:
    """Relative excess of received information over ``k`` after ``n`` channel uses."""
    if k <= 0:
        raise ValueError("k must be positive")
    if not 0 <= eps < 1:
        raise ValueError("eps must lie in [0, 1)")
    return n / k * (1.0 - eps) - 1.0


def clamp_unit(x, what: str = "state") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x < -CLAMP_TOL) or np.any(x > 1 + CLAMP_TOL) or np.any(np.isnan(x)):
        raise DomainError(f"{what} outside [0, 1]: {x}")
    return np.clip(x, 0.0, 1.0)


class Flavor(enum.Enum):
    PRIMAL = "primal"
    DUAL = "dual"


# The two polynomial shapes that appear in the dd pair.  A "bit" polynomial is
# (d_g/beta) x1^a Lambda(x2); a "check" polynomial is c x1^a + eps x2^d_g with
# c = d_g d_l / (beta d_r).  Primal: nu = bit(d_l), mu = check(d_r).  The dual
# swaps them.


def _lam(p: CodeParams, x2):
    return np.exp(-p.beta * (1.0 - x2))


def _bit(p: CodeParams, a: int, x1, x2):
    return p.d_g / p.beta * x1**a * _lam(p, x2)


def _bit_partials(p: CodeParams, a: int, x1, x2):
    lam = _lam(p, x2)
    return p.d_g / p.beta * a * x1 ** (a - 1) * lam, p.d_g * x1**a * lam


def _check(p: CodeParams, a: int, x1, x2, eps):
    return p.d_g * p.d_l / (p.beta * p.d_r) * x1**a + eps * x2**p.d_g


def _check_partials(p: CodeParams, a: int, x1, x2, eps):
    c = p.d_g * p.d_l / (p.beta * p.d_r)
    return c * a * x1 ** (a - 1), eps * p.d_g * x2 ** (p.d_g - 1) + 0.0 * x1


@dataclass(frozen=True)
class DegreeSystem:
    flavor: Flavor
    params: CodeParams

    @classmethod
    def primal(cls, params: CodeParams) -> "DegreeSystem":
        return cls(Flavor.PRIMAL, params)

    @classmethod
    def dual(cls, params: CodeParams) -> "DegreeSystem":
        return cls(Flavor.DUAL, params)

    @property
    def degrees(self) -> tuple[int, int, int]:
        """(d_l, d_r, d_g) of this flavor; the dual swaps d_l and d_r."""
        p = self.params
        if self.flavor is Flavor.PRIMAL:
            return p.d_l, p.d_r, p.d_g
        return p.d_r, p.d_l, p.d_g

    def nu(self, x1, x2, eps):
        p = self.params
        if self.flavor is Flavor.PRIMAL:
            return _bit(p, p.d_l, x1, x2) + 0.0 * eps
        return _check(p, p.d_r, x1, x2, eps)

    def mu(self, x1, x2, eps):
        p = self.params
        if self.flavor is Flavor.PRIMAL:
            return _check(p, p.d_r, x1, x2, eps)
        return _bit(p, p.d_l, x1, x2) + 0.0 * eps

    def nu_partials(self, x1, x2, eps):
        p = self.params
        if self.flavor is Flavor.PRIMAL:
            return _bit_partials(p, p.d_l, x1, x2)
        return _check_partials(p, p.d_r, x1, x2, eps)

    def mu_partials(self, x1, x2, eps):
        p = self.params
        if self.flavor is Flavor.PRIMAL:
            return _check_partials(p, p.d_r, x1, x2, eps)
        return _bit_partials(p, p.d_l, x1, x2)


def eval_dd(sys: DegreeSystem, x, eps) -> tuple[np.ndarray, np.ndarray]:
    x = clamp_unit(x)
    eps = clamp_unit(eps, "eps")
    return sys.nu(x[..., 0], x[..., 1], eps), sys.mu(x[..., 0], x[..., 1], eps)


def eval_dd_partials(sys: DegreeSystem, x, eps):
    """Return ``(nu_1, nu_2, mu_1, mu_2)``, the partial derivatives in x1 and x2."""
    x = clamp_unit(x)
    eps = clamp_unit(eps, "eps")
    nu1, nu2 = sys.nu_partials(x[..., 0], x[..., 1], eps)
    mu1, mu2 = sys.mu_partials(x[..., 0], x[..., 1], eps)
    return nu1, nu2, mu1, mu2


def _normalizers(sys: DegreeSystem):
    nu1, nu2 = sys.nu_partials(1.0, 1.0, 1.0)
    mu1, mu2 = sys.mu_partials(1.0, 1.0, 1.0)
    norms = (float(nu1), float(nu2), float(mu1), float(mu2))
    if any(v == 0 for v in norms):
        raise DegenerateNormalizer(f"zero edge normalizer in {norms}")
    return norms


Map = Callable[..., np.ndarray]


def de_maps(sys: DegreeSystem) -> tuple[Map, Map]:
    """Build ``(f, g)`` for the system.

    ``g`` maps bit-to-factor erasure probabilities to factor-to-bit ones,
    ``f`` maps back.  One DE iteration is ``f(g(x, eps), eps)``.
    """
    nu1_1, nu2_1, mu1_1, mu2_1 = _normalizers(sys)

    def g(x, eps):
        x = clamp_unit(x)
        eps = clamp_unit(eps, "eps")
        m1, m2 = np.broadcast_arrays(
            *sys.mu_partials(1.0 - x[..., 0], 1.0 - x[..., 1], 1.0 - eps)
        )
        return clamp_unit(np.stack([1.0 - m1 / mu1_1, 1.0 - m2 / mu2_1], axis=-1))

    def f(y, eps):
        y = clamp_unit(y)
        eps = clamp_unit(eps, "eps")
        n1, n2 = np.broadcast_arrays(*sys.nu_partials(y[..., 0], y[..., 1], eps))
        return clamp_unit(np.stack([n1 / nu1_1, n2 / nu2_1], axis=-1))

    return f, g


def dualize(sys: DegreeSystem) -> DegreeSystem:
    flipped = Flavor.DUAL if sys.flavor is Flavor.PRIMAL else Flavor.PRIMAL
    return DegreeSystem(flipped, sys.params)


def dual_de_maps(sys: DegreeSystem) -> tuple[Map, Map]:
    """DE maps of the dual code expressed through the maps of ``sys``."""
    f, g = de_maps(sys)

    def f_dual(x, eps):
        x = clamp_unit(x)
        eps = clamp_unit(eps, "eps")
        return clamp_unit(1.0 - g(1.0 - x, 1.0 - eps))

    def g_dual(y, eps):
        y = clamp_unit(y)
        eps = clamp_unit(eps, "eps")
        return clamp_unit(1.0 - f(1.0 - y, 1.0 - eps))

    return f_dual, g_dual
