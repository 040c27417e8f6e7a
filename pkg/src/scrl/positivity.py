"""Exact polynomial checks behind the positivity lemmas.

Polynomials carry ``Fraction`` coefficients and Sturm chains are built
without floating point, so the reported sign patterns are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np


class ZeroPolynomial(ValueError):
    pass


class EndpointRoot(ValueError):
    pass


class BoundViolation(AssertionError):
    def __init__(self, name: str, z: float):
        super().__init__(f"{name} fails at z={z!r}")
        self.name = name
        self.z = z


def _sign(v) -> int:
    return (v > 0) - (v < 0)


@dataclass(frozen=True)
class IntPolynomial:
    """Univariate polynomial with exact rational coefficients, lowest degree first."""

    coeffs: tuple = field(default=(Fraction(0),))

    def __init__(self, coeffs: Sequence):
        c = [Fraction(v) for v in coeffs]
        while len(c) > 1 and c[-1] == 0:
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c or [Fraction(0)]))

    @property
    def degree(self) -> int:
        return -1 if self.is_zero() else len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return len(self.coeffs) == 1 and self.coeffs[0] == 0

    @property
    def lead(self) -> Fraction:
        return self.coeffs[-1]

    def __call__(self, z):
        if isinstance(z, (int, Fraction)):
            acc = Fraction(0)
            for c in reversed(self.coeffs):
                acc = acc * z + c
            return acc
        z = np.asarray(z, dtype=float)
        acc = np.zeros_like(z)
        for c in reversed(self.coeffs):
            acc = acc * z + float(c)
        return acc

    def __neg__(self):
        return IntPolynomial([-c for c in self.coeffs])

    def __sub__(self, other: "IntPolynomial"):
        n = max(len(self.coeffs), len(other.coeffs))
        a = list(self.coeffs) + [0] * (n - len(self.coeffs))
        b = list(other.coeffs) + [0] * (n - len(other.coeffs))
        return IntPolynomial([x - y for x, y in zip(a, b)])

    def scale(self, k) -> "IntPolynomial":
        return IntPolynomial([c * k for c in self.coeffs])

    def derivative(self) -> "IntPolynomial":
        return IntPolynomial([i * c for i, c in enumerate(self.coeffs)][1:] or [0])

    def divmod(self, other: "IntPolynomial"):
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        q = [Fraction(0)] * max(1, len(rem) - other.degree)
        while len(rem) - 1 >= other.degree and any(rem):
            shift = len(rem) - 1 - other.degree
            k = rem[-1] / other.lead
            q[shift] = k
            for i, c in enumerate(other.coeffs):
                rem[i + shift] -= k * c
            rem.pop()
            while len(rem) > 1 and rem[-1] == 0:
                rem.pop()
            if not rem:
                break
        return IntPolynomial(q), IntPolynomial(rem or [0])

    def content(self) -> Fraction:
        """Positive rational c with self / c having coprime integer coefficients."""
        nums = [c.numerator for c in self.coeffs if c]
        dens = [c.denominator for c in self.coeffs if c]
        if not nums:
            return Fraction(1)
        g = math.gcd(*nums)
        l = math.lcm(*dens)
        return Fraction(abs(g), l)

    def primitive(self) -> "IntPolynomial":
        return self.scale(1 / self.content())

    def __repr__(self):
        terms = [f"{c}*z^{i}" for i, c in enumerate(self.coeffs) if c]
        return "IntPolynomial(" + (" + ".join(terms) or "0") + ")"


PHI = IntPolynomial([3, 6, -14, 10, -4])
PSI = IntPolynomial([30, 0, 55, -72, -212, 260, -12, -48])

# sgn[psi_i] at z = 0 and z = 1 as printed in the published sign table
PUBLISHED_TABLE = (
    (1, 0, -1, -1, 1, 1, 1, -1, -1, 1),
    (1, -1, -1, -1, -1, 1, 1, -1, -1, 1),
)


@dataclass(frozen=True)
class SturmChain:
    polys: tuple

    def __len__(self):
        return len(self.polys)

    def __getitem__(self, i):
        return self.polys[i]


def sturm_chain(p: IntPolynomial) -> SturmChain:
    """p, p', then negated remainders, each divided by its positive content."""
    if p.is_zero():
        raise ZeroPolynomial("Sturm chain of the zero polynomial")
    chain = [p.primitive()]
    d = p.derivative()
    if d.is_zero():
        return SturmChain(tuple(chain))
    chain.append(d.primitive())
    while True:
        _, r = chain[-2].divmod(chain[-1])
        if r.is_zero():
            break
        chain.append((-r).primitive())
    return SturmChain(tuple(chain))


def chain_signs(chain: SturmChain, at) -> tuple:
    at = Fraction(at)
    return tuple(_sign(q(at)) for q in chain.polys)


def sign_changes(chain: SturmChain, at) -> int:
    s = [v for v in chain_signs(chain, at) if v != 0]
    return sum(1 for a, b in zip(s, s[1:]) if a != b)


def _deflate(p: IntPolynomial, r: Fraction) -> IntPolynomial:
    """Divide out every factor (z - r) of p."""
    lin = IntPolynomial([-r, 1])
    while p(r) == 0 and p.degree > 0:
        p, _ = p.divmod(lin)
    return p


def count_roots(p: IntPolynomial, a, b) -> int:
    """Number of distinct real roots of p in the open interval (a, b).

    Roots sitting exactly on an endpoint are divided out first, so the
    Sturm count is taken at points where the polynomial is nonzero.
    """
    a, b = Fraction(a), Fraction(b)
    if not a < b:
        raise ValueError("need a < b")
    if p.is_zero():
        raise ZeroPolynomial("zero polynomial has infinitely many roots")
    p = _deflate(_deflate(p, a), b)
    if p(a) == 0 or p(b) == 0:
        raise EndpointRoot(f"polynomial still vanishes on an endpoint of ({a}, {b})")
    chain = sturm_chain(p)
    return sign_changes(chain, a) - sign_changes(chain, b)


def isolate_roots(p: IntPolynomial, a=0, b=1, tol=Fraction(1, 2**30)) -> list:
    """Disjoint intervals of width <= tol, each holding exactly one root of p in (a, b).

    Bisection on exact Sturm counts; a midpoint that is itself a root is
    returned as a degenerate interval.
    """
    a, b, tol = Fraction(a), Fraction(b), Fraction(tol)
    out = []
    stack = [(a, b)]
    while stack:
        lo, hi = stack.pop()
        n = count_roots(p, lo, hi)
        if n == 0:
            continue
        if n == 1 and hi - lo <= tol:
            out.append((lo, hi))
            continue
        mid = (lo + hi) / 2
        if p(mid) == 0:
            out.append((mid, mid))
        stack.append((mid, hi))
        stack.append((lo, mid))
    return sorted(out)


def perturbed(p: IntPolynomial, index: int, delta) -> IntPolynomial:
    """Copy of p with ``delta`` added to the coefficient of z^index (falsification runs)."""
    c = list(p.coeffs) + [Fraction(0)] * max(0, index + 1 - len(p.coeffs))
    c[index] += Fraction(delta)
    return IntPolynomial(c)


def sign_table_psi() -> list:
    """Rows (i, sgn psi_i(0), sgn psi_i(1)) of the exact Sturm chain of psi."""
    chain = sturm_chain(PSI)
    s0 = chain_signs(chain, 0)
    s1 = chain_signs(chain, 1)
    return [(i, a, b) for i, (a, b) in enumerate(zip(s0, s1))]


def published_table_comparison() -> dict:
    rows = sign_table_psi()
    at0 = tuple(r[1] for r in rows)
    at1 = tuple(r[2] for r in rows)
    n = len(rows)
    return {
        "chain_length": n,
        "published_length": len(PUBLISHED_TABLE[0]),
        "computed_z0": at0,
        "computed_z1": at1,
        "published_z0": PUBLISHED_TABLE[0],
        "published_z1": PUBLISHED_TABLE[1],
        "prefix_match": at0 == PUBLISHED_TABLE[0][:n] and at1 == PUBLISHED_TABLE[1][:n],
        "exact_match": at0 == PUBLISHED_TABLE[0] and at1 == PUBLISHED_TABLE[1],
    }


# --- closed forms on the dual curves -----------------------------------------


def beta_u_dual_233(z):
    """beta * U_dual on the (2,3,3) dual curve at x = z^2."""
    z = np.asarray(z, dtype=float)
    return z * (3 - 3 * z + z**2) + (-3 + 2 * z + 2 * z**2 - 2 * z**3) * np.log1p(z)


def beta_u_dual_343(z):
    """beta * U_dual on the (3,4,3) dual curve at x = z^3."""
    z = np.asarray(z, dtype=float)
    log_arg = np.log1p(-z) - 2 * np.log1p(-(z**3))  # log((1-z)/(1-z^3)^2)
    return 0.75 * z * (4 - 8 * z**2 + 5 * z**3) + (3 - 2 * z - 2 * z**3 + 2 * z**4) * log_arg


def lower_bound_233(z):
    z = np.asarray(z, dtype=float)
    return z**2 * PHI(z) / 6


def lower_bound_343(z, divisor: int = 60):
    """z^2 psi(z) / divisor.  The log bounds give divisor 60."""
    z = np.asarray(z, dtype=float)
    return z**2 * PSI(z) / divisor


def open_grid(step: float) -> np.ndarray:
    n = int(round(1.0 / step))
    return np.arange(1, n) / n


# name -> (lhs, rhs) as (numpy, mpmath) callables; each bound claims lhs < rhs
_LOG_BOUNDS = {
    "log(1+z) < z - z^2/2 + z^3/3": (
        (np.log1p, mpmath.log1p),
        lambda z: z - z**2 / 2 + z**3 / 3,
    ),
    "log(1-z) <= -z - z^2/2 - z^3/3": (
        (lambda z: np.log1p(-z), lambda z: mpmath.log1p(-z)),
        lambda z: -z - z**2 / 2 - z**3 / 3,
    ),
    "log(1+z+z^2) <= z + z^2/2 - 2z^3/3 + z^4/4 + z^5/5": (
        (lambda z: np.log1p(z + z**2), lambda z: mpmath.log1p(z + z**2)),
        lambda z: z + z**2 / 2 - 2 * z**3 / 3 + z**4 / 4 + z**5 / 5,
    ),
}

# double-precision margins below this are re-evaluated in extended precision
_RECHECK_BELOW = 1e-9


def verify_log_bounds(grid_step: float = 1e-4, dps: int = 50) -> dict:
    """Check the three logarithm bounds strictly on the open grid.

    Near z = 0 the margins shrink like z^4 (z^6 for the last bound), below
    double resolution, so small margins are recomputed with ``dps`` digits.
    Raises BoundViolation at the first failing z.
    """
    if grid_step > 1e-3:
        raise ValueError("grid_step must be <= 1e-3")
    n = int(round(1.0 / grid_step))
    z = open_grid(grid_step)
    report = {}
    for name, ((lhs_np, lhs_mp), rhs) in _LOG_BOUNDS.items():
        margin = rhs(z) - lhs_np(z)
        recheck = np.nonzero(margin < _RECHECK_BELOW)[0]
        with mpmath.workdps(dps):
            for k in recheck:
                zk = mpmath.mpf(int(k) + 1) / n
                margin[k] = float(rhs(zk) - lhs_mp(zk))
                if not rhs(zk) - lhs_mp(zk) > 0:
                    raise BoundViolation(name, float(zk))
        bad = scan_positive(margin, z)
        if bad is not None:
            raise BoundViolation(name, bad)
        i = int(np.argmin(margin))
        report[name] = {
            "points": int(z.size),
            "extended_precision_points": int(recheck.size),
            "min_margin": float(margin[i]),
            "at": float(z[i]),
        }
    return report


def necessary_condition_bound(d_r: int) -> float:
    if d_r < 3:
        raise ValueError("d_r must be >= 3")
    return d_r * math.log(d_r - 1) / (d_r - 2)


def necessary_condition(d_r: int, d_g: int) -> bool:
    return d_g >= necessary_condition_bound(d_r)


def phi_second_derivative_negative() -> bool:
    """phi'' = -4(12z^2 - 15z + 7); the quadratic has negative discriminant and positive lead."""
    d2 = PHI.derivative().derivative()
    q = d2.scale(Fraction(-1, 4))
    c, b, a = q.coeffs
    return d2 == IntPolynomial([-28, 60, -48]) and b * b - 4 * a * c < 0 and a > 0


def scan_positive(values: np.ndarray, z: np.ndarray):
    """Return the first z where ``values`` is not strictly positive, else None."""
    bad = np.nonzero(~(values > 0))[0]
    return None if bad.size == 0 else float(z[bad[0]])
