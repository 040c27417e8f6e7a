"""Finite-length Monte-Carlo for precoded rateless codes on the BEC.

Bits are protected by a (d_l, d_r) configuration-model precode; the inner
code emits symbols that are XORs of d_g bits picked uniformly with
replacement.  Decoding is peeling over the joint factor graph.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import _fast
from .dd_core import CodeParams


class DivisibilityError(ValueError):
    pass


class InconsistentFactor(AssertionError):
    pass


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def trial_seed(master: int, index: int) -> np.random.SeedSequence:
    """Independent, reproducible stream for trial ``index`` of a batch."""
    return np.random.SeedSequence([int(master), int(index)])


# --- precode ----------------------------------------------------------------


@dataclass
class PrecodeGraph:
    """Parity checks over M bits; ``checks[c]`` lists bit indices with multiplicity."""

    M: int
    d_l: int
    d_r: int
    checks: list

    @property
    def n_checks(self) -> int:
        return len(self.checks)

    def bit_degrees(self) -> np.ndarray:
        deg = np.zeros(self.M, dtype=int)
        for c in self.checks:
            np.add.at(deg, np.asarray(c, dtype=int), 1)
        return deg

    def check_degrees(self) -> np.ndarray:
        return np.array([len(c) for c in self.checks], dtype=int)

    def parity_matrix(self) -> np.ndarray:
        """GF(2) parity-check matrix; repeated edges cancel."""
        H = np.zeros((self.n_checks, self.M), dtype=np.uint8)
        for r, c in enumerate(self.checks):
            for b in c:
                H[r, b] ^= 1
        return H


def round_up_bits(M: int, d_l: int, d_r: int) -> int:
    """Smallest M' >= M with M' d_l divisible by d_r."""
    step = d_r // math.gcd(d_l, d_r)
    return -(-M // step) * step


def build_precode(M: int, d_l: int, d_r: int, seed=None) -> PrecodeGraph:
    """Random (d_l, d_r)-regular precode by pairing edge sockets uniformly."""
    if (M * d_l) % d_r:
        raise DivisibilityError(f"M*d_l = {M * d_l} is not divisible by d_r = {d_r}")
    rng = _rng(seed)
    sockets = rng.permutation(np.repeat(np.arange(M), d_l))
    checks = [tuple(row) for row in sockets.reshape(-1, d_r).tolist()]
    return PrecodeGraph(M, d_l, d_r, checks)


# --- inner code and channel ----------------------------------------------------


class OutputSymbol(NamedTuple):
    t: int
    neighbors: tuple
    value: int


def stream_symbols(M: int, d_g: int, n: int, seed=None, codeword=None) -> list:
    """``n`` inner-code symbols, each the XOR of ``d_g`` bits drawn with replacement.

    Without ``codeword`` the all-zero word is sent.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    rng = _rng(seed)
    idx = rng.integers(0, M, size=(n, d_g))
    if codeword is None:
        vals = np.zeros(n, dtype=np.uint8)
    else:
        vals = np.bitwise_xor.reduce(np.asarray(codeword, dtype=np.uint8)[idx], axis=1) if n else np.zeros(0, np.uint8)
    return [OutputSymbol(t + 1, tuple(row), v) for t, (row, v) in enumerate(zip(idx.tolist(), vals.tolist()))]


def bec_erase(symbols: Sequence, eps: float, seed=None) -> list:
    if not 0 <= eps <= 1:
        raise ValueError("eps must lie in [0, 1]")
    rng = _rng(seed)
    keep = rng.random(len(symbols)) >= eps
    return [s for s, k in zip(symbols, keep) if k]


# --- decoder ----------------------------------------------------------------------


@dataclass
class PeelResult:
    decoded: bool
    residual_erasures: int
    peel_iterations: int
    values: np.ndarray  # 0/1 for recovered bits, -1 for erased

    @property
    def unresolved(self) -> frozenset:
        return frozenset(np.nonzero(self.values < 0)[0].tolist())


def _odd_support(nbrs: Iterable[int]) -> list:
    """Indices appearing an odd number of times; even repeats cancel under XOR."""
    odd: dict = {}
    for b in nbrs:
        odd[b] = not odd.get(b, False)
    return [b for b, o in odd.items() if o]


def _factor_csr(graph: PrecodeGraph, received: Sequence):
    """Precode checks then received symbols as CSR arrays of odd-multiplicity supports."""
    lists = list(graph.checks) + [s.neighbors for s in received]
    lens = np.fromiter((len(c) for c in lists), dtype=np.int64, count=len(lists))
    flat = np.fromiter(itertools.chain.from_iterable(lists), dtype=np.int64, count=int(lens.sum()))
    fac = np.repeat(np.arange(len(lists), dtype=np.int64), lens)
    keys, mult = np.unique(fac * graph.M + flat, return_counts=True)
    keys = keys[mult % 2 == 1]
    fac_of, idx = np.divmod(keys, graph.M)
    ptr = np.zeros(len(lists) + 1, dtype=np.int64)
    np.add.at(ptr, fac_of + 1, 1)
    acc = np.zeros(len(lists), dtype=np.int64)
    acc[len(graph.checks):] = [int(s.value) & 1 for s in received]
    return np.cumsum(ptr), idx, acc


def peel_decode(graph: PrecodeGraph, received: Sequence, order_seed=None) -> PeelResult:
    """Iteratively solve factors with a single unknown neighbour.

    Factors are the precode checks (value 0) and the received symbols.  Each
    round resolves every factor that has exactly one unknown bit at the start
    of the round; ``peel_iterations`` counts rounds.  A factor left with no
    unknowns but odd parity raises InconsistentFactor.

    The compiled kernel is used by default.  ``order_seed`` switches to the
    reference implementation below and shuffles the order within each round,
    which cannot change the outcome.
    """
    if order_seed is not None:
        return _peel_reference(graph, received, order_seed)
    ptr, idx, acc = _factor_csr(graph, received)
    values, rounds, bad = _fast.peel(graph.M, ptr, idx, acc)
    if bad >= 0:
        raise InconsistentFactor(f"factor {bad} has no unknowns left but odd parity")
    residual = int(np.count_nonzero(values < 0))
    return PeelResult(residual == 0, residual, int(rounds), values)


def _peel_reference(graph: PrecodeGraph, received: Sequence, order_seed=None) -> PeelResult:
    """Pure-Python peeling, kept as the readable reference for the kernel."""
    M = graph.M
    supports = [_odd_support(c) for c in graph.checks]
    supports += [_odd_support(s.neighbors) for s in received]
    acc = [0] * len(graph.checks) + [int(s.value) & 1 for s in received]
    n_fac = len(supports)
    count = [len(s) for s in supports]
    xor_idx = [0] * n_fac
    adj: list = [[] for _ in range(M)]
    for f, sup in enumerate(supports):
        x = 0
        for b in sup:
            adj[b].append(f)
            x ^= b
        xor_idx[f] = x
        if not sup and acc[f]:
            raise InconsistentFactor(f"factor {f} has no unknowns but parity {acc[f]}")

    values = np.full(M, -1, dtype=np.int8)
    rng = None if order_seed is None else _rng(order_seed)
    ripple = [f for f in range(n_fac) if count[f] == 1]
    rounds = 0
    while ripple:
        rounds += 1
        if rng is not None:
            ripple = [ripple[i] for i in rng.permutation(len(ripple))]
        nxt = []
        for f in ripple:
            if count[f] != 1:
                continue
            b = xor_idx[f]
            v = acc[f]
            values[b] = v
            for h in adj[b]:
                acc[h] ^= v
                xor_idx[h] ^= b
                count[h] -= 1
                if count[h] == 1:
                    nxt.append(h)
                elif count[h] == 0 and acc[h]:
                    raise InconsistentFactor(f"factor {h} violated after resolving bit {b}")
        ripple = nxt
    residual = int(np.count_nonzero(values < 0))
    return PeelResult(residual == 0, residual, rounds, values)


def brute_force_solutions(graph: PrecodeGraph, received: Sequence) -> np.ndarray:
    """Every word in {0,1}^M meeting all checks and received symbols (M <= 20)."""
    M = graph.M
    if M > 20:
        raise ValueError("exhaustive search limited to M <= 20")
    words = ((np.arange(2**M)[:, None] >> np.arange(M)[None, :]) & 1).astype(np.uint8)
    ok = np.ones(len(words), dtype=bool)
    for c in graph.checks:
        ok &= (np.bitwise_xor.reduce(words[:, list(c)], axis=1) if c else 0) == 0
    for s in received:
        par = np.bitwise_xor.reduce(words[:, list(s.neighbors)], axis=1) if s.neighbors else 0
        ok &= par == (s.value & 1)
    return words[ok]


# --- GF(2) encoder (integration tests only) --------------------------------------


def gf2_nullspace(H: np.ndarray) -> np.ndarray:
    """Basis of {x : H x = 0 over GF(2)} as rows."""
    A = (np.asarray(H, dtype=np.uint8) & 1).copy()
    rows, cols = A.shape
    pivots = []
    r = 0
    for c in range(cols):
        hit = np.nonzero(A[r:, c])[0] if r < rows else []
        if len(hit) == 0:
            continue
        p = r + hit[0]
        A[[r, p]] = A[[p, r]]
        mask = A[:, c].astype(bool)
        mask[r] = False
        A[mask] ^= A[r]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    free = [c for c in range(cols) if c not in set(pivots)]
    basis = np.zeros((len(free), cols), dtype=np.uint8)
    for i, fc in enumerate(free):
        basis[i, fc] = 1
        for pr, pc in enumerate(pivots):
            basis[i, pc] = A[pr, fc]
    return basis


def random_codeword(graph: PrecodeGraph, seed=None) -> np.ndarray:
    """Uniform random precode codeword via a GF(2) nullspace basis (cubic cost)."""
    rng = _rng(seed)
    basis = gf2_nullspace(graph.parity_matrix())
    if len(basis) == 0:
        return np.zeros(graph.M, dtype=np.uint8)
    coef = rng.integers(0, 2, size=len(basis)).astype(np.uint8)
    return (coef @ basis) % 2


# --- coupled construction -----------------------------------------------------------


@dataclass(frozen=True)
class CoupledLayout:
    L: int
    w: int
    bits_per_position: int

    def __post_init__(self):
        if self.L < 1 or self.w < 1 or self.bits_per_position < 1:
            raise ValueError("L, w and bits_per_position must be >= 1")


@dataclass
class CoupledCode:
    """Terminated spatially-coupled precode plus its position-aware inner code.

    Bit ``b`` sits at position ``b // N``.  Check and symbol positions run over
    ``[0, L+w-2]``; a factor at position c draws bits from ``[c-w+1, c]`` and
    draws falling outside ``[0, L-1]`` hit known zero bits, which are dropped.
    """

    layout: CoupledLayout
    graph: PrecodeGraph
    d_g: int

    @property
    def n_factor_positions(self) -> int:
        return self.layout.L + self.layout.w - 1

    def stream(self, n: int, seed=None, codeword=None) -> list:
        """``n`` symbols assigned to positions round-robin; t-th goes to (t-1) mod (L+w-1)."""
        L, w, N = self.layout.L, self.layout.w, self.layout.bits_per_position
        rng = _rng(seed)
        pos = np.arange(n) % self.n_factor_positions
        off = rng.integers(0, w, size=(n, self.d_g))
        local = rng.integers(0, N, size=(n, self.d_g))
        bitpos = pos[:, None] - off
        real = (bitpos >= 0) & (bitpos < L)
        idx = bitpos * N + local
        if codeword is None:
            vals = [0] * n
        else:
            cw = np.asarray(codeword, dtype=np.uint8)
            vals = np.bitwise_xor.reduce(np.where(real, cw[np.where(real, idx, 0)], 0), axis=1).tolist()
        return [
            OutputSymbol(t + 1, tuple(b for b, r in zip(row, keep) if r), v)
            for t, (row, keep, v) in enumerate(zip(idx.tolist(), real.tolist(), vals))
        ]


def coupled_bits_per_position(N: int, d_l: int, d_r: int, w: int) -> int:
    """Smallest N' >= N with N' d_l divisible by both w and d_r."""
    need = math.lcm(w, d_r)
    step = need // math.gcd(need, d_l)
    return -(-N // step) * step


def build_coupled_code(params: CodeParams, layout: CoupledLayout, seed=None) -> CoupledCode:
    L, w = layout.L, layout.w
    d_l, d_r = params.d_l, params.d_r
    N = coupled_bits_per_position(layout.bits_per_position, d_l, d_r, w)
    if N != layout.bits_per_position:
        layout = CoupledLayout(L, w, N)
    rng = _rng(seed)
    per_group = N * d_l // w
    incoming: list = [[] for _ in range(L + w - 1)]
    for i in range(L):
        sockets = rng.permutation(np.repeat(np.arange(i * N, (i + 1) * N), d_l))
        for j in range(w):
            incoming[i + j].append(sockets[j * per_group : (j + 1) * per_group])
    checks = []
    known = -1
    for c in range(L + w - 1):
        real = np.concatenate(incoming[c]) if incoming[c] else np.zeros(0, dtype=int)
        missing = N * d_l - len(real)  # sockets from positions outside [0, L-1]
        socks = rng.permutation(np.concatenate([real, np.full(missing, known)]))
        checks.extend(tuple(b for b in row if b != known) for row in socks.reshape(-1, d_r).tolist())
    graph = PrecodeGraph(L * N, d_l, d_r, checks)
    return CoupledCode(layout, graph, params.d_g)


# --- trials -------------------------------------------------------------------------


@dataclass
class TrialResult:
    family: str
    d_l: int
    d_r: int
    d_g: int
    beta: float  # realised channel degree per bit, n d_g / M
    M: int
    L: int
    w: int
    eps: float
    alpha: float
    n: int  # channel uses, before erasure
    n_received: int  # symbols that survived the channel
    decoded: bool
    residual: int
    iterations: int
    seed: str

    def row(self) -> dict:
        return asdict(self)


CSV_COLUMNS = (
    "family", "d_l", "d_r", "d_g", "beta", "M", "L", "w",
    "eps", "alpha", "n", "decoded", "residual", "iterations", "seed",
)


def symbols_for_overhead(k: int, alpha: float, eps: float) -> int:
    if alpha <= -1:
        raise ValueError("alpha must exceed -1")
    if not 0 <= eps < 1:
        raise ValueError("eps must lie in [0, 1)")
    return math.ceil((1 + alpha) * k / (1 - eps) - 1e-9)


def _seed_label(seed) -> str:
    if isinstance(seed, np.random.SeedSequence):
        return ":".join(str(v) for v in np.atleast_1d(seed.entropy))
    return str(seed)


def _family(params: CodeParams) -> str:
    return f"({params.d_l},{params.d_r},{params.d_g})"


def run_trial(params: CodeParams, M: int, alpha: float, eps: float, seed=None,
              real_codeword: bool = False) -> TrialResult:
    """One uncoupled transmission at overhead ``alpha``.

    M is rounded up to the next admissible block length.  k = r_pre * M and
    n = ceil((1 + alpha) k / (1 - eps)) symbols are sent.
    """
    M = round_up_bits(M, params.d_l, params.d_r)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    g_seed, s_seed, e_seed, c_seed = ss.spawn(4)
    graph = build_precode(M, params.d_l, params.d_r, g_seed)
    k = M - graph.n_checks
    n = symbols_for_overhead(k, alpha, eps)
    cw = random_codeword(graph, c_seed) if real_codeword else None
    received = bec_erase(stream_symbols(M, params.d_g, n, s_seed, cw), eps, e_seed)
    res = peel_decode(graph, received)
    if cw is not None and res.decoded:
        assert np.array_equal(res.values.astype(np.uint8), cw)
    return TrialResult(
        _family(params), params.d_l, params.d_r, params.d_g, n * params.d_g / M,
        M, 1, 1, eps, alpha, n, len(received), res.decoded, res.residual_erasures,
        res.peel_iterations, _seed_label(seed),
    )


def run_coupled_trial(params: CodeParams, layout: CoupledLayout, eps: float, seed=None,
                      alpha: float | None = None) -> TrialResult:
    """One coupled transmission.

    With ``alpha`` given, n follows from the overhead with k = M - #checks;
    otherwise n = ceil(beta M / d_g) so each bit sees beta symbols on average.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    g_seed, s_seed, e_seed = ss.spawn(3)
    code = build_coupled_code(params, layout, g_seed)
    M = code.graph.M
    k = M - code.graph.n_checks
    if k <= 0:
        raise ValueError(f"layout L={layout.L}, w={layout.w} leaves no information bits "
                         f"({code.graph.n_checks} checks on {M} bits); increase L")
    if alpha is None:
        n = math.ceil(params.beta * M / params.d_g)
        alpha = (n / k) * (1 - eps) - 1
    else:
        n = symbols_for_overhead(k, alpha, eps)
    received = bec_erase(code.stream(n, s_seed), eps, e_seed)
    res = peel_decode(code.graph, received)
    return TrialResult(
        _family(params), params.d_l, params.d_r, params.d_g, n * params.d_g / M,
        M, code.layout.L, code.layout.w, eps, alpha, n, len(received), res.decoded,
        res.residual_erasures, res.peel_iterations, _seed_label(seed),
    )


def failure_rate(results: Sequence[TrialResult]) -> float:
    return sum(not r.decoded for r in results) / len(results) if results else float("nan")


# --- overhead at which decoding starts to work --------------------------------------


def beta_for_overhead(params: CodeParams, alpha: float, eps: float) -> float:
    """Channel symbols per bit sent when k (1 + alpha) / (1 - eps) symbols go out."""
    return params.d_g * params.r_pre * (1 + alpha) / (1 - eps)


def _increasing_crossing(ok, lo: float, hi: float, tol: float) -> float:
    """Smallest a in [lo, hi] with ok(a), assuming ok is monotone; inf if ok(hi) fails."""
    if ok(lo):
        return lo
    if not ok(hi):
        return math.inf
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def de_alpha_prediction(params: CodeParams, eps: float, alpha_max: float = 3.0,
                        tol: float = 1e-4) -> float:
    """Smallest overhead for which uncoupled DE at the induced beta reaches zero.

    inf when DE fails on the whole range.
    """
    from .dd_core import DegreeSystem
    from .density_evolution import de_run

    lo = max(0.0, -eps + 1e-9)

    def ok(a):
        p = CodeParams(params.d_l, params.d_r, params.d_g, beta_for_overhead(params, a, eps))
        return de_run(DegreeSystem.primal(p), eps).converged_to_zero

    return _increasing_crossing(ok, lo, alpha_max, tol)


def success_rate(params: CodeParams, M: int, alpha: float, eps: float, trials: int,
                 master_seed: int = 0) -> float:
    res = [run_trial(params, M, alpha, eps, trial_seed(master_seed, i)) for i in range(trials)]
    return 1.0 - failure_rate(res)


def empirical_alpha_half(params: CodeParams, M: int, eps: float, trials: int,
                         master_seed: int = 0, lo: float = 0.0, hi: float = 3.0,
                         tol: float = 0.01) -> float:
    """Overhead at which the Monte-Carlo success rate first reaches one half (inf if never)."""
    return _increasing_crossing(
        lambda a: success_rate(params, M, a, eps, trials, master_seed) >= 0.5, lo, hi, tol
    )
