"""Iterating the contractive renormalization branch to its fixed point,
almost-periodicity profiles, the orthogonal split at index 0, and addresses
in the inverse-limit group that the shift dynamics of the limit generates.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal

from . import poly as P
from .exceptions import WindowExhausted
from .jacobi import JacobiWindow, entrywise_distance
from .renorm import BranchVector, renormalize

DEFAULT_GAP_A = 10.0
EDGE_MARGIN = 16


@dataclass
class IterationTrace:
    """The tower J_{n+1} = R(J_n): iterates, consecutive distances, ratios."""

    iterates: list
    step_distances: list
    empirical_ratios: list
    window: tuple
    stopped_early: str | None = None

    @property
    def final(self) -> JacobiWindow:
        return self.iterates[-1]


@dataclass(frozen=True)
class InverseLimitAddress:
    """Residue tower of an integer along the degree sequence."""

    degrees: tuple
    residues: tuple

    def __post_init__(self):
        mod = 1
        prev = None
        for d, r in zip(self.degrees, self.residues):
            mod *= d
            if not (0 <= r < mod):
                raise ValueError(f"residue {r} out of range mod {mod}")
            if prev is not None and r % (mod // d) != prev:
                raise ValueError("residues violate the tower compatibility")
            prev = r


@dataclass
class APProfile:
    """Shift distances rho(k) = |J - S^-k J S^k| along the d-adic ladder."""

    entries: list            # (layer l, j, shift k, rho)
    xi: float
    kappa_emp: float


def _measure_window(window, margin=EDGE_MARGIN):
    lo, hi = window
    if hi - lo <= 4 * margin:
        return window
    return lo + margin, hi - margin


def iterate_fixed(T: P.HyperbolicPoly, delta: BranchVector, J0: JacobiWindow,
                  n: int, window: tuple[int, int] = (-256, 255),
                  force: bool = False, stop_tol: float = 1e-12
                  ) -> IterationTrace:
    """n steps of J -> renormalize(J) with a fixed polynomial.

    Requires sufficient hyperbolicity (gap >= 10) unless ``force`` is set, in
    which case contraction is measured, not guaranteed.  Seeds carrying
    constant or periodic tails iterate exactly at any depth; a seed with
    truncated tails must make the requested window (plus an edge margin)
    available, else WindowExhausted is raised.  Distances between
    consecutive iterates are measured entrywise on the window shrunk by the
    margin.
    """
    if not force and P.hyperbolicity_gap(T) < DEFAULT_GAP_A:
        raise ValueError(
            "polynomial is not sufficiently hyperbolic (gap < 10); pass "
            "force=True to iterate anyway in measurement mode"
        )
    _check_budget(J0, window, T.degree)
    mlo, mhi = _measure_window(window)
    iterates = [J0]
    dists, ratios = [], []
    stopped = None
    cur = J0
    for k in range(n):
        nxt = renormalize(cur, delta, T, window)
        _, _, bound = entrywise_distance(cur, nxt, (mlo, mhi))
        dists.append(bound)
        if len(dists) >= 2 and dists[-2] > 0:
            ratios.append(dists[-1] / dists[-2])
        iterates.append(nxt)
        cur = nxt
        if bound <= stop_tol:
            stopped = f"step distance {bound:.2e} <= {stop_tol:g} at step {k + 1}"
            break
    return IterationTrace(iterates, dists, ratios, window, stopped)


def _check_budget(J0: JacobiWindow, window, d: int):
    lo_av, hi_av = J0.available_range()
    need_lo = window[0] - 2 * d
    need_hi = window[1] + 2 * d
    if need_lo < lo_av or need_hi > hi_av:
        raise WindowExhausted(
            f"seed provides sites [{lo_av}, {hi_av}] but the iteration "
            f"window needs [{need_lo}, {need_hi}]; enlarge the seed window "
            "or attach constant/periodic tails"
        )


def iterate_sequence(polys, delta_policy, J0: JacobiWindow,
                     window: tuple[int, int] = (-256, 255),
                     force: bool = False) -> IterationTrace:
    """Tower driven by a list of polynomials, one per level.

    The m-th approximant applies level m's polynomial to the original seed
    FIRST and then pushes the result through the m-1 outer levels, so that
    consecutive approximants differ inside an m-fold composition of
    contractions and the tower is Cauchy even when the polynomials differ
    from level to level.  For a constant (polynomial, branch) tower this
    reduces exactly to iterate_fixed and is computed incrementally.

    ``delta_policy`` is a single BranchVector applied at every level or a
    per-level list, index 0 being the outermost level.
    """
    seq = list(polys.polys) if isinstance(polys, P.PolySequence) else list(polys)
    if not force:
        for T in seq:
            if P.hyperbolicity_gap(T) < DEFAULT_GAP_A:
                raise ValueError(
                    f"a tower polynomial has gap {P.hyperbolicity_gap(T):.3g}"
                    " < 10; pass force=True for measurement mode"
                )
    _check_budget(J0, window, max(t.degree for t in seq))

    def delta_at(level):
        dv = (delta_policy[level]
              if isinstance(delta_policy, (list, tuple)) else delta_policy)
        if len(dv) != seq[level].degree - 1:
            raise ValueError(
                f"level {level}: branch vector length {len(dv)} does not "
                f"match degree {seq[level].degree}"
            )
        return dv

    n = len(seq)
    uniform = (all(t is seq[0] or t == seq[0] for t in seq)
               and not isinstance(delta_policy, (list, tuple)))
    mlo, mhi = _measure_window(window)
    iterates = [J0]
    dists, ratios = [], []
    cur = J0
    for m in range(1, n + 1):
        if uniform:
            nxt = renormalize(cur, delta_at(0), seq[0], window)
        else:
            nxt = J0
            for level in range(m - 1, -1, -1):
                nxt = renormalize(nxt, delta_at(level), seq[level], window)
        _, _, bound = entrywise_distance(cur, nxt, (mlo, mhi))
        dists.append(bound)
        if len(dists) >= 2 and dists[-2] > 0:
            ratios.append(dists[-1] / dists[-2])
        iterates.append(nxt)
        cur = nxt
    return IterationTrace(iterates, dists, ratios, window)


# ---------------------------------------------------------------------------
# almost-periodicity diagnostics

def shift_distance(J: JacobiWindow, k: int,
                   window: tuple[int, int] | None = None) -> float:
    """rho_J(k): entrywise operator-norm surrogate of J - S^-k J S^k."""
    _, _, bound = entrywise_distance(J, J.shifted(k), window)
    return bound


def ap_profile(J: JacobiWindow, degrees, l_max: int, j_max: int,
               xi: float, window: tuple[int, int] | None = None) -> APProfile:
    """Profile rho_J(D_l * j) for D_l the product of the first l degrees,
    fitting the geometric envelope rho <= 2 xi kappa^l."""
    entries = []
    kappa = 0.0
    for l in range(l_max + 1):
        D = 1
        for d in degrees[:l]:
            D *= d
        for j in range(1, j_max + 1):
            k = D * j
            rho = shift_distance(J, k, window)
            entries.append((l, j, k, rho))
            if l >= 1 and rho > 0:
                kappa = max(kappa, (rho / (2.0 * xi)) ** (1.0 / l))
    return APProfile(entries, xi, kappa)


def split_check(trace: IterationTrace, xi: float, d: int,
                l_max: int | None = None) -> dict:
    """Layer-stratified decay of couplings at d-adic indices in the final
    iterate: max p_k over indices of d-adic valuation l must fall like
    2 xi kappa^l, and p_0 itself must have collapsed."""
    J = trace.final
    lo, hi = _measure_window(trace.window)
    n_steps = len(trace.step_distances)
    if l_max is None:
        l_max = max(1, min(n_steps, int(np.log(max(hi, -lo)) / np.log(d))))
    layers = {}
    for k in range(lo, hi + 1):
        if k == 0:
            continue
        v, kk = 0, abs(k)
        while kk % d == 0:
            kk //= d
            v += 1
        v = min(v, l_max)
        layers[v] = max(layers.get(v, 0.0), J.p_at(k))
    kappa_layer = 0.0
    for l, mx in layers.items():
        if l >= 1 and mx > 0:
            kappa_layer = max(kappa_layer, (mx / (2.0 * xi)) ** (1.0 / l))
    p0 = J.p_at(0) if J.lo <= 0 <= J.hi else None
    p0_per_iterate = [it.p_at(0) for it in trace.iterates
                      if it.lo <= 0 <= it.hi]
    return {
        "p0": p0,
        "p0_per_iterate": p0_per_iterate,
        "layer_max": {int(l): float(v) for l, v in sorted(layers.items())},
        "kappa_layer": float(kappa_layer),
        "n_steps": n_steps,
    }


def section_spectrum_vs_preimage(J: JacobiWindow, T: P.HyperbolicPoly,
                                 level: int, size: int = 512) -> float:
    """Distance from every finite-section eigenvalue of J to the level-th
    preimage ladder E_level = (T^level)^{-1}[-xi, xi].

    The section is cut at d-adic indices (where the iterated matrix's
    couplings have collapsed), so the Dirichlet edges do not inject spurious
    gap states; what remains measures genuine containment up to edge
    effects at the 1e-3 scale.
    """
    d = T.degree
    if J.is_exactly_periodic:
        hi = len(J.q) - 1
        while 2 * (hi + 1) <= size:
            hi = 2 * hi + 1
    else:
        hi = d ** int(np.log(size) / np.log(d)) - 1
    lo = 0
    lo_av, hi_av = J.available_range()
    lo, hi = max(lo, lo_av), min(hi, hi_av)
    diag = np.array([J.q_at(k) for k in range(lo, hi + 1)])
    off = np.array([J.p_at(k) for k in range(lo + 1, hi + 1)])
    ev = eigvalsh_tridiagonal(diag, off)
    ends = np.array([T.xi, -T.xi])
    for _ in range(level):
        ends = P.preimages_many(T, ends).reshape(-1)
    bands = np.sort(ends)
    worst = 0.0
    for x in ev:
        i = np.searchsorted(bands, x)
        cand = []
        if i > 0:
            cand.append(abs(x - bands[i - 1]))
        if i < len(bands):
            cand.append(abs(x - bands[i]))
        lowd = min(cand)
        # inside a band the distance is zero
        if i % 2 == 1:
            lowd = 0.0
        worst = max(worst, lowd)
    return float(worst)


# ---------------------------------------------------------------------------
# inverse-limit group bookkeeping

def group_address(k: int, degrees, layers: int | None = None
                  ) -> InverseLimitAddress:
    """Residue tower of k along the degree sequence."""
    degrees = tuple(degrees)
    if layers is not None:
        degrees = degrees[:layers]
    residues = []
    mod = 1
    for d in degrees:
        mod *= d
        residues.append(k % mod)
    return InverseLimitAddress(degrees, tuple(residues))


def group_distance(k1: int, k2: int, degrees, kappa: float = 0.5) -> float:
    """kappa^l with l the first layer where the residue towers differ."""
    mod = 1
    for l, d in enumerate(degrees):
        mod *= d
        if (k1 - k2) % mod != 0:
            return kappa ** l
    return 0.0
