"""Two-sided Jacobi matrices known on a window, with tail models that make
half-line resolvent functions computable.

Conventions
-----------
A Jacobi matrix J acts by (Ju)_k = p_k u_{k-1} + q_k u_k + p_{k+1} u_{k+1}:
the coupling p_k joins sites k-1 and k.  Half-line restrictions J_-(s) and
J_+(s) act on sites <= s and >= s respectively, and their resolvent
functions are

    r_-(z, s) = <s| (J_-(s) - z)^{-1} |s>,
    r_+(z, s) = <s| (J_+(s) - z)^{-1} |s>,

with the continued-fraction recursions

    r_+(z, s) = -1 / (z - q_s + p_{s+1}^2 r_+(z, s+1)),
    r_-(z, s) = -1 / (z - q_s + p_s^2    r_-(z, s-1)).

For a constant or periodic tail the recursion closes on the attracting
fixed point of the one-period Moebius map; for a truncated tail it starts
from r = -1/(z - q_N) at the last site and depth is doubled until two
successive depths agree to CF_TOL.  Each recursion step contracts errors in
the Moebius metric by roughly (p / dist(z, spectrum))^2, so the required
extra depth scales like log(CF_TOL) / log(dist / p): a handful of sites at
the distances used by the renormalization pipeline.
"""

import csv
import json
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import (
    DisjointWindows,
    NonConvergence,
    SingularPencil,
    TooCloseToSpectrum,
)

GAP_MIN = 1e-6
CF_TOL = 1e-13
SPLIT_TOL = 1e-13


@dataclass(frozen=True)
class Tail:
    """Closure of a window: constant, periodic (cycle), or truncated."""

    kind: str
    p: tuple = ()
    q: tuple = ()
    depth: int = 64

    @staticmethod
    def constant(p: float, q: float = 0.0) -> "Tail":
        if p <= 0:
            raise ValueError("constant tail coupling must be positive")
        return Tail("constant", (float(p),), (float(q),))

    @staticmethod
    def periodic(p_cycle, q_cycle) -> "Tail":
        p = tuple(float(v) for v in p_cycle)
        q = tuple(float(v) for v in q_cycle)
        if len(p) != len(q) or not p:
            raise ValueError("cycles must be nonempty and of equal length")
        if min(p) < 0:
            raise ValueError("periodic tail couplings must be nonnegative")
        return Tail("periodic", p, q)

    @staticmethod
    def truncate(depth: int = 64) -> "Tail":
        if depth < 8:
            raise ValueError("truncate depth must be >= 8")
        return Tail("truncate", depth=depth)

    @property
    def cycle_len(self) -> int:
        return len(self.p) if self.kind != "truncate" else 0


@dataclass(frozen=True, eq=False)
class JacobiWindow:
    """A window of coefficients plus tail models on both sides.

    ``q[i]`` is the diagonal at site ``offset + i``; ``p[i]`` is the coupling
    p_{offset+i} joining sites offset+i-1 and offset+i (so ``p[0]`` is the
    boundary coupling into the left tail).
    """

    offset: int
    p: np.ndarray
    q: np.ndarray
    tail_left: Tail
    tail_right: Tail

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        q = np.asarray(self.q, dtype=float)
        if len(p) != len(q) or len(q) < 1:
            raise ValueError("p and q must have equal positive length")
        if np.any(p < 0):
            raise ValueError("couplings must be nonnegative (0 marks a split)")
        p.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    # -- constructors -------------------------------------------------------

    @staticmethod
    def constant(p: float, q: float = 0.0, lo: int = 0, hi: int = 0
                 ) -> "JacobiWindow":
        n = hi - lo + 1
        t = Tail.constant(p, q)
        return JacobiWindow(lo, np.full(n, float(p)), np.full(n, float(q)), t, t)

    @staticmethod
    def from_cycle(p_cycle, q_cycle, offset: int = 0) -> "JacobiWindow":
        """Exactly periodic matrix: p_k = pc[(k-offset) mod m] for all k."""
        pc = np.asarray(p_cycle, dtype=float)
        qc = np.asarray(q_cycle, dtype=float)
        m = len(pc)
        left = Tail.periodic(pc[::-1], qc[::-1])
        right = Tail.periodic(pc, qc)
        return JacobiWindow(offset, pc.copy(), qc.copy(), left, right)

    # -- geometry -----------------------------------------------------------

    @property
    def lo(self) -> int:
        return self.offset

    @property
    def hi(self) -> int:
        return self.offset + len(self.q) - 1

    def q_at(self, k: int) -> float:
        if self.lo <= k <= self.hi:
            return float(self.q[k - self.offset])
        if k < self.lo:
            t, j = self.tail_left, self.lo - 1 - k
        else:
            t, j = self.tail_right, k - self.hi - 1
        if t.kind == "truncate":
            if j >= t.depth:
                raise IndexError(f"site {k} beyond truncated tail")
            edge = self.q[0] if k < self.lo else self.q[-1]
            return float(edge)
        return t.q[j % len(t.q)]

    def p_at(self, k: int) -> float:
        if self.lo <= k <= self.hi:
            return float(self.p[k - self.offset])
        if k < self.lo:
            t, j = self.tail_left, self.lo - 1 - k
        else:
            t, j = self.tail_right, k - self.hi - 1
        if t.kind == "truncate":
            if j >= t.depth:
                raise IndexError(f"coupling {k} beyond truncated tail")
            edge = self.p[0] if k < self.lo else self.p[-1]
            return float(edge)
        return t.p[j % len(t.p)]

    def last_site(self, side: int) -> int:
        """Rightmost (side=+1) or leftmost (-1) existing site; None-like
        sentinel for infinite tails is represented by raising."""
        t = self.tail_right if side > 0 else self.tail_left
        if t.kind != "truncate":
            raise ValueError("infinite tail has no last site")
        return (self.hi + t.depth) if side > 0 else (self.lo - t.depth)

    @property
    def is_exactly_periodic(self) -> bool:
        """True when window and both tails describe one globally periodic
        matrix whose period equals the window length."""
        m = len(self.q)
        tl, tr = self.tail_left, self.tail_right
        if tl.kind != "periodic" or tr.kind != "periodic":
            return False
        if tl.cycle_len != m or tr.cycle_len != m:
            return False
        ok_r = np.allclose(tr.p, self.p) and np.allclose(tr.q, self.q)
        ok_l = (np.allclose(tl.p, self.p[::-1])
                and np.allclose(tl.q, self.q[::-1]))
        return bool(ok_r and ok_l)

    def available_range(self) -> tuple[int, int]:
        """Sites at which coefficients are defined; +-10^9 stands in for an
        infinite tail."""
        big = 10 ** 9
        lo = self.lo - (self.tail_left.depth
                        if self.tail_left.kind == "truncate" else big)
        hi = self.hi + (self.tail_right.depth
                        if self.tail_right.kind == "truncate" else big)
        return lo, hi

    def norm_bound(self) -> float:
        """sup|q| + 2 sup p over window and tails: crude spectrum surrogate."""
        sup_q = float(np.max(np.abs(self.q)))
        sup_p = float(np.max(self.p))
        for t in (self.tail_left, self.tail_right):
            if t.kind != "truncate":
                sup_q = max(sup_q, max(abs(v) for v in t.q))
                sup_p = max(sup_p, max(t.p))
        return sup_q + 2.0 * sup_p

    def split_sites(self, tol: float = SPLIT_TOL) -> list[int]:
        """Indices k with p_k ~ 0 inside the window (flagged splits)."""
        return [self.offset + int(i) for i in np.nonzero(self.p <= tol)[0]]

    # -- derived windows ----------------------------------------------------

    def slice_window(self, lo: int, hi: int) -> "JacobiWindow":
        """Materialize coefficients on [lo, hi], pulling from tails.

        The exterior semantics are preserved exactly when the slice covers
        the original window (or the matrix is exactly periodic); a strictly
        interior slice closes with the cycle of coefficients found just
        outside the cut and is then a standalone object.
        """
        p = np.array([self.p_at(k) for k in range(lo, hi + 1)])
        q = np.array([self.q_at(k) for k in range(lo, hi + 1)])
        return JacobiWindow(lo, p, q, self._tail_for_slice(-1, lo),
                            self._tail_for_slice(+1, hi))

    def _tail_for_slice(self, side: int, edge: int) -> Tail:
        t = self.tail_right if side > 0 else self.tail_left
        if t.kind == "truncate":
            return t
        m = max(t.cycle_len, 1)
        if side > 0:
            q = tuple(self.q_at(edge + 1 + j) for j in range(m))
            p = tuple(self.p_at(edge + 1 + j) for j in range(m))
        else:
            q = tuple(self.q_at(edge - 1 - j) for j in range(m))
            p = tuple(self.p_at(edge - 1 - j) for j in range(m))
        kind = "constant" if m == 1 else "periodic"
        return Tail(kind, p, q)

    def shifted(self, k: int) -> "JacobiWindow":
        """Entry m of the output equals entry m+k of self: S^{-k} J S^{k}."""
        return replace(self, offset=self.offset - k)

    def reflected(self) -> "JacobiWindow":
        """Index reflection about the (0,1) bond: q_k -> q_{1-k},
        p_k -> p_{2-k}.

        The output window is [1-hi, 2-lo]: one extra site on the right keeps
        the boundary coupling p_{lo} inside the stored window, so the sampled
        tails stay exactly periodic.
        """
        lo, hi = 1 - self.hi, 2 - self.lo
        p = np.array([self.p_at(2 - k) for k in range(lo, hi + 1)])
        q = np.array([self.q_at(1 - k) for k in range(lo, hi + 1)])

        def sampled(side):
            src = self.tail_left if side > 0 else self.tail_right
            if src.kind == "truncate":
                return src
            m = max(src.cycle_len, 1)
            edge = hi if side > 0 else lo
            if side > 0:
                qs = tuple(self.q_at(1 - (edge + 1 + j)) for j in range(m))
                ps = tuple(self.p_at(2 - (edge + 1 + j)) for j in range(m))
            else:
                qs = tuple(self.q_at(1 - (edge - 1 - j)) for j in range(m))
                ps = tuple(self.p_at(2 - (edge - 1 - j)) for j in range(m))
            return Tail("constant" if m == 1 else "periodic", ps, qs)

        return JacobiWindow(lo, p, q, sampled(-1), sampled(+1))

    # -- serialization ------------------------------------------------------

    def to_json_dict(self) -> dict:
        def tail_dict(t):
            d = {"kind": t.kind}
            if t.kind == "truncate":
                d["depth"] = t.depth
            else:
                d["p"] = list(t.p)
                d["q"] = list(t.q)
            return d

        return {"offset": self.offset, "p": list(self.p), "q": list(self.q),
                "tail_left": tail_dict(self.tail_left),
                "tail_right": tail_dict(self.tail_right)}

    @staticmethod
    def from_json_dict(d: dict) -> "JacobiWindow":
        def tail(t):
            if t["kind"] == "truncate":
                return Tail.truncate(t.get("depth", 64))
            return Tail(t["kind"], tuple(t["p"]), tuple(t["q"]))

        return JacobiWindow(int(d["offset"]), np.asarray(d["p"], float),
                            np.asarray(d["q"], float),
                            tail(d["tail_left"]), tail(d["tail_right"]))

    def save_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @staticmethod
    def load_json(path) -> "JacobiWindow":
        with open(path) as fh:
            return JacobiWindow.from_json_dict(json.load(fh))

    def save_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "p", "q"])
            for i, k in enumerate(range(self.lo, self.hi + 1)):
                w.writerow([k, repr(float(self.p[i])), repr(float(self.q[i]))])


def load_csv(path, tail_left: Tail | None = None,
             tail_right: Tail | None = None) -> JacobiWindow:
    idx, ps, qs = [], [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            idx.append(int(row["index"]))
            ps.append(float(row["p"]))
            qs.append(float(row["q"]))
    if idx != list(range(idx[0], idx[0] + len(idx))):
        raise ValueError("CSV indices must be contiguous")
    tl = tail_left or Tail.truncate()
    tr = tail_right or Tail.truncate()
    return JacobiWindow(idx[0], np.asarray(ps), np.asarray(qs), tl, tr)


# ---------------------------------------------------------------------------
# continued-fraction machinery

def _mobius_fixed_point(steps, z):
    """Attracting fixed point of the composed Moebius map of one period.

    Each step (qj, psqj) is r_j = -1/(z - qj + psqj * r_{j+1}); the period
    map is the matrix product of [[0, -1], [psq, z - q]] in step order.
    """
    M = np.eye(2)
    for qj, psqj in steps:
        M = M @ np.array([[0.0, -1.0], [psqj, z - qj]])
        s = np.max(np.abs(M))
        if s > 1e50:
            M = M / s
    a, b, c, d = M[0, 0], M[0, 1], M[1, 0], M[1, 1]
    if abs(c) < 1e-300 * max(abs(a), abs(d), 1.0):
        return b / (d - a)
    disc = (d - a) ** 2 + 4.0 * b * c
    sq = np.sqrt(complex(disc))
    cands = [(a - d + sq) / (2.0 * c), (a - d - sq) / (2.0 * c)]
    best, best_mult = None, None
    det = a * d - b * c
    for r in cands:
        denom = abs(c * r + d) ** 2
        mult = abs(det) / denom if denom > 0 else np.inf
        if best is None or mult < best_mult:
            best, best_mult = r, mult
    if best_mult > 1.0 + 1e-9:
        raise NonConvergence("no attracting fixed point: z too close to spectrum")
    if abs(np.imag(best)) < 1e-9 * max(1.0, abs(np.real(best))) and np.isreal(z):
        best = np.real(best)
    return best


def _check_distance(J: JacobiWindow, z, gap_min: float = GAP_MIN):
    nb = J.norm_bound()
    x = complex(z)
    dist = abs(x.imag) if abs(x.real) <= nb else np.hypot(
        abs(x.real) - nb, x.imag)
    if dist < gap_min:
        raise TooCloseToSpectrum(
            f"dist(z, [-{nb:g}, {nb:g}]) = {dist:.2e} < {gap_min:g}")


def _tail_start_plus(J: JacobiWindow, z):
    """r_+(z, hi+1) from the right tail closure."""
    t = J.tail_right
    if t.kind == "truncate":
        return _truncated_start(J, z, +1)
    m = t.cycle_len
    steps = [(t.q[j], t.p[(j + 1) % m] ** 2) for j in range(m)]
    return _mobius_fixed_point(steps, z)


def _tail_start_minus(J: JacobiWindow, z):
    """r_-(z, lo-1) from the left tail closure."""
    t = J.tail_left
    if t.kind == "truncate":
        return _truncated_start(J, z, -1)
    m = t.cycle_len
    steps = [(t.q[j], t.p[j] ** 2) for j in range(m)]
    return _mobius_fixed_point(steps, z)


def _truncated_start(J: JacobiWindow, z, side: int):
    """Tail value by edge-padding, with depth doubling until agreement."""
    t = J.tail_right if side > 0 else J.tail_left
    q_edge = float(J.q[-1] if side > 0 else J.q[0])
    p_edge = float(J.p[-1] if side > 0 else J.p[0])
    prev = None
    depth = t.depth
    for _ in range(8):
        r = -1.0 / (z - q_edge)
        for _ in range(depth - 1):
            r = -1.0 / (z - q_edge + p_edge ** 2 * r)
        if prev is not None and abs(r - prev) <= CF_TOL * max(1.0, abs(r)):
            return r
        prev, depth = r, 2 * depth
    raise NonConvergence("truncated tail failed to stabilize under doubling")


def resolvent_plus(J: JacobiWindow, z, s: int, gap_min: float = GAP_MIN):
    """r_+(z, s) by downward recursion from the right tail closure."""
    _check_distance(J, z, gap_min)
    if s > J.hi + 1 and J.tail_right.kind != "truncate":
        rolled = J.slice_window(min(J.lo, s - 1), s - 1)
        return _tail_start_plus(rolled, z)
    r = _tail_start_plus(J, z)
    for k in range(J.hi, s - 1, -1):
        r = -1.0 / (z - J.q_at(k) + J.p_at(k + 1) ** 2 * r)
    return r


def resolvent_minus(J: JacobiWindow, z, s: int, gap_min: float = GAP_MIN):
    """r_-(z, s) by upward recursion from the left tail closure."""
    _check_distance(J, z, gap_min)
    if s < J.lo - 1 and J.tail_left.kind != "truncate":
        rolled = J.slice_window(s + 1, max(J.hi, s + 1))
        return _tail_start_minus(rolled, z)
    r = _tail_start_minus(J, z)
    for k in range(J.lo, s + 1):
        r = -1.0 / (z - J.q_at(k) + J.p_at(k) ** 2 * r)
    return r


def resolvent_minus_sweep(J: JacobiWindow, z, s_lo: int, s_hi: int,
                          gap_min: float = GAP_MIN) -> np.ndarray:
    """r_-(z, s) for every s in [s_lo, s_hi] in one left-to-right pass."""
    _check_distance(J, z, gap_min)
    ext = J if s_lo >= J.lo else J.slice_window(s_lo, max(J.hi, s_lo))
    r = _tail_start_minus(ext, z)
    for k in range(ext.lo, s_lo):
        r = -1.0 / (z - J.q_at(k) + J.p_at(k) ** 2 * r)
    out = np.empty(s_hi - s_lo + 1, dtype=complex if np.iscomplexobj(
        np.asarray(z)) else float)
    for i, k in enumerate(range(s_lo, s_hi + 1)):
        r = -1.0 / (z - J.q_at(k) + J.p_at(k) ** 2 * r)
        out[i] = r
    return out


def resolvent_plus_sweep(J: JacobiWindow, z, s_lo: int, s_hi: int,
                         gap_min: float = GAP_MIN) -> np.ndarray:
    """r_+(z, s) for every s in [s_lo, s_hi] in one right-to-left pass."""
    _check_distance(J, z, gap_min)
    ext = J if s_hi <= J.hi else J.slice_window(min(J.lo, s_hi), s_hi)
    r = _tail_start_plus(ext, z)
    for k in range(ext.hi, s_hi, -1):
        r = -1.0 / (z - J.q_at(k) + J.p_at(k + 1) ** 2 * r)
    out = np.empty(s_hi - s_lo + 1, dtype=complex if np.iscomplexobj(
        np.asarray(z)) else float)
    for i, k in enumerate(range(s_hi, s_lo - 1, -1)):
        r = -1.0 / (z - J.q_at(k) + J.p_at(k + 1) ** 2 * r)
        out[s_hi - s_lo - i] = r
    return out


def resolvent_matrix_W(J: JacobiWindow, z) -> np.ndarray:
    """The 2x2 matrix [<i|(J-z)^{-1}|j>]_{i,j in {0,1}}, assembled from the
    half-line resolvents as the inverse of [[1/r_-(z,0), p_1],
    [p_1, 1/r_+(z,1)]]."""
    rm = resolvent_minus(J, z, 0)
    rp = resolvent_plus(J, z, 1)
    p1 = J.p_at(1)
    if p1 <= SPLIT_TOL:
        return np.array([[rm, 0.0], [0.0, rp]])
    A = np.array([[1.0 / rm, p1], [p1, 1.0 / rp]])
    det = A[0, 0] * A[1, 1] - p1 * p1
    if abs(det) < np.max(np.abs(A)) ** 2 / 1e12:
        raise SingularPencil(f"2x2 pencil determinant {det:.3e} too small")
    return np.array([[A[1, 1], -p1], [-p1, A[0, 0]]]) / det


def entrywise_distance(J1: JacobiWindow, J2: JacobiWindow,
                       window: tuple[int, int] | None = None):
    """(dp, dq, dq + 2*dp) over the common window; the third component is a
    valid upper bound on the operator-norm difference of the tridiagonal
    operators restricted to agreeing tails."""
    lo = max(J1.lo, J2.lo) if window is None else window[0]
    hi = min(J1.hi, J2.hi) if window is None else window[1]
    if lo > hi:
        raise DisjointWindows(f"no overlap: [{J1.lo},{J1.hi}] vs [{J2.lo},{J2.hi}]")
    dp = max(abs(J1.p_at(k) - J2.p_at(k)) for k in range(lo, hi + 1))
    dq = max(abs(J1.q_at(k) - J2.q_at(k)) for k in range(lo, hi + 1))
    return dp, dq, dq + 2.0 * dp


def finite_section(J: JacobiWindow, lo: int, hi: int) -> np.ndarray:
    """Dense symmetric section on sites lo..hi (inclusive)."""
    n = hi - lo + 1
    A = np.zeros((n, n))
    for i, k in enumerate(range(lo, hi + 1)):
        A[i, i] = J.q_at(k)
        if i > 0:
            A[i - 1, i] = A[i, i - 1] = J.p_at(k)
    return A
