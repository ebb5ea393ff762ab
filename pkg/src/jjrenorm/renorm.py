"""The renormalization operator on Jacobi matrices.

Pipeline, per block index s (everything in monic normalization, invariant
interval [-xi, xi]):

1. branch values: for each critical point c of T, evaluate the seed's
   half-line resolvent at T(c) and pick one of the two consistent values of
   the block polynomial there,

       value = -1 / r_-(T(c), s)              (branch sign -1),
       value = -ptilde_{s+1}^2 r_+(T(c), s+1) (branch sign +1);

   either way the result carries the sign of T(c);
2. block polynomial: the unique monic degree-d polynomial taking those
   values at the critical points, via the interpolation

       B(z) = (z - q) T'(z)/d + sum_c [T'(z) / ((z-c) T''(c))] * value_c;

3. block matrix: the d-point measure with support at the roots of B and
   weights (T'(x_i)/d) / B'(x_i) is a probability measure; its d x d Jacobi
   matrix is the block (Stieltjes/Lanczos with full reorthogonalization);
4. glue: the coupling into the next block is ptilde_{s+1} divided by the
   product of the block's internal couplings.

The consistency gate for every sign and index convention in this module is
check_recurrence: value_s + ptilde_s^2 / value_{s-1} = T(c) - qtilde_s must
hold across consecutive blocks for both branch signs.
"""

import itertools
from dataclasses import dataclass

import numpy as np
import numpy.polynomial.polynomial as npoly
from scipy.linalg import eigvalsh_tridiagonal

from . import poly as P
from .exceptions import (
    DegenerateCritical,
    NegativeWeight,
    NonRealBlockSpectrum,
    PositivityViolation,
    SignViolation,
)
from .jacobi import (
    JacobiWindow,
    Tail,
    entrywise_distance,
    finite_section,
    resolvent_minus,
    resolvent_minus_sweep,
    resolvent_plus,
    resolvent_plus_sweep,
)
from .measures import lanczos_tridiag


@dataclass(frozen=True)
class BranchVector:
    """One sign per critical point (ascending order): selects one of the
    2^(d-1) solution branches."""

    signs: tuple

    def __post_init__(self):
        if not all(s in (-1, +1) for s in self.signs):
            raise ValueError("branch signs must be -1 or +1")

    @staticmethod
    def all_minus(d: int) -> "BranchVector":
        return BranchVector((-1,) * (d - 1))

    @staticmethod
    def all_plus(d: int) -> "BranchVector":
        return BranchVector((+1,) * (d - 1))

    @staticmethod
    def parse(text: str) -> "BranchVector":
        table = {"+": +1, "-": -1}
        try:
            return BranchVector(tuple(table[ch] for ch in text))
        except KeyError:
            raise ValueError(f"branch string must consist of '+'/'-': {text!r}")

    def negated(self) -> "BranchVector":
        return BranchVector(tuple(-s for s in self.signs))

    def __len__(self):
        return len(self.signs)

    def __str__(self):
        return "".join("+" if s > 0 else "-" for s in self.signs)


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely supported nonnegative measure (not necessarily normalized)."""

    support: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.support, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if s.shape != w.shape:
            raise ValueError("support and weights must match")
        if np.any(w <= 0):
            raise NegativeWeight("all weights must be positive")
        if len(s) > 1:
            scale = max(1.0, float(np.max(np.abs(s))))
            if np.min(np.diff(np.sort(s))) <= 1e-12 * scale:
                raise ValueError("support points must be distinct")
        object.__setattr__(self, "support", s)
        object.__setattr__(self, "weights", w)

    @property
    def mass(self) -> float:
        return float(self.weights.sum())


@dataclass(frozen=True)
class BlockSpec:
    """One d x d block of the renormalized matrix together with the data it
    was built from."""

    s: int
    crit_points: tuple
    branch_values: tuple        # block polynomial values at the crit points
    tpoly: tuple                # monic degree-d coefficients, ascending
    qdiag: np.ndarray           # diagonal entries q_{sd} .. q_{sd+d-1}
    poff: np.ndarray            # internal couplings p_{sd+1} .. p_{sd+d-1}
    glue_p: float               # coupling p_{sd+d} into the next block
    ptilde_next: float          # seed coupling ptilde_{s+1}

    @property
    def p1(self) -> float:
        return float(self.poff[0]) if len(self.poff) else float(self.glue_p)


# ---------------------------------------------------------------------------
# contraction constants

def contraction_bounds(T: P.HyperbolicPoly):
    """(entry factor, glue factor) of the renormalization's entrywise
    Lipschitz bounds, from the critical-value ratios R_c = |T(c)|/xi:

        entry factor = max_c (R_c + 1) / (R_c - 1)^2,
        glue factor  = max_c 1 / (R_c - 1) * (1 + entry/2).
    """
    _, vals = P.critical_data(T)
    R = np.abs(vals) / T.xi
    kappa = float(np.max((R + 1.0) / (R - 1.0) ** 2))
    glue = float(np.max(1.0 / (R - 1.0)) * (1.0 + kappa / 2.0))
    return kappa, glue


# ---------------------------------------------------------------------------
# step 1: branch values

def branch_values(seed: JacobiWindow, s: int, delta: BranchVector,
                  T: P.HyperbolicPoly) -> dict:
    """Block-polynomial values at the critical points for block s."""
    M = P.to_monic(T)
    pts, vals = P.critical_data(M)
    if len(delta) != len(pts):
        raise ValueError(f"branch vector length {len(delta)} != {len(pts)}")
    out = {}
    for c, Tc, sign in zip(pts, vals, delta.signs):
        if sign < 0:
            v = -1.0 / resolvent_minus(seed, Tc, s)
        else:
            ptil = seed.p_at(s + 1)
            v = -(ptil ** 2) * resolvent_plus(seed, Tc, s + 1)
        if v * Tc <= 0:
            raise SignViolation(
                f"block value {v:.6g} at c={c:.6g} has the wrong sign "
                f"(T(c)={Tc:.6g}); tail or branch misconfigured"
            )
        out[float(c)] = float(v)
    return out


def _branch_values_sweep(seed: JacobiWindow, s_lo: int, s_hi: int,
                         delta: BranchVector, M: P.HyperbolicPoly,
                         periodic_m: int | None = None) -> np.ndarray:
    """Branch values for all blocks in [s_lo, s_hi]: shape (n_blocks, d-1).

    For an exactly periodic seed of period m, pass periodic_m to evaluate
    resolvents with cyclic index arithmetic.
    """
    pts, vals = P.critical_data(M)
    n = s_hi - s_lo + 1
    out = np.empty((n, len(pts)))
    for i, (c, Tc, sign) in enumerate(zip(pts, vals, delta.signs)):
        if sign < 0:
            rm = resolvent_minus_sweep(seed, Tc, s_lo, s_hi)
            col = -1.0 / rm
        else:
            rp = resolvent_plus_sweep(seed, Tc, s_lo + 1, s_hi + 1)
            ptil = np.array([seed.p_at(s + 1) for s in range(s_lo, s_hi + 1)])
            col = -(ptil ** 2) * rp
        if np.any(col * Tc <= 0):
            raise SignViolation(
                f"wrong-sign block value at c={c:.6g} within blocks "
                f"[{s_lo}, {s_hi}]"
            )
        out[:, i] = col
    return out


# ---------------------------------------------------------------------------
# step 2: block polynomial

def interpolate_tpoly(tvals: dict, q: float, T: P.HyperbolicPoly) -> np.ndarray:
    """Monic degree-d polynomial through the branch values.

    B(z) = (z - q) T'(z)/d + sum_c [T'(z) / ((z - c) T''(c))] * tvals[c];
    each summand is polynomial because T'(c) = 0 at the nodes.
    """
    M = P.to_monic(T)
    if M.coeffs is None:
        raise ValueError("block interpolation needs expanded coefficients")
    d = M.degree
    dcoeffs = npoly.polyder(np.asarray(M.coeffs))
    tp = dcoeffs / d               # monic degree d-1
    out = npoly.polymul(np.array([-q, 1.0]), tp)
    for c, val in tvals.items():
        _, _, d2 = P.evaluate_with_derivatives(M, c)
        if abs(d2) < 1e-12:
            raise DegenerateCritical(f"T''({c}) vanishes")
        quotient, rem = npoly.polydiv(dcoeffs, np.array([-c, 1.0]))
        out = npoly.polyadd(out, quotient * (val / d2))
    out = np.asarray(out, dtype=float)
    # node-reproduction contract
    for c, val in tvals.items():
        got = npoly.polyval(c, out)
        if abs(got - val) > 1e-10 * max(1.0, abs(val)):
            raise ArithmeticError(
                f"interpolated block polynomial misses its node: "
                f"B({c}) = {got!r} vs {val!r}"
            )
    return out


# ---------------------------------------------------------------------------
# step 3: block matrix from its resolvent function

def block_from_tpoly(tpoly, T: P.HyperbolicPoly):
    """d x d Jacobi block whose (0,0) resolvent entry is (T'(z)/d)/B(z).

    Returns (qdiag, poff, measure): the block diagonal, internal couplings,
    and the underlying d-point probability measure.
    """
    M = P.to_monic(T)
    d = M.degree
    b = np.asarray(tpoly, dtype=float)
    roots = np.roots(b[::-1])
    scale = np.maximum(1.0, np.abs(roots))
    if np.any(np.abs(roots.imag) > 1e-9 * scale):
        raise NonRealBlockSpectrum(
            f"block polynomial has non-real roots "
            f"(max |imag| = {np.max(np.abs(roots.imag)):.3e})"
        )
    x = np.sort(roots.real)
    db = npoly.polyder(b)
    for _ in range(2):
        x = x - npoly.polyval(x, b) / npoly.polyval(x, db)
    tp = npoly.polyder(np.asarray(M.coeffs)) / d
    w = npoly.polyval(x, tp) / npoly.polyval(x, db)
    if np.any(w <= 0):
        raise NegativeWeight(
            f"block measure has nonpositive weight (min {np.min(w):.3e}): "
            "branch values violate the positivity structure"
        )
    if abs(w.sum() - 1.0) > 1e-10:
        raise ArithmeticError(f"block weights sum to {w.sum()!r}, not 1")
    alphas, betas = lanczos_tridiag(x, w, d, d - 1)
    qdiag, poff = alphas, betas
    if abs(qdiag[0] - M.q) > 1e-10 * max(1.0, abs(M.q)):
        raise ArithmeticError(
            f"block top-left entry {qdiag[0]!r} != q = {M.q!r}"
        )
    return qdiag, poff, DiscreteMeasure(x, w)


# ---------------------------------------------------------------------------
# steps 1-4 combined

def compute_blocks(seed: JacobiWindow, delta: BranchVector,
                   T: P.HyperbolicPoly, s_lo: int, s_hi: int) -> list[BlockSpec]:
    """Blocks s_lo..s_hi of the renormalized matrix (monic scale)."""
    M = P.to_monic(T)
    _require_admissible(seed, M)
    pts, _ = P.critical_data(M)
    values = _branch_values_sweep(seed, s_lo, s_hi, delta, M)
    blocks = []
    for i, s in enumerate(range(s_lo, s_hi + 1)):
        tvals = {float(c): float(v) for c, v in zip(pts, values[i])}
        tpoly = interpolate_tpoly(tvals, M.q, M)
        qdiag, poff, _ = block_from_tpoly(tpoly, M)
        ptil = seed.p_at(s + 1)
        if ptil < 0:
            raise PositivityViolation(f"seed coupling at {s + 1} negative")
        glue = ptil / float(np.prod(poff)) if len(poff) else ptil
        blocks.append(BlockSpec(s, tuple(pts), tuple(values[i]),
                                tuple(float(v) for v in tpoly),
                                qdiag, poff, float(glue), float(ptil)))
    return blocks


def glue(blocks: list[BlockSpec]) -> JacobiWindow:
    """Assemble consecutive blocks into a coefficient window.

    Block s occupies sites s*d .. s*d + d - 1 and the coupling p_{s*d} into
    it is the glue of block s-1, so the emitted window starts at the second
    block of the list (the first only contributes its glue).
    """
    blocks = sorted(blocks, key=lambda b: b.s)
    if len(blocks) < 2:
        raise ValueError(
            "need at least two consecutive blocks: the left coupling of a "
            "block is the glue of its predecessor"
        )
    for a, b in zip(blocks, blocks[1:]):
        if b.s != a.s + 1:
            raise ValueError("blocks must be consecutive")
    d = len(blocks[0].qdiag)
    qs, ps = [], []
    for prev, b in zip(blocks, blocks[1:]):
        qs.extend(b.qdiag)
        ps.append(prev.glue_p)
        ps.extend(b.poff)
    if any(v < 0 for v in ps):
        raise PositivityViolation("negative coupling in glued window")
    lo = blocks[1].s * d
    return JacobiWindow(lo, np.asarray(ps), np.asarray(qs),
                        Tail.truncate(), Tail.truncate())


def _require_admissible(seed: JacobiWindow, M: P.HyperbolicPoly):
    P.check_interval_invariance(M)
    nb = seed.norm_bound()
    if nb <= M.xi * (1.0 + 1e-9):
        return
    # the crude surrogate overshoots; fall back to section eigenvalues
    # (compressions of a self-adjoint operator stay inside its numerical
    # range, so this never rejects an admissible seed by itself); truncated
    # tails are excluded because their edge padding is not part of the data
    half = max(len(seed.q), 128)
    lo = seed.lo if seed.tail_left.kind == "truncate" else seed.lo - half
    hi = seed.hi if seed.tail_right.kind == "truncate" else seed.hi + half
    diag = np.array([seed.q_at(k) for k in range(lo, hi + 1)])
    off = np.array([seed.p_at(k) for k in range(lo + 1, hi + 1)])
    ev = eigvalsh_tridiagonal(diag, off)
    top = float(np.max(np.abs(ev)))
    if top > M.xi * (1.0 + 1e-6):
        raise ValueError(
            f"seed section spectrum reaches {top:g}, beyond the invariant "
            f"half-width {M.xi:g}; rescale the seed"
        )


def _renormalize_monic(seed: JacobiWindow, delta: BranchVector,
                       M: P.HyperbolicPoly,
                       window: tuple[int, int] | None) -> JacobiWindow:
    d = M.degree
    if seed.is_exactly_periodic:
        m = len(seed.q)
        blocks = compute_blocks(seed, delta, M, 0, m - 1)
        pc = np.empty(m * d)
        qc = np.empty(m * d)
        for b in blocks:
            s = b.s
            qc[s * d: s * d + d] = b.qdiag
            prev = blocks[(s - 1) % m]
            pc[s * d] = prev.glue_p
            pc[s * d + 1: s * d + d] = b.poff
        return JacobiWindow.from_cycle(pc, qc, offset=0)
    if window is None:
        window = (seed.lo * d, (seed.hi + 1) * d - 1)
    s_lo = int(np.floor(window[0] / d)) - 1
    s_hi = int(np.ceil((window[1] + 1) / d)) - 1
    blocks = compute_blocks(seed, delta, M, s_lo, s_hi)
    return glue(blocks)


def renormalize(seed: JacobiWindow, delta: BranchVector, T: P.HyperbolicPoly,
                window: tuple[int, int] | None = None) -> JacobiWindow:
    """Solve the renormalization equation for the given branch vector.

    The output matrix satisfies, on its window,

        V* (z - J)^{-1} V = (T(z) - seed)^{-1} T'(z)/d,   V|k> = |dk>,

    with spectrum on T^{-1} of the seed interval.  Unit-normalized input is
    conjugated to monic scale internally and the output scaled back, so
    towers over unit-normalized polynomials compose via the chain rule.
    """
    if T.normalization == "unit":
        M = P.to_monic(T)
        lam = M.xi
        out = _renormalize_monic(_scaled(seed, lam), delta, M, window)
        return _scaled(out, 1.0 / lam)
    return _renormalize_monic(seed, delta, T, window)


def _scaled(J: JacobiWindow, factor: float) -> JacobiWindow:
    def tail(t):
        if t.kind == "truncate":
            return t
        return Tail(t.kind, tuple(factor * v for v in t.p),
                    tuple(factor * v for v in t.q), t.depth)

    return JacobiWindow(J.offset, factor * np.asarray(J.p),
                        factor * np.asarray(J.q),
                        tail(J.tail_left), tail(J.tail_right))


# ---------------------------------------------------------------------------
# checkers

def check_recurrence(blocks: list[BlockSpec], seed: JacobiWindow,
                     T: P.HyperbolicPoly) -> float:
    """Master consistency gate: across consecutive blocks and every critical
    point, value_s + ptilde_s^2 / value_{s-1} must equal T(c) - qtilde_s.
    Returns the maximum residual relative to |T(c)| (pass <= 1e-9)."""
    M = P.to_monic(T)
    pts, vals = P.critical_data(M)
    blocks = sorted(blocks, key=lambda b: b.s)
    worst = 0.0
    for prev, cur in zip(blocks, blocks[1:]):
        if cur.s != prev.s + 1:
            continue
        s = cur.s
        ptil = seed.p_at(s)
        qtil = seed.q_at(s)
        for c, Tc, v_cur, v_prev in zip(pts, vals, cur.branch_values,
                                        prev.branch_values):
            res = abs(v_cur + ptil ** 2 / v_prev - (Tc - qtil))
            worst = max(worst, res / abs(Tc))
    return worst


def _default_z_samples(xi: float, n: int = 8) -> list[float]:
    dists = xi * 4.0 ** (np.arange(n // 2) / (n // 2 - 1.0))
    out = []
    for dv in dists:
        out.extend([xi + dv, -(xi + dv)])
    return out


def check_renorm_equation(J: JacobiWindow, seed: JacobiWindow,
                          T: P.HyperbolicPoly, z_samples=None,
                          n_sec: int = 600) -> float:
    """Compare compressed finite sections of (z-J)^{-1} against
    (T(z)-seed)^{-1} T'(z)/d on a central window; returns the maximum entry
    deviation over the z samples.  The residual is truncation-aware: it must
    decay when n_sec doubles."""
    xi_eff = T.xi
    d = T.degree
    if z_samples is None:
        z_samples = _default_z_samples(xi_eff)
    N = n_sec // 2
    lo_j, hi_j = J.available_range()
    N = min(N, hi_j, -lo_j)
    lo_s, hi_s = seed.available_range()
    Mseed = min(N // d, hi_s, -lo_s)
    N = Mseed * d
    Mc = Mseed // 2
    A = finite_section(J, -N, N)
    B = finite_section(seed, -Mseed, Mseed)
    sel = np.array([d * m + N for m in range(-Mseed, Mseed + 1)])
    worst = 0.0
    for z in z_samples:
        Tz, dTz, _ = P.evaluate_with_derivatives(T, z)
        G = np.linalg.inv(z * np.eye(2 * N + 1) - A)
        Gc = G[np.ix_(sel, sel)]
        Gt = np.linalg.inv(Tz * np.eye(2 * Mseed + 1) - B) * (dTz / d)
        ctr = slice(Mseed - Mc, Mseed + Mc + 1)
        worst = max(worst, float(np.max(np.abs(Gc[ctr, ctr] - Gt[ctr, ctr]))))
    return worst


def _divided_difference_matrix(coeffs, z: float, A: np.ndarray) -> np.ndarray:
    """(T(z) - T(A)) / (z - A) as a matrix polynomial via synthetic division:
    the Horner partials of T at z are the coefficients in A."""
    c = np.asarray(coeffs, dtype=float)
    d = len(c) - 1
    b = np.empty(d)            # b[k] multiplies A^k
    b[d - 1] = c[d]
    for k in range(d - 1, 0, -1):
        b[k - 1] = c[k] + z * b[k]
    out = b[d - 1] * np.eye(len(A))
    for k in range(d - 2, -1, -1):
        out = out @ A + b[k] * np.eye(len(A))
    return out


def check_polynomial_form(J: JacobiWindow, seed: JacobiWindow,
                          T: P.HyperbolicPoly, z_samples=None,
                          n_sec: int = 400):
    """Residuals of the two polynomial forms of the renormalization
    equation: res1 = max interior entry of |V* T(J) - seed V*| and
    res2 = max deviation of V* [(T(z)-T(J))/(z-J)] V from T'(z)/d * I."""
    coeffs = T.coeffs
    if coeffs is None:
        raise ValueError("polynomial-form check needs expanded coefficients")
    d = T.degree
    xi_eff = T.xi
    if z_samples is None:
        z_samples = _default_z_samples(xi_eff, 4)
    N = n_sec // 2
    lo_j, hi_j = J.available_range()
    N = min(N, hi_j, -lo_j)
    A = finite_section(J, -N, N)
    margin = d * d
    # T(A) by Horner
    c = np.asarray(coeffs, dtype=float)
    TA = c[-1] * np.eye(len(A))
    for k in range(len(c) - 2, -1, -1):
        TA = TA @ A + c[k] * np.eye(len(A))
    res1 = 0.0
    m_lo = int(np.ceil((-N + margin) / d))
    m_hi = int(np.floor((N - margin) / d))
    for m in range(m_lo, m_hi + 1):
        row = TA[d * m + N]
        for l in range(-N + margin, N - margin + 1):
            want = seed.q_at(m) if l == d * m else (
                seed.p_at(max(m, l // d)) if (l % d == 0 and abs(l // d - m) == 1)
                else 0.0)
            res1 = max(res1, abs(row[l + N] - want))
    res2 = 0.0
    sel = np.array([d * m + N for m in range(m_lo, m_hi + 1)])
    for z in z_samples:
        D = _divided_difference_matrix(coeffs, z, A)
        Dc = D[np.ix_(sel, sel)]
        _, dTz, _ = P.evaluate_with_derivatives(T, z)
        res2 = max(res2, float(np.max(np.abs(Dc - (dTz / d) * np.eye(len(sel))))))
    return float(res1), float(res2)


def critical_point_measure(block: BlockSpec, T: P.HyperbolicPoly):
    """Spectral measure of the block with its first row and column removed:
    supported at the critical points with weights -d * value_c / T''(c).

    Verifies mass = p1^2 and the glue identity
    sum_c weight_c / value_c^2 = glue^2 / ptilde^2; returns
    (DiscreteMeasure, max relative residual)."""
    M = P.to_monic(T)
    d = M.degree
    weights = []
    for c, v in zip(block.crit_points, block.branch_values):
        _, _, d2 = P.evaluate_with_derivatives(M, c)
        w = -d * v / d2
        if w <= 0:
            raise NegativeWeight(
                f"critical-point weight {w:.3e} at c={c:.6g} nonpositive"
            )
        weights.append(w)
    weights = np.asarray(weights)
    meas = DiscreteMeasure(np.asarray(block.crit_points), weights)
    p1sq = block.p1 ** 2
    res_mass = abs(meas.mass - p1sq) / p1sq
    lhs = float(np.sum(weights / np.asarray(block.branch_values) ** 2))
    rhs = block.glue_p ** 2 / block.ptilde_next ** 2
    res_glue = abs(lhs - rhs) / abs(rhs)
    return meas, float(max(res_mass, res_glue))


def block_polynomials(J: JacobiWindow, seed: JacobiWindow, d: int, s: int = 0):
    """First-kind, second-kind, and obliterated-second-kind polynomials of
    block s, reconstructed from the matrix entries by the three-term
    recursion (ascending coefficient arrays, orthonormal normalization)."""
    base = s * d
    qs = [J.q_at(base + k) for k in range(d)]
    ps = [J.p_at(base + k) for k in range(1, d + 1)]   # ps[-1] is the glue
    Pk = [np.array([1.0])]
    Qk = [np.array([0.0]), np.array([1.0 / ps[0]])]
    prev = np.array([0.0])
    for k in range(d):
        nxt = npoly.polysub(
            npoly.polymul(np.array([-qs[k], 1.0]), Pk[k]),
            (ps[k - 1] if k else 0.0) * prev)
        prev = Pk[k]
        Pk.append(nxt / ps[k])
    prevq = Qk[0]
    for k in range(1, d):
        nxt = npoly.polysub(
            npoly.polymul(np.array([-qs[k], 1.0]), Qk[k]),
            ps[k - 1] * prevq)
        prevq = Qk[k]
        Qk.append(nxt / ps[k])
    Pd, Qd = Pk[d], Qk[d]
    p1 = ps[0]
    R = npoly.polysub(npoly.polymul(np.array([-qs[0], 1.0]), Qd), Pd) / p1 ** 2
    return Pd, Qd, np.asarray(R)


def check_re0(J: JacobiWindow, seed: JacobiWindow, T: P.HyperbolicPoly,
              z_samples=None) -> float:
    """Resolvent pullback identities at block 0:

        1/rt_-(T(z), 0)      = T'(z)/d / r_-(z, 0) + p1^2 pt1 R0(z),
        pt1^2 rt_+(T(z), 1)  = p1^2 r_+(z, 1) T'(z)/d + p1^2 pt1 R0(z),

    where rt/r are seed/output half-line resolvents and R0 is the
    obliterated-block second-kind polynomial.  Returns the max relative
    residual over the samples."""
    d = T.degree
    if z_samples is None:
        z_samples = _default_z_samples(T.xi, 4)
    _, _, R0 = block_polynomials(J, seed, d)
    p1 = J.p_at(1)
    pt1 = seed.p_at(1)
    worst = 0.0
    for z in z_samples:
        Tz, dTz, _ = P.evaluate_with_derivatives(T, z)
        tp = dTz / d
        corr = p1 ** 2 * pt1 * npoly.polyval(z, R0)
        lhs1 = 1.0 / resolvent_minus(seed, Tz, 0)
        rhs1 = tp / resolvent_minus(J, z, 0) + corr
        worst = max(worst, abs(lhs1 - rhs1) / max(abs(lhs1), 1.0))
        lhs2 = pt1 ** 2 * resolvent_plus(seed, Tz, 1)
        rhs2 = p1 ** 2 * resolvent_plus(J, z, 1) * tp + corr
        worst = max(worst, abs(lhs2 - rhs2) / max(abs(lhs2), 1.0))
    return float(worst)


# ---------------------------------------------------------------------------
# branch enumeration and duality

def enumerate_branches(seed: JacobiWindow, T: P.HyperbolicPoly,
                       window: tuple[int, int] | None = None):
    """All 2^(d-1) solutions, as (BranchVector, JacobiWindow) pairs."""
    d = T.degree
    if d - 1 > 8:
        raise ValueError("branch enumeration capped at 2^8 solutions")
    out = []
    for signs in itertools.product((-1, +1), repeat=d - 1):
        dv = BranchVector(signs)
        out.append((dv, renormalize(seed, dv, T, window)))
    return out


def dual_branch_check(seed: JacobiWindow, delta: BranchVector,
                      T: P.HyperbolicPoly,
                      window: tuple[int, int] | None = None) -> float:
    """Residual of the branch duality: reflecting the solution for delta and
    shifting by d-1 must solve the equation for the reflected seed with the
    negated branch vector."""
    d = T.degree
    J = renormalize(seed, delta, T, window)
    lhs = J.reflected().shifted(1 - d)
    rhs = renormalize(seed.reflected(), delta.negated(), T, window)
    lo = max(lhs.lo, rhs.lo)
    hi = min(lhs.hi, rhs.hi)
    dp, dq, _ = entrywise_distance(lhs, rhs, (lo + 1, hi))
    return float(max(dp, dq))


# ---------------------------------------------------------------------------
# empirical contraction ratios

def lipschitz_ratios(T: P.HyperbolicPoly, delta: BranchVector,
                     seed_pairs, window_blocks: int = 24):
    """Entrywise contraction ratios over seed pairs.

    For each pair, renormalizes both seeds and reports
    (max_k |dp_k| / bound) separately over internal couplings and glue
    couplings, where bound = dq + 2 dp of the seed difference.
    """
    M = P.to_monic(T)
    d = M.degree
    entry_ratios, glue_ratios = [], []
    for J1, J2 in seed_pairs:
        _, _, denom = entrywise_distance(J1, J2)
        if denom == 0:
            continue
        s_lo, s_hi = -window_blocks // 2, window_blocks // 2
        b1 = compute_blocks(J1, delta, M, s_lo, s_hi)
        b2 = compute_blocks(J2, delta, M, s_lo, s_hi)
        de = max(float(np.max(np.abs(x.poff - y.poff)))
                 for x, y in zip(b1, b2))
        dg = max(abs(x.glue_p - y.glue_p) for x, y in zip(b1, b2))
        entry_ratios.append(de / denom)
        glue_ratios.append(dg / denom)
    return np.asarray(entry_ratios), np.asarray(glue_ratios)
