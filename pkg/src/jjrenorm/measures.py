"""Independent spectral-measure oracles.

Backward orbits discretize the balanced measure on the Julia set (grids are
useless: the set has zero Lebesgue measure, while backward orbits live on it
by construction).  The Stieltjes procedure with full reorthogonalization
turns any discrete measure into Jacobi recurrence coefficients, and a power
iteration with weights 1/T'(y)^2 produces the transfer-operator eigenmeasure
that the left half of the renormalization fixed point must reproduce.
"""

from dataclasses import dataclass

import numpy as np

from . import poly as P
from .exceptions import NonConvergence
from .jacobi import JacobiWindow

RUELLE_ATOM_CAP = 2 ** 22


@dataclass(frozen=True)
class WeightedSamples:
    """Finitely many weighted points; weights are nonnegative and sum to 1."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if pts.shape != w.shape:
            raise ValueError("points and weights must have equal shape")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1 (got {w.sum()!r})")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    def moment(self, k: int) -> float:
        return float(np.sum(self.weights * self.points ** k))


def lanczos_tridiag(points, weights, n: int, n_off: int | None = None):
    """Recurrence coefficients (q_0..q_{n-1}, p_1..p_{n_off}) of the
    discrete measure sum w_i delta(x_i), by Lanczos on diag(points) started
    from sqrt(weights), with two passes of full reorthogonalization.

    n_off defaults to n; pass n_off = n-1 to read off an exactly-n-point
    measure (whose p_n vanishes).  Degenerate measures (fewer effective
    points than requested) raise ValueError.
    """
    x = np.asarray(points, dtype=float)
    w = np.asarray(weights, dtype=float)
    if n < 1:
        raise ValueError("need at least one coefficient")
    n_off = n if n_off is None else n_off
    if not (n - 1 <= n_off <= n):
        raise ValueError("n_off must be n or n-1")
    v = np.sqrt(w)
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise ValueError("zero measure")
    v = v / nrm
    V = np.zeros((n + 1, len(x)))
    V[0] = v
    alphas = np.zeros(n)
    betas = np.zeros(n_off)
    vprev = np.zeros(len(x))
    beta = 0.0
    for k in range(n):
        u = x * V[k]
        alphas[k] = V[k] @ u
        if k == n - 1 and n_off < n:
            break
        u = u - alphas[k] * V[k] - beta * vprev
        for _ in range(2):
            u = u - V[: k + 1].T @ (V[: k + 1] @ u)
        beta = float(np.linalg.norm(u))
        if beta < 1e-13 * max(1.0, np.max(np.abs(x))):
            raise ValueError(
                f"measure is degenerate at step {k + 1}: "
                "not enough distinct support points"
            )
        vprev = V[k]
        V[k + 1] = u / beta
        betas[k] = beta
    return alphas, betas


# ---------------------------------------------------------------------------
# balanced measure

def balanced_measure(T: P.HyperbolicPoly, depth: int) -> WeightedSamples:
    """Equal weights on the depth-`depth` backward orbit of the rightmost
    fixed point: the canonical discretization of the balanced measure."""
    pts = P.julia_samples(T, depth)
    w = np.full(len(pts), 1.0 / len(pts))
    return WeightedSamples(pts, w)


def spread_once(m: WeightedSamples, T: P.HyperbolicPoly) -> WeightedSamples:
    """One equal-weight pullback step: each atom at x splits into the d
    preimages of x, each carrying weight w/d.  The balanced measure is the
    fixed point of this map."""
    d = T.degree
    y = P.preimages_many(T, m.points)
    w = np.repeat(m.weights / d, d)
    return WeightedSamples(y.reshape(-1), w)


def renorm_identity_residual(m: WeightedSamples, T: P.HyperbolicPoly,
                             z_samples=None) -> float:
    """max_z | int (T'(z)/d)/(T(z)-x) dm(x) - int dm(x)/(z-x) |.

    Both sides agree exactly on the balanced measure (the pullback-invariance
    in Stieltjes-transform form).
    """
    xi = T.xi
    if z_samples is None:
        z_samples = [2 * xi, -2 * xi, 3 * xi, -3 * xi, 5 * xi, -5 * xi]
    d = T.degree
    res = 0.0
    for z in z_samples:
        Tz, dTz, _ = P.evaluate_with_derivatives(T, z)
        lhs = np.sum(m.weights * (dTz / d) / (Tz - m.points))
        rhs = np.sum(m.weights / (z - m.points))
        res = max(res, abs(lhs - rhs))
    return res


def jacobi_from_measure(m: WeightedSamples, n_coeffs: int):
    """One-sided Jacobi coefficients of a discrete measure.

    Guard: when the measure is a sampling approximation, coefficients are
    trusted only up to the quadrature-exactness margin, so n_coeffs may not
    exceed max(2, N//4) for N support points.
    """
    N = len(m.points)
    if n_coeffs > max(2, N // 4):
        raise ValueError(
            f"n_coeffs={n_coeffs} exceeds the exactness margin "
            f"max(2, {N}//4)={max(2, N // 4)}"
        )
    if n_coeffs == N and n_coeffs >= 2:
        # exactly determined measure: its p_N vanishes identically
        al, be = lanczos_tridiag(m.points, m.weights, n_coeffs, n_coeffs - 1)
        return al, np.append(be, 0.0)
    return lanczos_tridiag(m.points, m.weights, n_coeffs)


def right_half_coefficients(J: JacobiWindow, n: int):
    """(q_0..q_{n-1}, p_1..p_n) of the half-line part on sites >= 0."""
    qs = np.array([J.q_at(k) for k in range(n)])
    ps = np.array([J.p_at(k) for k in range(1, n + 1)])
    return qs, ps


def left_half_coefficients_reflected(J: JacobiWindow, n: int):
    """Coefficients of the sites <= -1 half-line read outward from the
    split: q'_j = q_{-1-j}, p'_j = p_{-j}."""
    qs = np.array([J.q_at(-1 - j) for j in range(n)])
    ps = np.array([J.p_at(-j) for j in range(1, n + 1)])
    return qs, ps


def compare_fixedpoint_balanced(T: P.HyperbolicPoly, depth: int,
                                n_coeffs: int, J: JacobiWindow) -> float:
    """Flagship cross-validation: Jacobi coefficients of the balanced
    measure against the right half of the renormalization fixed point."""
    al, be = jacobi_from_measure(balanced_measure(T, depth), n_coeffs)
    qs, ps = right_half_coefficients(J, n_coeffs)
    return float(max(np.max(np.abs(al - qs)), np.max(np.abs(be - ps))))


def compare_fixedpoint_ruelle(T: P.HyperbolicPoly, eigen: WeightedSamples,
                              n_coeffs: int, J: JacobiWindow) -> float:
    """Companion cross-validation: coefficients of the 1/T'^2 transfer
    eigenmeasure against the reflected left half of the fixed point."""
    al, be = jacobi_from_measure(eigen, n_coeffs)
    qs, ps = left_half_coefficients_reflected(J, n_coeffs)
    return float(max(np.max(np.abs(al - qs)), np.max(np.abs(be - ps))))


# ---------------------------------------------------------------------------
# transfer-operator eigenmeasure, weight 1/T'^2

def ruelle_l2_eigen(T: P.HyperbolicPoly, grid_depth: int = 0,
                    iters: int = 24, rtol: float = 1e-10):
    """Power iteration of the adjoint weighted transfer operator.

    Each atom at x with weight w spawns atoms at the preimages y of x with
    weights w / T'(y)^2; total mass is renormalized every step and its
    pre-normalization ratio estimates the eigenvalue.  Returns
    (WeightedSamples, rho) once successive eigenvalue estimates agree to
    rtol; raises NonConvergence otherwise.
    """
    if grid_depth > 0:
        start = balanced_measure(T, grid_depth)
        pts, w = start.points, start.weights
    else:
        pts = np.array([P.rightmost_fixed_point(T)])
        w = np.array([1.0])
    d = T.degree
    rho_prev = None
    for _ in range(iters):
        if len(pts) * d > RUELLE_ATOM_CAP:
            raise NonConvergence(
                f"atom count would exceed the cap {RUELLE_ATOM_CAP} before "
                "the eigenvalue estimate converged"
            )
        y = P.preimages_many(T, pts)
        new_w = np.repeat(w, d) / P.derivative(T, y.reshape(-1)) ** 2
        mass = float(new_w.sum())
        pts, w = y.reshape(-1), new_w / mass
        if rho_prev is not None and abs(mass - rho_prev) <= rtol * abs(mass):
            return WeightedSamples(pts, w), mass
        rho_prev = mass
    raise NonConvergence(
        f"eigenvalue estimate did not stabilize to {rtol:g} in {iters} steps"
    )


def ruelle_eigen_residual(m: WeightedSamples, rho: float,
                          T: P.HyperbolicPoly, max_order: int = 2) -> float:
    """max_k | int x^k d(L2* m) - rho * int x^k dm | for k = 0..max_order."""
    d = T.degree
    y = P.preimages_many(T, m.points).reshape(-1)
    ws = np.repeat(m.weights, d) / P.derivative(T, y) ** 2
    res = 0.0
    for k in range(max_order + 1):
        res = max(res, abs(float(np.sum(ws * y ** k)) - rho * m.moment(k)))
    return res
