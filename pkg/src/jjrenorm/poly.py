"""Real polynomials with real Julia sets: critical data, normalizations,
composition, preimages, and backward-orbit sampling.

Two normalizations are used throughout the package:

* ``unit``  -- the invariant interval is [-1, 1] (half-width ``xi = 1``);
* ``monic`` -- leading coefficient 1, invariant interval [-xi, xi], and the
  subleading data ``q`` defined by ``T(z) = z^d - q*d*z^(d-1) + ...``.

The two are conjugate: ``M(w) = lam * T(w/lam)`` with ``lam = a_d^(1/(d-1))``
is monic whenever ``T`` has positive leading coefficient ``a_d``, and then
``xi = lam``.

Compositions are kept in factored form and always *evaluated* through the
factor chain; expanded coefficients are materialized only while the degree
stays at or below ``DEGREE_CAP`` (monomial coefficients of high-degree
compositions overflow any useful float range).
"""

from dataclasses import dataclass, field

import numpy as np
import numpy.polynomial.polynomial as npoly

from .exceptions import ComplexPreimage, DegenerateCritical, NonRealCritical

DEGREE_CAP = 64
IMAG_TOL = 1e-10
MEMORY_CAP = 2 ** 24


@dataclass(frozen=True)
class HyperbolicPoly:
    """A real polynomial with real Julia set.

    ``factors`` holds the composition chain as ascending coefficient tuples,
    applied left to right (``factors[0]`` acts first).  ``coeffs`` is the
    expanded ascending coefficient tuple, or ``None`` when the degree exceeds
    ``DEGREE_CAP``.
    """

    factors: tuple
    normalization: str
    xi: float
    q: float
    coeffs: tuple | None

    @property
    def degree(self) -> int:
        d = 1
        for f in self.factors:
            d *= len(f) - 1
        return d

    def __call__(self, x):
        return evaluate(self, x)


@dataclass(frozen=True)
class PolySequence:
    """An ordered list of polynomials driving a mixed tower."""

    polys: tuple

    @property
    def degrees(self) -> list[int]:
        return [t.degree for t in self.polys]

    @property
    def cumulative_degrees(self) -> list[int]:
        out, acc = [], 1
        for d in self.degrees:
            acc *= d
            out.append(acc)
        return out


# ---------------------------------------------------------------------------
# evaluation through the factor chain

def evaluate(T: HyperbolicPoly, x):
    v = np.asarray(x, dtype=float)
    for f in T.factors:
        v = npoly.polyval(v, np.asarray(f))
    return v if np.ndim(x) else float(v)


def evaluate_with_derivatives(T: HyperbolicPoly, x):
    """Return (T(x), T'(x), T''(x)), propagated through the factor chain."""
    v = np.asarray(x, dtype=float)
    d1 = np.ones_like(v)
    d2 = np.zeros_like(v)
    for f in T.factors:
        c = np.asarray(f)
        fv = npoly.polyval(v, c)
        f1 = npoly.polyval(v, npoly.polyder(c))
        f2 = npoly.polyval(v, npoly.polyder(c, 2))
        d2 = f2 * d1 * d1 + f1 * d2
        d1 = f1 * d1
        v = fv
    if np.ndim(x):
        return v, d1, d2
    return float(v), float(d1), float(d2)


def derivative(T: HyperbolicPoly, x):
    return evaluate_with_derivatives(T, x)[1]


# ---------------------------------------------------------------------------
# construction

def _expand(factors: tuple) -> tuple | None:
    deg = 1
    for f in factors:
        deg *= len(f) - 1
    if deg > DEGREE_CAP:
        return None
    c = np.array([0.0, 1.0])
    for f in factors:
        # compose f after current chain: Horner in the accumulated polynomial
        acc = np.array([f[-1]])
        for a in reversed(f[:-1]):
            acc = npoly.polymul(acc, c)
            acc = npoly.polyadd(acc, [a])
        c = acc
    return tuple(float(v) for v in c)


def _newton_polish(x, c):
    dc = npoly.polyder(c)
    for _ in range(2):
        fx = npoly.polyval(x, c)
        f1 = npoly.polyval(x, dc)
        safe = np.abs(f1) > 1e-300
        x = np.where(safe, x - np.where(safe, fx, 0.0) / np.where(safe, f1, 1.0), x)
    return x


def _real_roots(coeffs, imag_tol=IMAG_TOL, err=NonRealCritical):
    """Real roots of an ascending-coefficient polynomial via the companion
    matrix, polished by two Newton steps; raises if any root is non-real."""
    c = np.asarray(coeffs, dtype=float)
    c = np.trim_zeros(c, "b")
    if len(c) <= 1:
        return np.array([])
    roots = np.roots(c[::-1])
    scale = np.maximum(1.0, np.abs(roots))
    if np.any(np.abs(roots.imag) > imag_tol * scale):
        raise err(f"non-real root: max |imag| = {np.max(np.abs(roots.imag)):.3e}")
    return np.sort(_newton_polish(roots.real, c))


def _real_root_subset(coeffs, imag_tol=1e-8):
    """The real roots only; complex pairs are silently dropped."""
    c = np.asarray(coeffs, dtype=float)
    c = np.trim_zeros(c, "b")
    if len(c) <= 1:
        return np.array([])
    roots = np.roots(c[::-1])
    scale = np.maximum(1.0, np.abs(roots))
    real = roots[np.abs(roots.imag) <= imag_tol * scale].real
    return np.sort(_newton_polish(real, c))


def _validate(T: HyperbolicPoly):
    if T.degree < 2:
        raise ValueError("degree must be >= 2")
    pts, vals = critical_data(T)
    if np.any(np.abs(vals) <= T.xi):
        raise NonRealCritical(
            "critical value inside the invariant interval: not expanding"
        )
    return T


def from_coeffs(c, normalization: str = "unit") -> HyperbolicPoly:
    """Build a polynomial from ascending coefficients and validate the
    expanding property (all critical values outside the invariant interval)."""
    c = tuple(float(v) for v in c)
    if len(c) < 3 or c[-1] == 0.0:
        raise ValueError("need degree >= 2 with nonzero leading coefficient")
    d = len(c) - 1
    if normalization == "unit":
        xi, q = 1.0, 0.0
    elif normalization == "monic":
        if abs(c[-1] - 1.0) > 1e-13:
            raise ValueError("monic normalization requires leading coefficient 1")
        # q from T(z) = z^d - q d z^(d-1) + ...
        q = -c[-2] / d
        xi = _invariant_halfwidth(c)
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    T = HyperbolicPoly((c,), normalization, xi, q, c)
    return _validate(T)


def _invariant_halfwidth(c) -> float:
    """Largest real fixed point of the polynomial (rightmost point of the
    Julia set for the admissible class); used as xi for monic input."""
    shifted = list(c)
    shifted[1] -= 1.0
    real = _real_root_subset(shifted)
    if len(real) == 0:
        raise ValueError("no real fixed point found")
    return float(np.max(np.abs(real)))


def quadratic(rho: float) -> HyperbolicPoly:
    """T(z) = rho*(z^2 - 1) + 1 in unit normalization; expanding for rho > 2."""
    if rho <= 2:
        raise ValueError("quadratic family is expanding only for rho > 2")
    return from_coeffs((1.0 - rho, 0.0, rho))


def chebyshev(n: int, eps: float) -> HyperbolicPoly:
    """Scaled degree-n Chebyshev polynomial eps^(-n) * C_n(eps*z).

    Only the expanding property is validated here; the interval-invariance
    required by the renormalization pipeline generally fails for small eps
    and is re-checked by the consumers that need it.
    """
    if n < 2:
        raise ValueError("degree must be >= 2")
    e = np.zeros(n + 1)
    e[n] = 1.0
    c = np.polynomial.chebyshev.cheb2poly(e)
    scaled = tuple(float(c[k]) * eps ** (k - n) for k in range(n + 1))
    T = HyperbolicPoly((scaled,), "unit", 1.0, 0.0, scaled)
    return _validate(T)


def from_spec(spec: dict) -> HyperbolicPoly:
    """Polynomial from a config dictionary.

    Accepted forms: {"type":"quadratic","rho":r}, {"type":"chebyshev","n":n,
    "eps":e}, {"type":"coeffs","c":[a0,...,ad]}, and
    {"type":"compose","outer":spec,"inner":spec}.
    """
    kind = spec.get("type")
    if kind == "quadratic":
        return quadratic(float(spec["rho"]))
    if kind == "chebyshev":
        return chebyshev(int(spec["n"]), float(spec["eps"]))
    if kind == "coeffs":
        return from_coeffs(spec["c"], spec.get("normalization", "unit"))
    if kind == "compose":
        return compose(from_spec(spec["outer"]), from_spec(spec["inner"]))
    raise ValueError(f"unknown polynomial spec type {kind!r}")


def to_spec(T: HyperbolicPoly) -> dict:
    if len(T.factors) == 1:
        return {"type": "coeffs", "c": list(T.factors[0]),
                "normalization": T.normalization}
    inner = HyperbolicPoly(T.factors[:-1], T.normalization, T.xi, T.q,
                           _expand(T.factors[:-1]))
    return {"type": "compose",
            "outer": {"type": "coeffs", "c": list(T.factors[-1]),
                      "normalization": T.normalization},
            "inner": to_spec(inner)}


# ---------------------------------------------------------------------------
# critical data and hyperbolicity

def critical_data(T: HyperbolicPoly):
    """Sorted real critical points and the critical values at them.

    Critical points of a composition U = f_n o ... o f_1 are the critical
    points of f_1 together with the f_1-preimages (taken through the chain)
    of the critical points of the outer part.
    """
    pts = _critical_points(T.factors)
    if len(pts) != T.degree - 1:
        raise DegenerateCritical(
            f"expected {T.degree - 1} critical points, found {len(pts)}"
        )
    gaps = np.diff(pts)
    scale = max(1.0, float(np.max(np.abs(pts))) if len(pts) else 1.0)
    if len(gaps) and np.min(gaps) < 1e-8 * scale:
        raise DegenerateCritical("critical points collide within tolerance")
    vals = evaluate(T, pts) if len(pts) else np.array([])
    return pts, np.atleast_1d(vals)


def _critical_points(factors: tuple) -> np.ndarray:
    first = np.asarray(factors[0])
    pts = _real_roots(npoly.polyder(first))
    if len(factors) > 1:
        outer_pts = _critical_points(factors[1:])
        for y in outer_pts:
            pts = np.concatenate([pts, _preimages_chain((factors[0],), y)])
    return np.sort(pts)


def hyperbolicity_gap(T: HyperbolicPoly) -> float:
    """dist(CV(T), invariant interval) in units of the interval half-width."""
    _, vals = critical_data(T)
    return float(np.min(np.abs(vals)) / T.xi - 1.0)


def is_sufficiently_hyperbolic(T: HyperbolicPoly, A: float = 10.0) -> bool:
    return hyperbolicity_gap(T) >= A


# ---------------------------------------------------------------------------
# normalization bridge

def to_monic(T: HyperbolicPoly) -> HyperbolicPoly:
    """Conjugate a unit-normalized polynomial to monic form
    M(w) = lam * T(w/lam), lam = a_d^(1/(d-1)); then xi = lam."""
    if T.normalization == "monic":
        return T
    lead = _leading_coefficient(T)
    if lead <= 0:
        raise ValueError("monic conversion requires positive leading coefficient")
    lam = lead ** (1.0 / (T.degree - 1))
    factors = _conjugate_factors(T.factors, lam)
    coeffs = _expand(factors)
    d = T.degree
    if coeffs is not None:
        # the chain is monic by construction; snap the ~1e-16 roundoff
        coeffs = coeffs[:-1] + (1.0,)
        qm = -coeffs[-2] / d
    else:
        # -coeff_{d-1}(M) equals the root sum; the roots are the chain
        # preimages of 0, which stay real for the admissible class
        qm = float(np.sum(_preimages_chain(factors, 0.0))) / d
    return HyperbolicPoly(factors, "monic", lam, qm, coeffs)


def from_monic(M: HyperbolicPoly) -> HyperbolicPoly:
    """Exact inverse of to_monic: T(z) = M(xi*z)/xi."""
    if M.normalization == "unit":
        return M
    lam = M.xi
    factors = _conjugate_factors(M.factors, 1.0 / lam)
    return HyperbolicPoly(factors, "unit", 1.0, 0.0, _expand(factors))


def _leading_coefficient(T: HyperbolicPoly) -> float:
    lead = 1.0
    for f in T.factors:
        lead = f[-1] * lead ** (len(f) - 1)
    return float(lead)


def _conjugate_factors(factors: tuple, lam: float) -> tuple:
    """Factor chain of lam * U(w/lam): scale the innermost input by 1/lam and
    the outermost output by lam."""
    out = []
    for i, f in enumerate(factors):
        c = np.asarray(f, dtype=float).copy()
        if i == 0:
            c = c * (1.0 / lam) ** np.arange(len(c))
        if i == len(factors) - 1:
            c = c * lam
        out.append(tuple(float(v) for v in c))
    return tuple(out)


# ---------------------------------------------------------------------------
# composition

def compose(T2: HyperbolicPoly, T1: HyperbolicPoly) -> HyperbolicPoly:
    """The composition T2 o T1 (T1 acts first), both unit-normalized."""
    if T2.normalization != "unit" or T1.normalization != "unit":
        raise ValueError("compose expects unit-normalized polynomials")
    factors = T1.factors + T2.factors
    T = HyperbolicPoly(factors, "unit", 1.0, 0.0, _expand(factors))
    return _validate(T)


# ---------------------------------------------------------------------------
# preimages and backward orbits

def _preimages_single(coeffs, x: float) -> np.ndarray:
    c = list(coeffs)
    c[0] -= x
    roots = np.roots(np.asarray(c[::-1], dtype=float))
    scale = np.maximum(1.0, np.abs(roots))
    if np.any(np.abs(roots.imag) > 1e-8 * scale):
        raise ComplexPreimage(
            f"preimage of {x} left the real axis "
            f"(max |imag| = {np.max(np.abs(roots.imag)):.3e})"
        )
    y = roots.real
    ca = np.asarray(coeffs)
    dc = npoly.polyder(ca)
    for _ in range(2):
        fy = npoly.polyval(y, ca) - x
        f1 = npoly.polyval(y, dc)
        safe = np.abs(f1) > 1e-300
        y = np.where(safe, y - np.where(safe, fy, 0.0) / np.where(safe, f1, 1.0), y)
    return np.sort(y)


def _preimages_single_many(coeffs, xs: np.ndarray) -> np.ndarray:
    """Rows of preimages under one factor: shape (len(xs), deg), row-sorted."""
    c = np.asarray(coeffs, dtype=float)
    deg = len(c) - 1
    n = len(xs)
    if deg == 1:
        return ((xs - c[0]) / c[1]).reshape(n, 1)
    if deg == 2:
        # c2 y^2 + c1 y + (c0 - x) = 0, solved directly
        disc = c[1] ** 2 - 4.0 * c[2] * (c[0] - xs)
        if np.any(disc < -1e-12 * np.maximum(1.0, np.abs(xs))):
            raise ComplexPreimage(
                f"negative discriminant: min {np.min(disc):.3e}"
            )
        sq = np.sqrt(np.maximum(disc, 0.0))
        r1 = (-c[1] - sq) / (2.0 * c[2])
        r2 = (-c[1] + sq) / (2.0 * c[2])
        return np.sort(np.stack([r1, r2], axis=1), axis=1)
    # batched companion matrices, x enters the constant coefficient
    comp = np.zeros((n, deg, deg))
    comp[:, np.arange(1, deg), np.arange(deg - 1)] = 1.0
    comp[:, 0, deg - 1] = -(c[0] - xs) / c[deg]
    for k in range(1, deg):
        comp[:, k, deg - 1] = -c[k] / c[deg]
    roots = np.linalg.eigvals(comp)
    scale = np.maximum(1.0, np.abs(roots))
    if np.any(np.abs(roots.imag) > 1e-8 * scale):
        raise ComplexPreimage(
            f"preimages left the real axis "
            f"(max |imag| = {np.max(np.abs(roots.imag)):.3e})"
        )
    y = roots.real
    dc = npoly.polyder(c)
    for _ in range(2):
        fy = npoly.polyval(y, c) - xs[:, None]
        f1 = npoly.polyval(y, dc)
        safe = np.abs(f1) > 1e-300
        y = np.where(safe, y - np.where(safe, fy, 0.0) / np.where(safe, f1, 1.0), y)
    return np.sort(y, axis=1)


def preimages_many(T: HyperbolicPoly, xs) -> np.ndarray:
    """Preimage rows for many targets at once: shape (len(xs), d), with the
    children of xs[i] in row i (sorted)."""
    targets = np.asarray(xs, dtype=float).reshape(-1)
    n = len(targets)
    for f in reversed(T.factors):
        targets = _preimages_single_many(f, targets.reshape(-1)).reshape(-1)
    return np.sort(targets.reshape(n, -1), axis=1)


def _preimages_chain(factors: tuple, x: float) -> np.ndarray:
    targets = np.array([x])
    for f in reversed(factors):
        targets = np.concatenate([_preimages_single(f, t) for t in targets])
    return np.sort(targets)


def preimages(T: HyperbolicPoly, x: float) -> np.ndarray:
    """All d real solutions of T(y) = x, sorted ascending.

    Residual contract: |T(y_i) - x| <= 1e-12 * max(1, |x|) after Newton
    polishing, up to the conditioning of the coefficient representation.
    """
    y = _preimages_chain(T.factors, float(x))
    res = np.abs(evaluate(T, y) - x)
    # backward-stable bound for the factored evaluation
    cond = sum(
        float(npoly.polyval(np.max(np.abs(y)), np.abs(np.asarray(f))))
        for f in T.factors
    )
    tol = max(1e-12 * max(1.0, abs(x)), 64 * np.finfo(float).eps * cond)
    if np.any(res > tol):
        raise ComplexPreimage(
            f"preimage residual {np.max(res):.3e} exceeds tolerance {tol:.3e}"
        )
    return y


def rightmost_fixed_point(T: HyperbolicPoly) -> float:
    """The fixed point of T in [-xi, xi] nearest xi (it lies on the Julia
    set, so backward orbits seeded there stay on the Julia set)."""
    if T.coeffs is None:
        raise ValueError("fixed point seed needs expanded coefficients")
    shifted = list(T.coeffs)
    shifted[1] -= 1.0
    roots = _real_root_subset(shifted)
    inside = roots[np.abs(roots) <= T.xi * (1 + 1e-9)]
    if len(inside) == 0:
        raise ValueError("no fixed point inside the invariant interval")
    return float(inside[np.argmax(inside)])


def check_interval_invariance(T: HyperbolicPoly, tol: float = 1e-9):
    """Raise unless T^{-1}[-xi, xi] is contained in [-xi, xi] and the
    endpoints map to the endpoints; the renormalization pipeline and the
    Julia-set samplers require this normalization to hold exactly."""
    xi = T.xi
    for edge in (xi, -xi):
        if abs(abs(evaluate(T, edge)) - xi) > tol * max(1.0, xi):
            raise ValueError(
                f"T({edge:+g}) does not map to an endpoint of [-xi, xi]; "
                "the polynomial is not in the normalized admissible class"
            )
        pre = _preimages_chain(T.factors, edge)
        if np.any(np.abs(pre) > xi * (1 + tol)):
            raise ValueError(
                "the preimage of the invariant interval leaves the interval; "
                "renormalize this polynomial before use"
            )


def julia_samples(T: HyperbolicPoly, depth: int, seed: float | None = None):
    """Full backward orbit of a seed point on the Julia set: d^depth points
    (with multiplicity), all within [-xi, xi]."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if T.degree ** depth > MEMORY_CAP:
        raise ValueError(f"d^depth exceeds the memory cap {MEMORY_CAP}")
    check_interval_invariance(T)
    x = np.array([rightmost_fixed_point(T) if seed is None else float(seed)])
    for _ in range(depth):
        x = preimages_many(T, x).reshape(-1)
    return np.sort(x)
