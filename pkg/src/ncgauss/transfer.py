"""The commutative Gauss transfer operator and its spectral diagnostics.

(Gf)(theta) = sum_s f(1/(theta+s)) f_s(theta) with the weights
f_s(theta) = (theta+1)/((theta+s)(theta+s+1)), which telescope to 1.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigs
from scipy.special import zeta

from .checks import CheckResult, check
from .farey import gauss_map
from .quadrature import DEFAULT_QUAD, QuadratureSpec, gauss_rule, integrate_mu, window_rule

RealFn = Callable[[np.ndarray], np.ndarray]

# evaluations of f per chunk in apply_transfer
_CHUNK = 1 << 22


@dataclass(frozen=True)
class BranchWeights:
    s: int

    def __post_init__(self):
        if self.s < 1:
            raise ValueError("branch index must be >= 1")

    def __call__(self, theta):
        t = np.asarray(theta, dtype=float)
        return (t + 1.0) / ((t + self.s) * (t + self.s + 1.0))


def branch_weight(s: int, theta):
    return BranchWeights(s)(theta)


def tail_weights(theta, S: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sums over s > S of f_s, f_s/(theta+s) and f_s/(theta+s)**2, in closed form."""
    t = np.asarray(theta, dtype=float)
    q = t + S + 1.0
    z2, z3 = zeta(2.0, q), zeta(3.0, q)
    return (t + 1.0) / q, (t + 1.0) * (z2 - 1.0 / q), (t + 1.0) * (z3 - z2 + 1.0 / q)


def _jet_at_zero(f: RealFn, h: float = 1e-3) -> tuple[float, float, float]:
    """f(0), f'(0), f''(0) from second-order one-sided differences."""
    v = np.asarray(f(np.array([0.0, h, 2 * h, 3 * h])), dtype=float)
    d1 = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h)
    d2 = (2 * v[0] - 5 * v[1] + 4 * v[2] - v[3]) / h**2
    return float(v[0]), float(d1), float(d2)


def _sup_abs(f: RealFn) -> float:
    grid = np.linspace(0.0, 1.0, 1025)
    return float(np.max(np.abs(f(grid))))


def apply_transfer(f: RealFn, theta, S: int = 10_000, tail: str = "none", renormalize: bool = False, sup: float | None = None):
    """Truncated Gf(theta) over the branches s <= S.

    Returns ``(value, tail_bound)`` with tail_bound = sup|f| (theta+1)/(theta+S+1),
    which bounds the omitted branches.  ``tail="taylor"`` adds the omitted
    branches through a second-order expansion of f at 0 (all of their points
    lie in [0, 1/(S+1)]); the bound is still reported for the raw partial sum.
    ``renormalize`` divides the partial sum by sum_{s<=S} f_s instead.
    """
    if S < 1:
        raise ValueError("truncation S must be >= 1")
    t = np.atleast_1d(np.asarray(theta, dtype=float))
    total = np.zeros_like(t)
    step = max(1, _CHUNK // max(1, t.size))
    for lo in range(1, S + 1, step):
        s = np.arange(lo, min(S, lo + step - 1) + 1, dtype=float)[None, :]
        a = t[:, None] + s
        total += np.sum(np.asarray(f(1.0 / a), dtype=float) * (t[:, None] + 1.0) / (a * (a + 1.0)), axis=1)
    T0, T1, T2 = tail_weights(t, S)
    bound = (_sup_abs(f) if sup is None else sup) * T0
    if tail == "taylor":
        f0, d1, d2 = _jet_at_zero(f)
        total = total + f0 * T0 + d1 * T1 + 0.5 * d2 * T2
    elif tail != "none":
        raise ValueError(f"unknown tail mode {tail!r}")
    if renormalize:
        total = total / (1.0 - T0)
    if np.ndim(theta) == 0:
        return float(total[0]), float(bound[0])
    return total, bound


def apply_composition(f: RealFn, theta):
    """(V_G f)(theta) = f(G(theta))."""
    return f(gauss_map(theta))


def transfer_samples(f: RealFn, S: int, samples: int) -> list[tuple[float, float, float]]:
    theta = np.linspace(0.0, 1.0, samples)
    val, bound = apply_transfer(f, theta, S)
    return list(zip(theta.tolist(), val.tolist(), bound.tolist()))


def samples_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["theta", "Gf", "tail_bound"])
    for row in rows:
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


# -- identity checks -------------------------------------------------------


def invariance_check(f: RealFn, S: int = 10_000, spec: QuadratureSpec = DEFAULT_QUAD, tol: float = 1e-8, label: str = "f") -> CheckResult:
    """int f dmu against int Gf dmu, both by composite Gauss-Legendre."""
    pts, wts = gauss_rule(spec)
    lhs = float(np.dot(wts, f(pts)))
    gf, _ = apply_transfer(f, pts, S, tail="taylor")
    rhs = float(np.dot(wts, gf))
    return check("mu_invariance", "transfer invariance of Gauss measure", {"f": label, "S": S}, lhs, rhs, tol)


def _windowed(integrand, S: int, spec: QuadratureSpec) -> float:
    """sum_{s<=S} of the window integrals of integrand(theta, s) against Gauss measure."""
    total = 0.0
    for s in range(1, S + 1):
        pts, wts = window_rule(s, spec)
        total += float(np.dot(wts, integrand(pts, s)))
    return total


WINDOW_QUAD = QuadratureSpec(level=3, nodes=16)


def isometry_check(f: RealFn, S: int = 1000, spec: QuadratureSpec = DEFAULT_QUAD, tol: float = 1e-8, label: str = "f") -> CheckResult:
    """int (f o G)^2 dmu against int f^2 dmu.

    The left side is integrated window by window for s <= S; the windows
    beyond S are summed in closed form through u = 1/theta - s, giving
    int f(u)^2 (u+1)/(u+S+1) dmu(u).
    """
    head = _windowed(lambda th, s: f(1.0 / th - s) ** 2, S, WINDOW_QUAD)
    tail = integrate_mu(lambda u: f(u) ** 2 * tail_weights(u, S)[0], spec)
    lhs = head + float(tail)
    rhs = float(integrate_mu(lambda u: f(u) ** 2, spec))
    return check("composition_isometry", "composition by G is an isometry", {"f": label, "S": S}, lhs, rhs, tol)


def conjugation_check(f: RealFn, g: RealFn, h: RealFn, S: int = 1000, spec: QuadratureSpec = DEFAULT_QUAD, tol: float = 1e-7, label: str = "f,g,h") -> CheckResult:
    """int f (g o G)(h o G) dmu against int (Gf) g h dmu."""
    head = _windowed(lambda th, s: f(th) * g(1.0 / th - s) * h(1.0 / th - s), S, WINDOW_QUAD)
    f0, d1, d2 = _jet_at_zero(f)

    def tail_integrand(u):
        T0, T1, T2 = tail_weights(u, S)
        return g(u) * h(u) * (f0 * T0 + d1 * T1 + 0.5 * d2 * T2)

    lhs = head + float(integrate_mu(tail_integrand, spec))
    pts, wts = gauss_rule(spec)
    gf, _ = apply_transfer(f, pts, S, tail="taylor")
    rhs = float(np.dot(wts, gf * g(pts) * h(pts)))
    return check("conjugation", "G* M_f G = M_(Gf) in weak form", {"fgh": label, "S": S}, lhs, rhs, tol)


# -- spectrum ----------------------------------------------------------------


class SpectralError(RuntimeError):
    pass


@dataclass(frozen=True)
class GkwResult:
    grid: int
    leading: complex
    subleading: complex
    density_error: float

    @property
    def modulus(self) -> float:
        return abs(self.subleading)


def transfer_matrix(N: int) -> sp.csr_matrix:
    """Collocation of G on continuous piecewise-linear functions over a uniform N-cell grid.

    Row i holds the coefficients of (G phi_j)(i/N) for the hat basis phi_j.
    Branches s > N map every node into the first cell and are summed in closed form.
    """
    theta = np.arange(N + 1) / N
    s = np.arange(1, N + 1, dtype=float)
    a = theta[:, None] + s[None, :]
    x = 1.0 / a
    w = (theta[:, None] + 1.0) / (a * (a + 1.0))
    cell = np.minimum(np.floor(x * N).astype(np.int64), N - 1)
    frac = x * N - cell
    rows = np.broadcast_to(np.arange(N + 1)[:, None], cell.shape)
    T0, T1, _ = tail_weights(theta, N)
    r = np.concatenate([rows.ravel(), rows.ravel(), np.arange(N + 1), np.arange(N + 1)])
    c = np.concatenate([cell.ravel(), cell.ravel() + 1, np.zeros(N + 1, np.int64), np.ones(N + 1, np.int64)])
    v = np.concatenate([(w * (1.0 - frac)).ravel(), (w * frac).ravel(), T0 - N * T1, N * T1])
    return sp.csr_matrix((v, (r, c)), shape=(N + 1, N + 1))


def gkw_estimate(N: int = 2000) -> GkwResult:
    """Leading and subleading eigenvalues of the discretized transfer operator."""
    if N < 50:
        raise ValueError("grid must have at least 50 cells")
    M = transfer_matrix(N)
    try:
        vals, vecs = eigs(M, k=4, which="LM", v0=np.ones(N + 1), tol=1e-13)
    except (ArpackError, ArpackNoConvergence) as exc:
        raise SpectralError(f"eigensolver failed on grid {N}: {exc}") from exc
    order = np.argsort(-np.abs(vals))
    vals, vecs = vals[order], vecs[:, order]
    v = vecs[:, 0] / vecs[:, 0].mean()
    return GkwResult(N, complex(vals[0]), complex(vals[1]), float(np.max(np.abs(v - 1.0))))


def gkw_refinement(grids=(250, 500, 1000, 2000)) -> list[GkwResult]:
    return [gkw_estimate(n) for n in grids]


def stable_digits(history: list[GkwResult]) -> int:
    """Number of decimal digits on which the last two estimates agree."""
    if len(history) < 2:
        return 0
    diff = abs(history[-1].modulus - history[-2].modulus)
    return 16 if diff == 0 else max(0, int(math.floor(-math.log10(diff))))
