"""Pointwise and integrated states, GNS forms, and the branchwise state identities.

On the window (1/(s+1), 1/s] the state phi_theta is normalized evaluation of
tau_theta against H_s(1).  Inside the window tau_theta only sees pi_s, so
phi_theta(x) is computed quotient-side as tau_theta(sigma_s(1) pi_s(x)) / (s theta),
never touching the lifting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .bratteli import AfElement, center_embed, normalized_trace, pi_rational, trace_field
from .checks import CheckResult, check
from .farey import LN2, as_fraction, branch_map, farey_level, gauss_integral, gauss_measure
from .gauss_nc import G_s, H_s, nc_gauss, quotient_project, sigma_tilde
from .quadrature import DEFAULT_QUAD, QuadratureSpec, window_rule


def branch_of(theta) -> int:
    """The s with theta in (1/(s+1), 1/s]; 0 for theta = 0."""
    if isinstance(theta, (Fraction, int)):
        theta = as_fraction(theta)
        return 0 if theta == 0 else math.floor(1 / theta)
    theta = float(theta)
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"{theta} lies outside [0, 1]")
    if theta == 0.0:
        return 0
    s = math.floor(1.0 / theta)
    # guard against 1/theta rounding across an integer
    if theta <= 1.0 / (s + 1):
        s += 1
    elif theta > 1.0 / s:
        s -= 1
    return s


def _window_part(x: AfElement, s: int) -> AfElement:
    """sigma_s(1) pi_s(x), the quotient element whose trace field gives s theta phi_theta(x)."""
    return sigma_tilde(AfElement.identity(0), s) * quotient_project(x, s)


def _trace_point(z: AfElement, theta) -> complex:
    if isinstance(theta, Fraction):
        return normalized_trace(pi_rational(z, theta))
    return complex(trace_field(z)(float(theta)))


def tau_point(x: AfElement, theta) -> complex:
    if isinstance(theta, (Fraction, int)):
        theta = as_fraction(theta)
    return _trace_point(x, theta)


def phi_point(x: AfElement, theta) -> complex:
    """phi_theta(x); phi_0 = tau_0."""
    if isinstance(theta, (Fraction, int)):
        theta = as_fraction(theta)
    s = branch_of(theta)
    if s == 0:
        return tau_point(x, theta)
    return _trace_point(_window_part(x, s), theta) / (s * float(theta))


def _phi_window_closed(z: AfElement, s: int) -> complex:
    """Window integral of tau_theta(z)/(s theta) dmu, exact for the piecewise-affine trace field of z."""
    total = 0.0
    for a, b, va, slope in trace_field(z).pieces():
        # integrand (alpha theta + beta) / (s theta (1 + theta))
        alpha, beta = slope, va - slope * a
        total = total + beta * math.log(b / a) + (alpha - beta) * math.log1p((b - a) / (1.0 + a))
    return total / (s * LN2)


def _phi_window_quad(z: AfElement, s: int, spec: QuadratureSpec) -> complex:
    """The same window integral by composite Gauss-Legendre on the window."""
    rule = QuadratureSpec(max(spec.level, z.level), spec.nodes)
    pts, wts = window_rule(s, rule)
    return complex(np.dot(wts, trace_field(z)(pts) / (s * pts)))


@dataclass(frozen=True)
class PointState:
    kind: str
    theta: object

    def __post_init__(self):
        if self.kind not in ("trace", "phi"):
            raise ValueError(f"unknown point state {self.kind!r}")

    @property
    def branch(self) -> int:
        return branch_of(self.theta)

    def __call__(self, x: AfElement) -> complex:
        return tau_point(x, self.theta) if self.kind == "trace" else phi_point(x, self.theta)


@dataclass(frozen=True)
class IntegratedState:
    """tau = int tau_theta dmu or phi = int phi_theta dmu.

    phi sums closed-form window integrals for s <= smax and replaces the
    remaining windows [0, 1/(smax+1)] by tau_0; :meth:`tail_bound` bounds the
    error of that replacement.
    """

    kind: str
    smax: int = 64

    def __post_init__(self):
        if self.kind not in ("tau", "phi"):
            raise ValueError(f"unknown integrated state {self.kind!r}")

    def __call__(self, x: AfElement) -> complex:
        if self.kind == "tau":
            return complex(gauss_integral(trace_field(x)))
        head = sum(_phi_window_closed(_window_part(x, s), s) for s in range(1, self.smax + 1))
        return complex(head + tau_point(x, Fraction(0)) * gauss_measure(0.0, 1.0 / (self.smax + 1)))

    def tail_bound(self, x: AfElement) -> float:
        return 2.0 * x.norm() * gauss_measure(0.0, 1.0 / (self.smax + 1))


TAU = IntegratedState("tau")
PHI = IntegratedState("phi")


def eval_state(state, x: AfElement) -> complex:
    return state(x)


def gns_inner(state, x: AfElement, y: AfElement) -> complex:
    """<x, y> = state(y* x)."""
    return state(y.H * x)


def gram_matrix(state, elements) -> np.ndarray:
    n = len(elements)
    g = np.empty((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            g[i, j] = gns_inner(state, elements[j], elements[i])
    return g


# -- branch identities --------------------------------------------------------


def isometry_branch_check(x: AfElement, s: int, spec: QuadratureSpec = DEFAULT_QUAD, tol: float = 1e-8) -> CheckResult:
    """Window integral of phi_theta(H_s(x)* H_s(x)) against int tau_u(x* x) f_s(u) dmu(u)."""
    z = sigma_tilde(x.H * x, s)
    lhs = _phi_window_quad(z, s, spec)
    rhs = gauss_integral(trace_field(x.H * x), branch=s)
    return check("isometry_branch", "branch term of the isometry of V_G", {"s": s, "level": x.level}, lhs, rhs, tol)


def intertwine_branch_check(x: AfElement, y: AfElement, z: AfElement, s: int, spec: QuadratureSpec = DEFAULT_QUAD, tol: float = 1e-7) -> CheckResult:
    """<pi_phi(x) H_s(y), H_s(z)>_phi on window s against <(G_s(x) y f_s), z>_tau."""
    w = sigma_tilde(z, s).H * quotient_project(x, s) * sigma_tilde(y, s)
    lhs = _phi_window_quad(w, s, spec)
    rhs = gauss_integral(trace_field(z.H * G_s(x, s) * y), branch=s)
    return check(
        "intertwine_branch", "branch term of V* pi_phi(x) V = pi_tau(G(x))",
        {"s": s, "levels": [x.level, y.level, z.level]}, lhs, rhs, tol,
    )


def thm5_branch_check(x: AfElement, s: int, spec: QuadratureSpec = DEFAULT_QUAD, tol: float = 1e-8) -> CheckResult:
    """Window integral of phi_theta(x) against int tau_u(G_s(x)) f_s(u) dmu(u)."""
    lhs = _phi_window_quad(_window_part(x, s), s, spec)
    rhs = gauss_integral(trace_field(G_s(x, s)), branch=s)
    return check("phi_tau_branch", "branch term of phi = tau o G", {"s": s, "level": x.level}, lhs, rhs, tol)


def branch_sum_check(x: AfElement, S: int = 4, smax: int = 64) -> list[CheckResult]:
    """Partial branch sums against the full states, within 2||x||/(S+2)."""
    phi = IntegratedState("phi", smax)
    full = phi(x)
    tail = 2.0 * x.norm() / (S + 2)
    partial = sum(_phi_window_closed(_window_part(x, s), s) for s in range(1, S + 1))
    g, _ = nc_gauss(x, S)
    tau_g = TAU(g)
    return [
        check("phi_branch_sum", "phi as a sum of window integrals", {"S": S, "level": x.level}, partial, full, tail + phi.tail_bound(x)),
        check("phi_vs_tau_gauss", "phi = tau o G up to truncation", {"S": S, "level": x.level}, tau_g, full, 2 * tail + phi.tail_bound(x)),
    ]


def commutative_restriction_check(f, s: int, level: int = 3, test=None, spec: QuadratureSpec = DEFAULT_QUAD, tol: float = 1e-8, label: str = "f") -> CheckResult:
    """H_s on central elements acts as composition with u = 1/theta - s.

    Two parts, reported as one residual: at every window node
    of (1/(s+1), 1/s], phi_theta(H_s(Z f) Z t) = f(1/theta - s) t(theta)
    exactly, and the window
    integral of that pairing in theta agrees with the u-space integral against
    f_s after the substitution.
    """
    t = (lambda v: 1.0) if test is None else test
    zf = center_embed(f, level)
    zt = center_embed(t, level + s)
    pairing = H_s(zf, s) * zt
    node_err = 0.0
    # u = 1 is theta = 1/(s+1), which belongs to the next branch
    for u in farey_level(level).nodes[:-1]:
        theta = branch_map(s, u)
        expect = f(float(u)) * t(float(theta))
        node_err = max(node_err, abs(phi_point(pairing, theta) - expect))
    w = sigma_tilde(zf, s) * quotient_project(zt, s)
    lhs = _phi_window_quad(w, s, spec)
    rhs = gauss_integral(trace_field(zf * G_s(zt, s)), branch=s)
    err = max(node_err, abs(lhs - rhs))
    return CheckResult(
        "commutative_restriction", "H_s restricts to composition on the center",
        {"f": label, "s": s, "level": level}, complex(lhs), complex(rhs), err, tol,
    )


def window_integral_direct(f, s: int, test=None, spec: QuadratureSpec = DEFAULT_QUAD) -> float:
    """int over window s of f(1/theta - s) t(theta) dmu(theta), by quadrature."""
    t = (lambda v: np.ones_like(v)) if test is None else test
    pts, wts = window_rule(s, spec)
    return float(np.dot(wts, f(1.0 / pts - s) * t(pts)))
