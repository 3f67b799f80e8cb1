"""Branch maps of the noncommutative Gauss map.

For each branch ``s`` the quotient by the ideal of elements vanishing on the
window [1/(s+1), 1/s] is again a Farey-shaped algebra.  Its level-m node j
carries the label g_s(r(m, j)) and has size p + s q, where p/q = r(m, j).
Every quotient block is laid out as s diagonal copies of a q x q corner
followed by a p x p corner; odd embeddings reorder bases so this layout is
preserved, which makes sigma_s and V_s commute with the connecting maps
exactly, not just up to unitary equivalence.

The quotient is identified with the window of the main diagram: main level
m + s, node index 2**(m+1) - j, conjugated by a fixed permutation
(:func:`window_perm`) that is built level by level from the two embedding
conventions.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

import numpy as np

from .bratteli import (
    MAIN,
    AfElement,
    FareyDiagram,
    LevelError,
    cond_expectation_level,
    center_embed,
    embed,
    embed_range,
    node_traces,
    normalized_trace,
    pi_rational,
    trace_field,
)
from .checks import CheckResult, check
from .farey import as_fraction, branch_inverse, branch_map, farey_level, locate


class ResourceError(RuntimeError):
    """A requested computation exceeds the block-dimension budget."""


MAX_BLOCK = 4096


class QuotientDiagram(FareyDiagram):
    """Bratteli diagram of the quotient for branch ``s``, indexed by preimage node."""

    def __init__(self, s: int):
        if s < 1:
            raise ValueError("branch index must be >= 1")
        self.s = s
        self.name = f"quotient_s{s}"

    def labels(self, n: int) -> tuple[Fraction, ...]:
        return tuple(branch_map(self.s, r) for r in farey_level(n).nodes)

    def split(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """(q, p) per node: the copied corner size and the zero-corner size."""
        lev = farey_level(n)
        return lev.q, lev.p

    @lru_cache(maxsize=32)
    def sizes(self, n: int) -> np.ndarray:
        lev = farey_level(n)
        if lev.q.max() > (2**63 - 1) // (self.s + 1):
            raise OverflowError(f"quotient sizes at level {n} exceed the 64-bit range")
        out = lev.p + self.s * lev.q
        out.setflags(write=False)
        return out

    def label_values(self, n: int) -> np.ndarray:
        return 1.0 / (farey_level(n).values + self.s)

    def locate(self, label) -> tuple[int, int]:
        return locate(branch_inverse(self.s, as_fraction(label)))

    def odd_order(self, n: int, k: int) -> np.ndarray:
        s = self.s
        q, p = self.split(n)
        q0, p0, q1, p1 = int(q[k]), int(p[k]), int(q[k + 1]), int(p[k + 1])
        d0 = s * q0 + p0
        parts = []
        for i in range(s):
            parts.append(np.arange(i * q0, (i + 1) * q0))
            parts.append(d0 + np.arange(i * q1, (i + 1) * q1))
        parts.append(np.arange(s * q0, d0))
        parts.append(d0 + np.arange(s * q1, s * q1 + p1))
        return np.concatenate(parts)

    def __repr__(self) -> str:
        return f"QuotientDiagram(s={self.s})"


@lru_cache(maxsize=None)
def quotient_diagram(s: int) -> QuotientDiagram:
    return QuotientDiagram(s)


def window_indices(s: int, n: int) -> tuple[int, int]:
    """Index range of the main-diagram nodes of level n >= s inside [1/(s+1), 1/s]."""
    if n < s:
        raise LevelError(f"the window of branch {s} has no nodes below level {s}")
    m = n - s
    return 2**m, 2 ** (m + 1)


@lru_cache(maxsize=128)
def window_perm(s: int, m: int) -> tuple[np.ndarray, ...]:
    """Per quotient node j of level m: indices U with quotient block = main block[U, U]."""
    Q = quotient_diagram(s)
    if m == 0:
        return tuple(np.arange(d) for d in Q.sizes(0))
    prev = window_perm(s, m - 1)
    dprev = Q.sizes(m - 1)
    out = []
    for J in range(2**m + 1):
        j = J // 2
        if J % 2 == 0:
            out.append(prev[j])
        else:
            # main mediant block is diag(node of j+1, node of j): j+1 has the smaller label
            w = np.concatenate([int(dprev[j + 1]) + prev[j], prev[j + 1]])
            out.append(w[Q.odd_order(m - 1, j)])
    return tuple(out)


def quotient_project(x: AfElement, s: int, level: int | None = None) -> AfElement:
    """pi_s: restrict to the window of branch ``s``, giving quotient level ``level - s``.

    ``level`` is the main-diagram level read from (default max(level(x), s));
    only the window blocks are ever embedded.
    """
    if x.diagram is not MAIN:
        raise LevelError("quotient_project acts on elements of the main diagram")
    n = max(x.level, s) if level is None else level
    if n < max(x.level, s):
        raise LevelError(f"level {n} is below max(level(x), s) = {max(x.level, s)}")
    lo, hi = window_indices(s, n)
    win = embed_range(x, n, lo, hi)
    m = n - s
    perms = window_perm(s, m)
    blocks = tuple(win[2**m - j][np.ix_(perms[j], perms[j])] for j in range(2**m + 1))
    return AfElement(quotient_diagram(s), m, blocks)


def sigma_tilde(x: AfElement, s: int) -> AfElement:
    """Non-unital *-monomorphism into the quotient: s diagonal copies of each block, zero corner last."""
    if x.diagram is not MAIN:
        raise LevelError("sigma_tilde acts on elements of the main diagram")
    Q = quotient_diagram(s)
    blocks = []
    for b, d in zip(x.blocks, Q.sizes(x.level)):
        out = np.zeros((d, d), dtype=complex)
        k = s * b.shape[0]
        out[:k, :k] = np.kron(np.eye(s), b)
        blocks.append(out)
    return AfElement(Q, x.level, tuple(blocks))


def v_tilde(y: AfElement, s: int) -> AfElement:
    """UCP map back to the main algebra: average of the s diagonal q x q corners."""
    Q = quotient_diagram(s)
    if y.diagram is not Q:
        raise LevelError(f"v_tilde needs an element of the branch-{s} quotient")
    q, _ = Q.split(y.level)
    blocks = []
    for b, qj in zip(y.blocks, q):
        qj = int(qj)
        blocks.append(sum(b[i * qj : (i + 1) * qj, i * qj : (i + 1) * qj] for i in range(s)) / s)
    return AfElement(MAIN, y.level, tuple(blocks))


def lift(y: AfElement, s: int, fill: str = "nearest") -> AfElement:
    """Explicit UCP section of pi_s, landing in main level level(y) + s.

    Window blocks are copied back through :func:`window_perm`.  Every other
    block is a multiple of the identity: the normalized trace of the quotient
    block at the nearest window end (``fill="nearest"``) or the mean of all
    quotient block traces (``fill="mean"``).
    """
    Q = quotient_diagram(s)
    if y.diagram is not Q:
        raise LevelError(f"lift needs an element of the branch-{s} quotient")
    m = y.level
    n = m + s
    sizes = MAIN.sizes(n)
    if sizes.max() > MAX_BLOCK:
        raise ResourceError(f"main level {n} has blocks of size {sizes.max()}")
    traces = node_traces(y)
    if fill == "nearest":
        below, above = traces[2**m], traces[0]
    elif fill == "mean":
        below = above = traces.mean()
    else:
        raise ValueError(f"unknown fill {fill!r}")
    lo, hi = window_indices(s, n)
    perms = window_perm(s, m)
    blocks = []
    for k, d in enumerate(sizes):
        if k < lo:
            blocks.append(below * np.eye(d, dtype=complex))
        elif k > hi:
            blocks.append(above * np.eye(d, dtype=complex))
        else:
            j = 2 ** (m + 1) - k
            b = np.empty((d, d), dtype=complex)
            b[np.ix_(perms[j], perms[j])] = y.blocks[j]
            blocks.append(b)
    return AfElement(MAIN, n, tuple(blocks))


def G_s(x: AfElement, s: int, level: int | None = None) -> AfElement:
    """G_s = V_s o pi_s; output level is ``level`` (default max(level(x), s) - s)."""
    n = None if level is None else level + s
    return v_tilde(quotient_project(x, s, n), s)


def H_s(x: AfElement, s: int, fill: str = "nearest") -> AfElement:
    """H_s = lift o sigma_s, at main level level(x) + s."""
    return lift(sigma_tilde(x, s), s, fill)


# -- identities -----------------------------------------------------------


def _traces_at(z: AfElement, level: int) -> np.ndarray:
    if z.level <= level:
        return node_traces(embed(z, level))
    return node_traces(cond_expectation_level(z, level))


def trace_relation_sides(x: AfElement, y: AfElement, s: int, level: int) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of tau_{g_s(u)}(H_s(x) y) = s g_s(u) tau_u(x G_s(y)) for all u at ``level``.

    The left side is evaluated quotient-side, as the trace of sigma_s(x) pi_s(y)
    at quotient node g_s(u), so no lifting enters.
    """
    left = _traces_at(sigma_tilde(x, s) * quotient_project(y, s), level)
    right = s * branch_map(s, farey_level(level).values) * _traces_at(x * G_s(y, s), level)
    return left, right


def trace_relation_check(x: AfElement, y: AfElement, s: int, u, side: str = "quotient", fill: str = "nearest") -> CheckResult:
    u = as_fraction(u)
    t = branch_map(s, u)
    if side == "quotient":
        z = sigma_tilde(x, s) * quotient_project(y, s)
        lhs = normalized_trace(pi_rational(z, t))
    elif side == "lifted":
        lhs = normalized_trace(pi_rational(H_s(x, s, fill) * y, t))
    else:
        raise ValueError(f"unknown side {side!r}")
    rhs = s * float(t) * normalized_trace(pi_rational(x * G_s(y, s), u))
    return check("trace_relation", "branch trace relation", {"s": s, "u": u, "side": side}, lhs, rhs, 1e-12)


def _bracket(level: int, theta: float) -> tuple[int, int]:
    vals = farey_level(level).values
    i = int(np.searchsorted(vals, theta, side="right")) - 1
    i = min(max(i, 0), len(vals) - 2)
    return i, i + 1


def ideal_check(theta, s: int, rng: np.random.Generator, samples: int = 50, base_level: int = 2, tol: float = 1e-10) -> CheckResult:
    """Both inclusions G_s(I_{g_s(theta)}) = I_theta on constructed samples.

    Forward: x vanishing at g_s(theta) (its path block zeroed, or both
    bracketing window blocks for a float theta) must give
    tau_theta(G_s(x)* G_s(x)) = 0.  Converse: for x in I_theta the preimage
    H_s(x) lies in I_{g_s(theta)} and G_s(H_s(x)) = x.
    """
    exact = isinstance(theta, (Fraction, int))
    if exact:
        theta = as_fraction(theta)
        n0, k0 = locate(theta)
        level = max(n0, base_level)
        zero_at = [k0 * 2 ** (level - n0)]
    else:
        theta = float(theta)
        level = base_level
        zero_at = list(_bracket(level, theta))
    target = branch_map(s, theta)
    lo, hi = window_indices(s, level + s)
    # quotient index j sits at main index 2**(level+1) - j
    main_zero = [2 ** (level + 1) - j for j in zero_at]
    assert all(lo <= k <= hi for k in main_zero)

    def tau(z, point):
        if exact:
            return normalized_trace(pi_rational(z, point))
        return complex(trace_field(z)(float(point)))

    worst = 0.0
    for _ in range(samples):
        x = AfElement.random(level + s, rng)
        x = AfElement(MAIN, x.level, tuple(np.zeros_like(b) if k in main_zero else b for k, b in enumerate(x.blocks)))
        g = G_s(x, s)
        worst = max(worst, abs(tau(x.H * x, target)), abs(tau(g.H * g, theta)))

        w = AfElement.random(level, rng)
        w = AfElement(MAIN, level, tuple(np.zeros_like(b) if k in zero_at else b for k, b in enumerate(w.blocks)))
        h = H_s(w, s)
        worst = max(worst, abs(tau(h.H * h, target)), G_s(h, s).distance(w))
    return CheckResult(
        "ideal_mapping", "branch ideal correspondence",
        {"s": s, "theta": theta, "samples": samples}, 0.0, worst, worst, tol,
    )


# -- the truncated noncommutative Gauss map --------------------------------


def branch_weight_fn(s: int):
    return lambda t: (t + 1.0) / ((t + s) * (t + s + 1.0))


def nc_gauss(x, S: int = 4, level: int | None = None) -> tuple[AfElement, float]:
    """Sum over s <= S of G_s(x) Z_L(f_s) at output level L.

    For an element x, L defaults to level(x) and each branch reads x at main
    level L + s, so every G_s(x) lands on level L without loss.  A callable x
    is a central function f: branch s then reads Z_(L+s)(f), which makes the
    result exactly Z_L of the truncated transfer operator applied to f.
    Returns the element and the bound 2 ||x|| / (S + 2) on the omitted branches.
    """
    if S < 1:
        raise ValueError("truncation S must be >= 1")
    if isinstance(x, AfElement):
        L = x.level if level is None else level
        if L < x.level:
            raise LevelError(f"output level {L} is below level(x) = {x.level}")

        def read(s):
            return x

        norm = x.norm()
    else:
        if level is None:
            raise LevelError("a central function needs an explicit output level")
        L = level

        def read(s):
            return center_embed(x, L + s)

        norm = max(read(S).norm(), read(1).norm())
    deepest = int(MAIN.sizes(L + S).max())
    if deepest > MAX_BLOCK:
        raise ResourceError(f"branch {S} reads level {L + S} with blocks of size {deepest} > {MAX_BLOCK}")
    total = AfElement.zeros(L)
    for s in range(1, S + 1):
        total = total + G_s(read(s), s, level=L) * center_embed(branch_weight_fn(s), L)
    return total, 2.0 * norm / (S + 2)
