"""Finite stages of the Farey AF algebra.

An element of stage ``n`` is an ordered direct sum of square complex blocks,
block ``k`` sitting at node (n, k) of a Farey-shaped Bratteli diagram.  One
embedding step sends block k to new block 2k and puts diag(block k,
block k+1) at new block 2k+1; a diagram may reorder the basis of that
odd block through :meth:`FareyDiagram.odd_order`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np

from .farey import PiecewiseAffineFn, farey_level, locate


class LevelError(ValueError):
    """Elements live on incompatible levels or diagrams."""


class FareyDiagram:
    """The Bratteli diagram of the Farey algebra: node (n, k) is r(n, k) with size q(n, k)."""

    name = "main"

    def labels(self, n: int) -> tuple[Fraction, ...]:
        return farey_level(n).nodes

    def sizes(self, n: int) -> np.ndarray:
        return farey_level(n).q

    def odd_order(self, n: int, k: int) -> np.ndarray | None:
        """Basis order of new block 2k+1 at level n+1 inside diag(block k, block k+1); None keeps it."""
        return None

    def locate(self, label) -> tuple[int, int]:
        return locate(label)

    def label_values(self, n: int) -> np.ndarray:
        return farey_level(n).values

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


MAIN = FareyDiagram()


def connecting_matrix(n: int) -> np.ndarray:
    """0/1 multiplicity matrix of shape (2**(n+1)+1, 2**n+1) from level n to n+1."""
    if n < 0:
        raise ValueError("level must be nonnegative")
    cols = 2**n + 1
    a = np.zeros((2 * cols - 1, cols), dtype=np.int64)
    k = np.arange(cols)
    a[2 * k, k] = 1
    a[2 * k[:-1] + 1, k[:-1]] = 1
    a[2 * k[:-1] + 1, k[:-1] + 1] = 1
    return a


@dataclass(frozen=True, eq=False)
class AfElement:
    """Element of the finite stage ``level`` of ``diagram``."""

    diagram: FareyDiagram
    level: int
    blocks: tuple[np.ndarray, ...]

    def __post_init__(self):
        sizes = self.diagram.sizes(self.level)
        if len(self.blocks) != len(sizes):
            raise LevelError(f"level {self.level} needs {len(sizes)} blocks, got {len(self.blocks)}")
        blocks = []
        for b, d in zip(self.blocks, sizes):
            b = np.asarray(b, dtype=complex)
            if b.shape != (d, d):
                raise LevelError(f"block of shape {b.shape} where ({d}, {d}) is required")
            blocks.append(b)
        object.__setattr__(self, "blocks", tuple(blocks))

    @classmethod
    def identity(cls, n: int, diagram: FareyDiagram = MAIN) -> "AfElement":
        return cls(diagram, n, tuple(np.eye(d, dtype=complex) for d in diagram.sizes(n)))

    @classmethod
    def zeros(cls, n: int, diagram: FareyDiagram = MAIN) -> "AfElement":
        return cls(diagram, n, tuple(np.zeros((d, d), dtype=complex) for d in diagram.sizes(n)))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator, diagram: FareyDiagram = MAIN, kind: str = "general") -> "AfElement":
        """Random element: ``general`` (complex Gaussian), ``hermitian`` or ``psd``."""
        blocks = []
        for d in diagram.sizes(n):
            b = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2 * d)
            if kind == "hermitian":
                b = 0.5 * (b + b.conj().T)
            elif kind == "psd":
                b = b @ b.conj().T
            elif kind != "general":
                raise ValueError(f"unknown kind {kind!r}")
            blocks.append(b)
        return cls(diagram, n, tuple(blocks))

    def __len__(self) -> int:
        return len(self.blocks)

    @property
    def sizes(self) -> np.ndarray:
        return self.diagram.sizes(self.level)

    def embed(self, m: int) -> "AfElement":
        return embed(self, m)

    def _aligned(self, other: "AfElement") -> tuple["AfElement", "AfElement"]:
        if other.diagram is not self.diagram:
            raise LevelError("elements belong to different diagrams")
        m = max(self.level, other.level)
        return embed(self, m), embed(other, m)

    def _map(self, fn) -> "AfElement":
        return AfElement(self.diagram, self.level, tuple(fn(b) for b in self.blocks))

    def __add__(self, other):
        if isinstance(other, AfElement):
            a, b = self._aligned(other)
            return AfElement(a.diagram, a.level, tuple(x + y for x, y in zip(a.blocks, b.blocks)))
        return self + other * AfElement.identity(self.level, self.diagram)

    __radd__ = __add__

    def __neg__(self):
        return self._map(lambda b: -b)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, AfElement):
            a, b = self._aligned(other)
            return AfElement(a.diagram, a.level, tuple(x @ y for x, y in zip(a.blocks, b.blocks)))
        return self._map(lambda b: other * b)

    def __rmul__(self, other):
        return self._map(lambda b: other * b)

    __matmul__ = __mul__

    @property
    def H(self) -> "AfElement":
        return self._map(lambda b: b.conj().T)

    def norm(self) -> float:
        """Operator norm: the largest block spectral norm."""
        return max(np.linalg.norm(b, 2) if b.size else 0.0 for b in self.blocks)

    def distance(self, other: "AfElement") -> float:
        a, b = self._aligned(other)
        return max(float(np.max(np.abs(x - y))) if x.size else 0.0 for x, y in zip(a.blocks, b.blocks))

    def allclose(self, other: "AfElement", atol: float = 1e-12) -> bool:
        return self.distance(other) <= atol

    def min_eigenvalue(self) -> float:
        return min(float(np.linalg.eigvalsh(0.5 * (b + b.conj().T)).min()) for b in self.blocks if b.size)


@lru_cache(maxsize=4096)
def _odd_order_cached(diagram: FareyDiagram, n: int, k: int):
    return diagram.odd_order(n, k)


def _odd_block(diagram: FareyDiagram, n: int, k: int, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    d1, d2 = left.shape[0], right.shape[0]
    out = np.zeros((d1 + d2, d1 + d2), dtype=complex)
    out[:d1, :d1] = left
    out[d1:, d1:] = right
    order = _odd_order_cached(diagram, n, k)
    if order is not None:
        out = out[np.ix_(order, order)]
    return out


def embed_range(x: AfElement, m: int, lo: int, hi: int) -> list[np.ndarray]:
    """Blocks lo..hi (inclusive) of ``x`` embedded at level ``m``, touching only their ancestors."""
    if m < x.level:
        raise LevelError(f"cannot embed level {x.level} into lower level {m}")
    if not 0 <= lo <= hi <= 2**m:
        raise IndexError(f"block range {lo}..{hi} invalid at level {m}")
    if m == x.level:
        return list(x.blocks[lo : hi + 1])
    plo, phi = lo // 2, (hi + 1) // 2
    parent = embed_range(x, m - 1, plo, phi)
    out = []
    for k in range(lo, hi + 1):
        i = k // 2 - plo
        if k % 2 == 0:
            out.append(parent[i])
        else:
            out.append(_odd_block(x.diagram, m - 1, k // 2, parent[i], parent[i + 1]))
    return out


def embed(x: AfElement, m: int) -> AfElement:
    """Image of ``x`` in stage ``m >= x.level`` under the connecting maps."""
    if m == x.level:
        return x
    return AfElement(x.diagram, m, tuple(embed_range(x, m, 0, 2**m)))


def normalized_trace(b: np.ndarray) -> complex:
    return complex(np.trace(b)) / b.shape[0]


def node_traces(x: AfElement) -> np.ndarray:
    """Normalized traces of all blocks of ``x`` (the values tau_(level, k)(x))."""
    return np.array([normalized_trace(b) for b in x.blocks])


def cond_expectation_level(x: AfElement, m: int) -> AfElement:
    """E_m(x) as an element of stage ``m``.

    One step keeps new block k equal to the block at 2k (its even descendant);
    composing the steps picks block 2**(level-m) k.
    """
    if m > x.level:
        raise LevelError(f"E_{m} needs an element of level >= {m}, got {x.level}")
    stride = 2 ** (x.level - m)
    return AfElement(x.diagram, m, tuple(x.blocks[stride * k] for k in range(2**m + 1)))


def cond_expectation_block(x: AfElement, n: int, k: int) -> AfElement:
    """E_(n,k)(x): E_n(x) with every block except ``k`` set to zero."""
    if x.level < n:
        x = embed(x, n)
    e = cond_expectation_level(x, n)
    return AfElement(
        x.diagram, n, tuple(b if j == k else np.zeros_like(b) for j, b in enumerate(e.blocks))
    )


def block_trace(x: AfElement, n: int, k: int) -> complex:
    """tau_(n,k)(x) = normalized trace of E_(n,k)(x) on summand k."""
    if not 0 <= k <= 2**n:
        raise IndexError(f"index {k} invalid at level {n}")
    if x.level < n:
        (b,) = embed_range(x, n, k, k)
        return normalized_trace(b)
    return normalized_trace(cond_expectation_level(x, n).blocks[k])


def trace_field(x: AfElement) -> PiecewiseAffineFn:
    """f_x: the piecewise-affine function with f_x(r(m, k)) = tau_(m,k)(x), m = level of x."""
    labels = x.diagram.labels(x.level)
    vals = node_traces(x)
    order = sorted(range(len(labels)), key=labels.__getitem__)
    return PiecewiseAffineFn(tuple(labels[i] for i in order), vals[order])


def hat(n: int, k: int) -> PiecewiseAffineFn:
    """B_(n,k): 1 at r(n,k), 0 outside (r(n,k-1), r(n,k+1)), affine in between."""
    if not 0 < k < 2**n:
        raise ValueError(f"hat functions exist only for interior nodes, got ({n}, {k})")
    lev = farey_level(n)
    left, mid, right = lev[k - 1], lev[k], lev[k + 1]
    # values from the three-piece formula at the knots
    bps, vals = [], []
    if left > 0:
        bps.append(Fraction(0))
        vals.append(0.0)
    bps += [left, mid, right]
    q = int(lev.q[k])
    vals += [
        q * (left.denominator * left - left.numerator),
        q * (left.denominator * mid - left.numerator),
        q * (right.numerator - right.denominator * right),
    ]
    if right < 1:
        bps.append(Fraction(1))
        vals.append(0.0)
    return PiecewiseAffineFn(tuple(bps), np.array([float(v) for v in vals]))


def tau_at_point(theta, x: AfElement) -> complex:
    """tau_theta(x): the unique trace extending evaluation at ``theta`` on the center."""
    return complex(trace_field(x)(theta))


def pi_rational(x: AfElement, label) -> np.ndarray:
    """Evaluation along the path of the node labelled ``label`` (a *-homomorphism onto M_q)."""
    n0, k0 = x.diagram.locate(label)
    if x.level <= n0:
        (b,) = embed_range(x, n0, k0, k0)
        return b.copy()
    return x.blocks[k0 * 2 ** (x.level - n0)].copy()


def center_embed(f: Callable, n: int, diagram: FareyDiagram = MAIN) -> AfElement:
    """Z_n(f): scalar blocks f(label) times the identity."""
    vals = [f(float(r)) for r in diagram.labels(n)]
    return AfElement(
        diagram, n, tuple(complex(v) * np.eye(d, dtype=complex) for v, d in zip(vals, diagram.sizes(n)))
    )


def center_expectation(x: AfElement, N: int) -> AfElement:
    """Truncated E_Z: Z_N(f_x) for N >= level(x)."""
    if N < x.level:
        raise LevelError(f"output level {N} is below the element's level {x.level}")
    field = trace_field(x)
    vals = [field(r) for r in x.diagram.labels(N)]
    return AfElement(
        x.diagram, N, tuple(complex(v) * np.eye(d, dtype=complex) for v, d in zip(vals, x.diagram.sizes(N)))
    )


def is_central(x: AfElement, atol: float = 1e-12) -> bool:
    return all(np.allclose(b, normalized_trace(b) * np.eye(b.shape[0]), atol=atol) for b in x.blocks)


# -- diagram export -------------------------------------------------------


def diagram_dict(diagram: FareyDiagram, levels: int) -> dict:
    out = {"diagram": diagram.name, "levels": []}
    for n in range(levels):
        out["levels"].append(
            {
                "n": n,
                "labels": [f"{r.numerator}/{r.denominator}" for r in diagram.labels(n)],
                "sizes": [int(d) for d in diagram.sizes(n)],
            }
        )
    out["edges"] = [connecting_matrix(n).tolist() for n in range(levels - 1)]
    return out


def diagram_to_json(diagram: FareyDiagram, levels: int) -> str:
    return json.dumps(diagram_dict(diagram, levels), indent=1)


def diagram_from_json(text: str) -> dict:
    """Parse an exported diagram; labels come back as Fractions and edges as arrays."""
    raw = json.loads(text)
    levels = []
    for lev in raw["levels"]:
        labels = tuple(Fraction(s) for s in lev["labels"])
        levels.append({"n": lev["n"], "labels": labels, "sizes": np.array(lev["sizes"], dtype=np.int64)})
    for a, b in zip(levels, levels[1:]):
        if len(b["labels"]) != 2 * len(a["labels"]) - 1:
            raise ValueError("consecutive levels do not refine by mediants")
    return {
        "diagram": raw["diagram"],
        "levels": levels,
        "edges": [np.array(e, dtype=np.int64) for e in raw["edges"]],
    }


def diagram_to_dot(diagram: FareyDiagram, levels: int) -> str:
    lines = [f'digraph "{diagram.name}" {{', "  rankdir=TB;", "  node [shape=circle, fontsize=10];"]
    for n in range(levels):
        labels, sizes = diagram.labels(n), diagram.sizes(n)
        names = [f'"n{n}_{k}"' for k in range(len(labels))]
        for name, r, d in zip(names, labels, sizes):
            lines.append(f'  {name} [label="{r.numerator}/{r.denominator}\\n{d}"];')
        lines.append("  { rank=same; " + " ".join(names) + " }")
    for n in range(levels - 1):
        a = connecting_matrix(n)
        for i, j in zip(*np.nonzero(a)):
            lines.append(f'  "n{n}_{j}" -> "n{n + 1}_{i}";')
    lines.append("}")
    return "\n".join(lines) + "\n"
