"""Verification suites and report assembly.

Each suite returns a list of :class:`CheckResult`.  Suites draw randomness
from ``default_rng([seed, suite_index])`` so one suite's draws never depend on
which other suites run.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from fractions import Fraction

import numpy as np

from . import __version__
from .bratteli import (
    MAIN,
    AfElement,
    block_trace,
    center_embed,
    center_expectation,
    cond_expectation_level,
    connecting_matrix,
    embed,
    embed_range,
    hat,
    node_traces,
    normalized_trace,
    pi_rational,
    tau_at_point,
    trace_field,
)
from .checks import CheckResult, check
from .farey import branch_map, cf_expand, farey_level, gauss_integral, gauss_map, locate
from .gauss_nc import (
    G_s,
    H_s,
    ResourceError,
    ideal_check,
    nc_gauss,
    quotient_diagram,
    quotient_project,
    sigma_tilde,
    trace_relation_sides,
    v_tilde,
)
from .quadrature import QuadratureSpec
from .states import (
    branch_sum_check,
    commutative_restriction_check,
    intertwine_branch_check,
    isometry_branch_check,
    thm5_branch_check,
)
from .transfer import (
    apply_transfer,
    conjugation_check,
    gkw_estimate,
    invariance_check,
    isometry_check,
)

SUITES = ("farey", "af", "center", "nc", "states", "transfer", "spectral")
GKW_LITERATURE = 0.3036630028987326


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    level: int = 8
    smax: int = 4
    truncation: int = 4
    seed: int = 0
    tol: float | None = None
    quad_level: int = 8
    quad_nodes: int = 32
    transfer_terms: int = 10_000
    gkw_grid: int = 2000
    suites: tuple[str, ...] = SUITES
    samples: int = 200

    def __post_init__(self):
        for name in ("level", "smax", "truncation", "quad_nodes", "transfer_terms", "samples"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.quad_level < 0:
            raise ConfigError("quad_level must be nonnegative")
        if self.gkw_grid < 50:
            raise ConfigError("gkw_grid must be at least 50")
        if self.tol is not None and not self.tol > 0:
            raise ConfigError("tol must be positive")
        if not self.suites:
            raise ConfigError("select at least one suite")
        unknown = set(self.suites) - set(SUITES)
        if unknown:
            raise ConfigError(f"unknown suites: {sorted(unknown)}")

    @property
    def quad(self) -> QuadratureSpec:
        return QuadratureSpec(self.quad_level, self.quad_nodes)


def _exact(name, anchor, params, lhs, rhs) -> CheckResult:
    """Exact comparison of integers or fractions: abs_err is 0 or the true difference."""
    return CheckResult(name, anchor, params, lhs, rhs, abs(Fraction(lhs) - Fraction(rhs)), 0.0)


def _random_rational(rng, qmax: int) -> Fraction:
    q = int(rng.integers(2, qmax + 1))
    while True:
        p = int(rng.integers(1, q))
        if math.gcd(p, q) == 1:
            return Fraction(p, q)


# -- suites -----------------------------------------------------------------


def suite_farey(cfg: RunConfig, rng) -> list[CheckResult]:
    out = []
    for n in range(13):
        lev = farey_level(n)
        det = lev.p[1:] * lev.q[:-1] - lev.p[:-1] * lev.q[1:]
        worst = int(np.max(np.abs(det - 1)))
        out.append(_exact("neighbor_determinant", "Farey neighbors are unimodular", {"n": n}, 1 + worst, 1))
        gap = max(b - a for a, b in zip(lev.nodes, lev.nodes[1:]))
        out.append(_exact("max_gap", "largest Farey gap", {"n": n}, gap, Fraction(1, n + 1)))
    fib = [0, 1]
    while len(fib) < 24:
        fib.append(fib[-1] + fib[-2])
    for n in range(21):
        out.append(_exact("max_denominator", "Fibonacci growth of node sizes", {"n": n}, int(farey_level(n).q.max()), fib[n + 2]))
    for n in range(11):
        misses = 0
        for k, r in enumerate(farey_level(n).nodes):
            n0, k0 = locate(r)
            misses += k != k0 * 2 ** (n - n0)
        out.append(_exact("locate_roundtrip", "first appearance of each node", {"n": n}, misses, 0))
    shift_miss = level_miss = 0
    for _ in range(200):
        x = _random_rational(rng, 10**6)
        d = cf_expand(x)
        g = gauss_map(x)
        if (cf_expand(g) if g else []) != d[1:]:
            shift_miss += 1
        if locate(x)[0] + 1 != sum(d):
            level_miss += 1
    out.append(_exact("gauss_shift", "G shifts continued fraction digits", {"samples": 200}, shift_miss, 0))
    out.append(_exact("locate_digit_sum", "first level equals digit sum minus one", {"samples": 200}, level_miss, 0))
    labels = sorted(branch_map(2, r) for r in farey_level(2).nodes)
    expect = [Fraction(1, 3), Fraction(3, 8), Fraction(2, 5), Fraction(3, 7), Fraction(1, 2)]
    mismatch = sum(abs(a - b) for a, b in zip(labels, expect))
    out.append(CheckResult("quotient_labels", "window labels of branch 2", {"s": 2, "level": 2}, labels, expect, mismatch, 0.0))
    return out


def suite_af(cfg: RunConfig, rng) -> list[CheckResult]:
    out = []
    a0 = np.array([[1, 0], [1, 1], [0, 1]])
    a1 = np.array([[1, 0, 0], [1, 1, 0], [0, 1, 0], [0, 1, 1], [0, 0, 1]])
    for n, ref in ((0, a0), (1, a1)):
        a = connecting_matrix(n)
        err = 0 if a.shape == ref.shape and np.array_equal(a, ref) else 1
        out.append(_exact("connecting_matrix", "displayed connecting matrices", {"n": n}, err, 0))
    for n in range(13):
        err = int(np.max(np.abs(connecting_matrix(n) @ MAIN.sizes(n) - MAIN.sizes(n + 1))))
        out.append(_exact("multiplicity_sizes", "A_n maps sizes to sizes", {"n": n}, err, 0))

    top = cfg.level
    worst = 0.0
    for _ in range(cfg.samples):
        ell = int(rng.integers(1, top + 1))
        n = int(rng.integers(0, top - ell + 1))
        m = int(rng.integers(0, n + 1))
        x = AfElement.random(m, rng)
        k = int(rng.integers(0, 2**n + 1))
        (b0,) = embed_range(x, n, k, k)
        (b1,) = embed_range(x, n + ell, 2**ell * k, 2**ell * k)
        worst = max(worst, abs(normalized_trace(b0) - normalized_trace(b1)))
    out.append(CheckResult("trace_consistency", "tau_(n,k) = tau_(n+l, 2^l k)", {"samples": cfg.samples, "max_level": top}, 0.0, worst, worst, 1e-12))

    hom = tr = mod = tower = 0.0
    for m in range(min(top, 6) + 1):
        x, y = AfElement.random(m, rng), AfElement.random(m, rng)
        hom = max(hom, embed(x * y, m + 2).distance(embed(x, m + 2) * embed(y, m + 2)))
        z = AfElement.random(m + 2, rng)
        a, b = AfElement.random(m, rng), AfElement.random(m, rng)
        mod = max(mod, cond_expectation_level(embed(a, m + 2) * z * embed(b, m + 2), m).distance(a * cond_expectation_level(z, m) * b))
        tower = max(tower, cond_expectation_level(cond_expectation_level(z, m + 1), m).distance(cond_expectation_level(z, m)))
        w = AfElement.random(m + 2, rng)
        tr = max(tr, float(np.max(np.abs(node_traces(z * w) - node_traces(w * z)))))
    out.append(CheckResult("embed_homomorphism", "connecting maps are *-homomorphisms", {"levels": min(top, 6)}, 0.0, hom, hom, 1e-12))
    out.append(CheckResult("expectation_module", "E_m(a x b) = a E_m(x) b", {"levels": min(top, 6)}, 0.0, mod, mod, 1e-12))
    out.append(CheckResult("expectation_tower", "E_m E_n = E_m", {"levels": min(top, 6)}, 0.0, tower, tower, 1e-12))
    out.append(CheckResult("block_traciality", "tau_(n,k)(xy) = tau_(n,k)(yx)", {"levels": min(top, 6)}, 0.0, tr, tr, 1e-12))

    worst = 0.0
    for _ in range(100):
        m = int(rng.integers(0, 5))
        x = AfElement.random(m, rng)
        r = _random_rational(rng, 40)
        worst = max(worst, abs(normalized_trace(pi_rational(x, r)) - tau_at_point(r, x)))
    out.append(CheckResult("path_evaluation_trace", "tau_(p/q) = tau_q o pi_(p/q)", {"samples": 100}, 0.0, worst, worst, 1e-12))
    return out


def suite_center(cfg: RunConfig, rng) -> list[CheckResult]:
    out = []
    for n in range(1, 6):
        for k in range(1, 2**n, 2):
            x = AfElement(MAIN, n, tuple(np.eye(d) if j == k else np.zeros((d, d)) for j, d in enumerate(MAIN.sizes(n))))
            h = hat(n, k)
            worst = 0.0
            for ell in range(6):
                lo, hi = 2**ell * (k - 1), 2**ell * (k + 1)
                traces = np.zeros(2 ** (n + ell) + 1, dtype=complex)
                traces[lo : hi + 1] = [normalized_trace(b) for b in embed_range(x, n + ell, lo, hi)]
                expect = np.array([h(r) for r in farey_level(n + ell).nodes])
                worst = max(worst, float(np.max(np.abs(traces - expect))))
            out.append(CheckResult("hat_identity", "f_x = B_(n,k) on a minimal central projection", {"n": n, "k": k}, 0.0, worst, worst, 1e-12))

    N = min(cfg.level, 6)
    worst = 0.0
    for _ in range(20):
        m = int(rng.integers(0, N + 1))
        x = AfElement.random(m, rng)
        ez = center_expectation(x, N)
        for n in range(N + 1):
            for k in range(2**n + 1):
                worst = max(worst, abs(block_trace(ez, n, k) - block_trace(x, n, k)))
    out.append(CheckResult("center_expectation_traces", "E_Z preserves every tau_(n,k)", {"N": N, "samples": 20}, 0.0, worst, worst, 1e-12))

    worst = 0.0
    for m in range(N + 1):
        c = rng.standard_normal(4)
        z = center_embed(lambda t: np.polynomial.polynomial.polyval(t, c), m)
        worst = max(worst, center_expectation(z, m).distance(z))
    out.append(CheckResult("center_expectation_fixes_center", "E_Z(Z(f)) = Z(f)", {"N": N}, 0.0, worst, worst, 1e-14))

    x = AfElement(MAIN, 1, (np.zeros((1, 1)), np.eye(2), np.zeros((1, 1))))
    got = [normalized_trace(b) for b in center_expectation(x, 2).blocks]
    expect = [0.0, 2 / 3, 1.0, 2 / 3, 0.0]
    err = max(abs(a - b) for a, b in zip(got, expect))
    out.append(CheckResult("center_expectation_example", "E_Z of the middle projection", {"N": 2}, got, expect, err, 1e-12))

    t = gauss_integral(trace_field(center_embed(lambda v: v, 1)))
    out.append(check("gauss_integral_identity", "int theta dmu", {}, t, 1 / math.log(2) - 1, 1e-14))
    return out


def suite_nc(cfg: RunConfig, rng) -> list[CheckResult]:
    out = []
    q2 = quotient_diagram(2)
    ok = all(
        sorted(zip(q2.labels(m), q2.sizes(m).tolist())) == sorted(zip(MAIN.labels(m + 2)[2**m : 2 ** (m + 1) + 1], MAIN.sizes(m + 2)[2**m : 2 ** (m + 1) + 1].tolist()))
        for m in range(4)
    )
    row = [int(d) for _, d in sorted(zip(q2.labels(2), q2.sizes(2)))]
    out.append(_exact("quotient_diagram", "branch-2 quotient is the window subdiagram", {"s": 2, "levels": 4}, int(not ok) + int(row != [3, 8, 5, 7, 2]), 0))

    for s in range(1, cfg.smax + 1):
        gh = mod = cen = 0.0
        for m in range(5):
            x = AfElement.random(m, rng)
            gh = max(gh, G_s(H_s(x, s), s).distance(x))
            a = AfElement.random(m + s, rng)
            y = AfElement.random(m, rng)
            mod = max(mod, G_s(a * H_s(y, s), s).distance(G_s(a, s) * y))
            c = rng.standard_normal(3)

            def f(t, c=c):
                return np.polynomial.polynomial.polyval(t, c)

            cen = max(cen, G_s(center_embed(f, m + s), s).distance(center_embed(lambda t: f(1.0 / (t + s)), m)))
        out.append(CheckResult("left_inverse", "G_s H_s = id", {"s": s}, 0.0, gh, gh, 1e-12))
        out.append(CheckResult("module_identity", "G_s(x H_s(y)) = G_s(x) y", {"s": s}, 0.0, mod, mod, 1e-12))
        out.append(CheckResult("center_branch", "G_s(Z(f)) = Z(f o g_s)", {"s": s}, 0.0, cen, cen, 1e-12))

        x, y = AfElement.random(3, rng), AfElement.random(3, rng)
        tr = 0.0
        for level in range(0, 9 - s + 1):
            left, right = trace_relation_sides(x, y, s, level)
            tr = max(tr, float(np.max(np.abs(left - right))))
        out.append(CheckResult("trace_relation", "tau_(g_s u)(H_s(x) y) = s g_s(u) tau_u(x G_s(y))", {"s": s, "max_level": 9}, 0.0, tr, tr, 1e-12))

        hom = fill = 0.0
        for m in range(4):
            a, b = AfElement.random(m + s, rng), AfElement.random(m + s, rng)
            hom = max(hom, (quotient_project(a * b, s) - quotient_project(a, s) * quotient_project(b, s)).norm())
            u, v = AfElement.random(m, rng), AfElement.random(m, rng)
            hom = max(hom, (sigma_tilde(u * v, s) - sigma_tilde(u, s) * sigma_tilde(v, s)).norm())
            hom = max(hom, v_tilde(sigma_tilde(u, s), s).distance(u))
            hom = max(hom, embed(sigma_tilde(u, s), m + 1).distance(sigma_tilde(embed(u, m + 1), s)))
            q = AfElement.random(m, rng, quotient_diagram(s))
            hom = max(hom, embed(v_tilde(q, s), m + 1).distance(v_tilde(embed(q, m + 1), s)))
            w = AfElement.random(m + s, rng)
            _, rt = trace_relation_sides(u, w, s, m)
            for side_fill in ("nearest", "mean"):
                lifted = H_s(u, s, side_fill) * w
                vals = [normalized_trace(pi_rational(lifted, branch_map(s, r))) for r in farey_level(m).nodes]
                fill = max(fill, float(np.max(np.abs(np.array(vals) - rt))))
        out.append(CheckResult("branch_homomorphisms", "pi_s, sigma_s multiplicative; V_s sigma_s = id; commuting squares", {"s": s}, 0.0, hom, hom, 1e-12))
        out.append(CheckResult("lift_fill_independence", "trace relation through either lifting fill", {"s": s}, 0.0, fill, fill, 1e-12))

        for theta in (Fraction(0), Fraction(1, 3), Fraction(2, 5), Fraction(1), 1 / math.sqrt(2)):
            r = ideal_check(theta, s, rng, samples=50)
            r.tol = 1e-10
            out.append(r)

    try:
        x = AfElement.random(3, rng, kind="psd")
        g, tail = nc_gauss(x, cfg.truncation)
        lam = g.min_eigenvalue()
        out.append(CheckResult("nc_gauss_positive", "G of a positive element is positive", {"S": cfg.truncation}, lam, 0.0, max(0.0, -lam), 1e-10))
        S = cfg.truncation
        one, tail1 = nc_gauss(AfElement.identity(3), S)
        # the omitted mass is exactly (theta+1)/(theta+S+1) <= 2/(S+2)
        deficit = center_embed(lambda t: (t + 1.0) / (t + S + 1.0), 3)
        err = (AfElement.identity(3) - one).distance(deficit)
        out.append(CheckResult("nc_gauss_unital", "G(1) = 1 up to the omitted branches", {"S": S, "tail_bound": tail1}, 0.0, err, err, 1e-12))
        c = rng.standard_normal(3)

        def f(t):
            return np.polynomial.polynomial.polyval(t, c)

        gz, _ = nc_gauss(f, S, level=4)
        ref, _ = apply_transfer(f, farey_level(4).values, S)
        err = float(np.max(np.abs(node_traces(gz) - ref)))
        out.append(CheckResult("nc_gauss_center", "G restricted to the center is the transfer operator", {"S": cfg.truncation}, 0.0, err, err, 1e-12))
    except ResourceError as exc:
        out.append(CheckResult.skipped("nc_gauss", "truncated noncommutative Gauss map", {"S": cfg.truncation}, str(exc)))
    return out


def suite_states(cfg: RunConfig, rng) -> list[CheckResult]:
    out = []
    spec = cfg.quad
    for s in range(1, cfg.smax + 2):
        for m in range(4):
            x, y, z = AfElement.random(m, rng), AfElement.random(m, rng), AfElement.random(m, rng)
            for r in (
                isometry_branch_check(x, s, spec, tol=1e-7),
                intertwine_branch_check(x, y, z, s, spec, tol=1e-7),
                thm5_branch_check(x, s, spec, tol=1e-7),
            ):
                out.append(r)
        c = rng.standard_normal(5)
        out.append(
            commutative_restriction_check(
                lambda t, c=c: np.polynomial.polynomial.polyval(t, c), s, 3, spec=spec, label="quartic"
            )
        )
    for m in range(4):
        try:
            out.extend(branch_sum_check(AfElement.random(m, rng), cfg.truncation))
        except ResourceError as exc:
            out.append(CheckResult.skipped("branch_sums", "branch sums", {"level": m}, str(exc)))
    return out


def _poly(c):
    return lambda t: np.polynomial.polynomial.polyval(t, c)


def suite_transfer(cfg: RunConfig, rng) -> list[CheckResult]:
    out = []
    theta = np.linspace(0.0, 1.0, 101)
    S = cfg.transfer_terms
    val, _ = apply_transfer(lambda t: np.ones_like(t), theta, S)
    tail = (theta + 1) / (theta + S + 1)
    err = float(np.max(np.abs((1.0 - val) - tail)))
    out.append(CheckResult("transfer_unital", "G(1) = 1 - (theta+1)/(theta+S+1)", {"S": S, "grid": 101}, 0.0, err, err, 1e-12))
    worst = float(np.max(1.0 - val))
    out.append(CheckResult("transfer_tail", "G(1) within 2/(S+2)", {"S": S}, worst, 2 / (S + 2), max(0.0, worst - 2 / (S + 2)), 0.0))
    for d in range(7):
        f = _poly([0] * d + [1])
        out.append(invariance_check(f, S, cfg.quad, label=f"x^{d}"))
        out.append(isometry_check(f, spec=cfg.quad, label=f"x^{d}"))
    for i in range(3):
        f, g, h = (_poly(rng.standard_normal(4)) for _ in range(3))
        out.append(conjugation_check(f, g, h, spec=cfg.quad, label=f"cubic_{i}"))
    return out


def suite_spectral(cfg: RunConfig, rng) -> list[CheckResult]:
    N = cfg.gkw_grid
    coarse, fine = gkw_estimate(N // 2), gkw_estimate(N)
    return [
        check("gkw_leading", "leading eigenvalue of G", {"grid": N}, fine.leading, 1.0, 1e-8),
        CheckResult("gkw_density", "invariant density is constant", {"grid": N}, 0.0, fine.density_error, fine.density_error, 1e-8),
        check("gkw_refinement", "subleading modulus under grid doubling", {"grid": N}, fine.modulus, coarse.modulus, 1e-4),
        check("gkw_literature", "subleading modulus against the known constant", {"grid": N}, fine.modulus, GKW_LITERATURE, 1e-4),
    ]


SUITE_FUNCS = {
    "farey": suite_farey,
    "af": suite_af,
    "center": suite_center,
    "nc": suite_nc,
    "states": suite_states,
    "transfer": suite_transfer,
    "spectral": suite_spectral,
}


def run_suites(cfg: RunConfig) -> list[CheckResult]:
    results = []
    for idx, name in enumerate(SUITES):
        if name not in cfg.suites:
            continue
        rng = np.random.default_rng([cfg.seed, idx])
        t0 = time.perf_counter()
        batch = SUITE_FUNCS[name](cfg, rng)
        per = (time.perf_counter() - t0) / max(1, len(batch))
        for r in batch:
            r.suite = name
            r.wall_time = per
            if cfg.tol is not None and r.status != "skipped":
                r.tol = cfg.tol
                r.status = "pass" if r.abs_err <= r.tol else "fail"
        results.extend(sorted(batch, key=lambda r: (r.name, json.dumps(r.to_dict(False)["params"], sort_keys=True))))
    return results


def build_report(cfg: RunConfig, results: list[CheckResult], timestamps: bool = True) -> dict:
    counts = {k: sum(r.status == k for r in results) for k in ("pass", "fail", "skipped")}
    report = {
        "tool": "ncgauss",
        "version": __version__,
        "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(cfg).items()},
        "summary": {**counts, "total": len(results), "ok": counts["fail"] == 0},
        "checks": [r.to_dict(timestamps) for r in results],
    }
    if timestamps:
        report["generated"] = datetime.now(timezone.utc).isoformat()
    return report


def report_to_json(report: dict) -> str:
    return json.dumps(report, indent=1, sort_keys=True) + "\n"


def report_to_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["suite", "name", "anchor", "params", "lhs", "rhs", "abs_err", "tol", "status"])
    for c in report["checks"]:
        w.writerow([
            c["suite"], c["name"], c["anchor"], json.dumps(c["params"], sort_keys=True),
            json.dumps(c["lhs"]), json.dumps(c["rhs"]), repr(c["abs_err"]), repr(c["tol"]), c["status"],
        ])
    return buf.getvalue()

