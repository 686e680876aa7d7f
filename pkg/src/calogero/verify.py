"""Invariant batteries behind ``calogero verify``.

Every check yields a :class:`Check` with the measured residual, the
tolerance and a direction (``"below"`` for residuals that must vanish,
``"above"`` for detector checks that must fire).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .dynamics import (anomaly_residual, gauge_slice_momentum, hamiltonian, lax,
                       momentum_constraint_check)
from .errors import CalogeroError
from .liealg import build_model, fold, folded_vector_residuals, folding_automorphism, golden_folded_sets
from .models import closed_form_hamiltonian, get_model, random_state
from .rmatrix import (antisymmetry_residual, cayley, cdybe_residual, compatibility_residual,
                      equivariance_residual, eval_r, shifted_spec)

RMATRIX_MODELS = (
    "A1-split", "A2-split", "A3-split", "D4-split",
    "A1-compact", "A2-compact", "A3-compact", "D4-compact",
    "A2-split-folded", "A3-split-folded", "D3-split-folded",
    "A2-compact-folded", "A3-compact-folded", "D3-compact-folded",
    "A1-split-cyclic2", "A1-split-cyclic3", "A1-compact-cyclic2", "A1-compact-cyclic3",
    "A1-split-rational", "A2-split-rational", "A3-split-rational",
    "A1-compact-rational", "A2-compact-rational",
)
DYNAMICS_MODELS = (
    "A1-split", "A2-split", "A1-compact", "A2-compact",
    "A2-split-folded", "A3-compact-folded", "A1-split-cyclic2",
    "A1-split-rational", "A2-compact-rational",
)
FOLDINGS = (("A", 1), ("A", 3), ("A", 5), ("A", 2), ("A", 4), ("A", 6),
            ("D", 2), ("D", 3), ("D", 4), ("D", 5))
SUITES = ("rmatrix", "dynamics", "folding")


@dataclass(frozen=True)
class Check:
    suite: str
    check: str
    model: str
    value: float
    tolerance: float
    direction: str = "below"
    error: str = ""

    @property
    def passed(self):
        if self.error:
            return False
        if self.direction == "below":
            return self.value < self.tolerance
        return self.value > self.tolerance

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d


def worker_count():
    cap = os.environ.get("CALOGERO_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = max(1, min(n, int(cap)))
        except ValueError:
            pass
    return n


def _stable(tag):
    return sum((i + 1) * ord(c) for i, c in enumerate(tag))


def rmatrix_checks(name, seed, samples, corrupt=False):
    entry = get_model(name)
    spec = entry.spec.corrupted() if corrupt else entry.spec
    rng = np.random.default_rng([seed, _stable(name)])
    worst = {"antisymmetry": 0.0, "compatibility": 0.0, "equivariance": 0.0, "cdybe": 0.0}
    cay_k = cay_perp = 0.0
    for _ in range(samples):
        q = random_state(entry, rng).q
        x, y = rng.standard_normal((2, entry.model.dim))
        worst["antisymmetry"] = max(worst["antisymmetry"], antisymmetry_residual(spec, q))
        worst["compatibility"] = max(worst["compatibility"], compatibility_residual(spec, q))
        worst["equivariance"] = max(worst["equivariance"], equivariance_residual(spec, q))
        worst["cdybe"] = max(worst["cdybe"],
                             float(np.linalg.norm(cdybe_residual(spec, q, x, y))))
        if spec.kind == "trigonometric":
            rep = cayley(spec, q)
            cay_k = max(cay_k, rep.k_residual)
            cay_perp = max(cay_perp, rep.perp_residual)
    tol = {"antisymmetry": 1e-12, "compatibility": 1e-12, "equivariance": 1e-12,
           "cdybe": 1e-8}
    out = [Check("rmatrix", k, name, v, tol[k]) for k, v in worst.items()]
    if spec.kind == "trigonometric":
        out.append(Check("rmatrix", "cayley_K", name, cay_k, 1e-12))
        out.append(Check("rmatrix", "cayley_perp", name, cay_perp, 1e-11))
    if entry.variant == "principal" and entry.form == "compact" and spec.kind == "trigonometric":
        out.append(Check("rmatrix", "shift", name, shift_residual(entry, rng, samples), 1e-11))
    return out


def shift_residual(entry, rng, samples, margin=0.2):
    """max |R(q + v) - R'(q)| with R' built from theta' = e^{ad_v} theta.

    Both q and q + v are kept at distance ``margin`` from the singular set.
    """
    worst, done = 0.0, 0
    while done < max(1, samples // 4):
        q = random_state(entry, rng).q
        v = 0.3 * random_state(entry, rng).q
        try:
            shifted = eval_r(entry.spec, q + v)
        except CalogeroError:
            continue
        if shifted.regularity < margin:
            continue
        rhs = eval_r(shifted_spec(entry.spec, v), q).operator
        worst = max(worst, float(np.max(np.abs(shifted.operator - rhs))))
        done += 1
    return worst


def dynamics_checks(name, seed, samples, corrupt=False):
    entry = get_model(name)
    spec = entry.spec.corrupted() if corrupt else entry.spec
    rng = np.random.default_rng([seed, _stable(name), 1])
    n = max(1, samples // 2)
    anomaly = lax_id = 0.0
    for _ in range(n):
        s = random_state(entry, rng, constrained=False)
        anomaly = max(anomaly, float(np.max(np.abs(anomaly_residual(spec, s)))))
        L = lax(spec, s).L
        lax_id = max(lax_id, abs(hamiltonian(spec, s) - 0.5 * entry.model.pairing(L, L)))
    out = [Check("dynamics", "anomaly", name, anomaly, 1e-6),
           Check("dynamics", "hamiltonian_lax", name, lax_id, 1e-12)]
    if entry.has_closed_form:
        cf = 0.0
        for _ in range(n):
            s = random_state(entry, rng)
            cf = max(cf, abs(closed_form_hamiltonian(entry, s) - hamiltonian(spec, s)))
        out.append(Check("dynamics", "closed_form", name, cf, 1e-12))
    if spec.kind == "trigonometric":
        on, off = momentum_battery(entry, spec, rng, n)
        out.append(Check("dynamics", "momentum_slice", name, on, 1e-10))
        out.append(Check("dynamics", "momentum_perturbed", name, off, 1e-4, "above"))
    return out


def momentum_battery(entry, spec, rng, n):
    """(max of both residuals on the gauge slice, min of both off the slice)."""
    sp = entry.split
    on, off = 0.0, np.inf
    for _ in range(n):
        q = random_state(entry, rng).q
        jk = rng.standard_normal(sp.r)
        xp = rng.standard_normal(sp.m)
        J = gauge_slice_momentum(spec, q, jk, xp)
        xi = sp.embed_perp(xp)
        on = max(on, *momentum_constraint_check(spec, q, J, xi))
        bad_j = J + 0.1 * rng.standard_normal(J.size)
        off = min(off, *momentum_constraint_check(spec, q, bad_j, xi))
    return on, off


def folding_checks(family, rank):
    name = f"{family}{rank}"
    out = []
    for form in ("split", "compact"):
        built = build_model(family, rank, form)
        tau = folding_automorphism(built)
        fd = fold(built, tau)
        delta, gamma = golden_folded_sets(family, rank)
        mism = len(set(fd.delta_plus) ^ delta) + len(set(fd.gamma_plus) ^ gamma)
        out.append(Check("folding", f"golden_sets_{form}", name, float(mism), 0.5))
        res = folded_vector_residuals(fd, built.model.scale,
                                      tau.matrix_map)
        out.append(Check("folding", f"normalization_{form}", name,
                         max(res.values()), 1e-12))
    return out


def _safe(suite, name, fn, *args):
    try:
        return fn(*args)
    except CalogeroError as exc:
        return [Check(suite, "error", name, float("nan"), 0.0, error=str(exc))]


def run_suite(suite="all", seed=0, samples=100, corrupt=False, workers=None):
    """Run one battery (or all) and return the list of checks in a fixed order."""
    suites = SUITES if suite == "all" else (suite,)
    jobs = []
    for s in suites:
        if s == "rmatrix":
            jobs += [("rmatrix", n, rmatrix_checks, n, seed, samples, corrupt)
                     for n in RMATRIX_MODELS]
        elif s == "dynamics":
            jobs += [("dynamics", n, dynamics_checks, n, seed, samples, corrupt)
                     for n in DYNAMICS_MODELS]
        elif s == "folding":
            jobs += [("folding", f"{f}{r}", folding_checks, f, r) for f, r in FOLDINGS]
        else:
            raise ValueError(f"unknown suite {s!r}")
    workers = workers or worker_count()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_safe, j[0], j[1], j[2], *j[3:]) for j in jobs]
        results = [f.result() for f in futures]
    return [c for block in results for c in block]
