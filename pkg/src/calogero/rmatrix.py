"""Rational and trigonometric dynamical r-matrices.

Operators are dense matrices acting on coefficient vectors of the model.  All
of them vanish on K and preserve K^perp; the K^perp block is obtained by
solving on that block directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import CayleyDomainError, PreconditionError, SingularityError
from .liealg import Automorphism, LieAlgebraModel, SubalgebraSplit, identity_automorphism
from .matfun import expm

REGULARITY_THRESHOLD = 1e-8


@dataclass(frozen=True, eq=False)
class RMatrixSpec:
    """A dynamical r-matrix family bound to a model, a split and (for the
    trigonometric kind) an automorphism theta fixing K pointwise.

    ``scale`` multiplies the whole operator; it exists only to build
    deliberately corrupted r-matrices for detector checks.
    """

    kind: str
    model: LieAlgebraModel
    split: SubalgebraSplit
    theta: Automorphism | None = None
    threshold: float = REGULARITY_THRESHOLD
    scale: float = 1.0
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.kind not in ("rational", "trigonometric"):
            raise PreconditionError(f"unknown r-matrix kind {self.kind!r}")
        if self.kind == "trigonometric" and self.theta is None:
            object.__setattr__(self, "theta", identity_automorphism(self.model))

    @property
    def nu(self):
        return 1.0 if self.kind == "trigonometric" else 0.0

    def corrupted(self, factor=1.1):
        return replace(self, scale=self.scale * factor)


@dataclass(frozen=True)
class OperatorAtPoint:
    q: np.ndarray
    operator: np.ndarray
    regularity: float


def _ad_q(spec, q):
    return spec.model.ad(spec.split.embed(q))


def _core_perp(spec, q):
    """(restricted generator, smallest singular value).

    The generator is ``theta e^{ad_q}`` (trigonometric) or ``ad_q`` (rational)
    on K^perp.
    """
    q = np.asarray(q, dtype=float)
    if q.shape != (spec.split.r,):
        raise PreconditionError(f"q must have {spec.split.r} K-coordinates")
    ad = _ad_q(spec, q)
    if spec.kind == "trigonometric":
        with np.errstate(over="ignore", invalid="ignore"):
            c = spec.split.restrict(spec.theta.operator @ expm(ad))
    else:
        c = spec.split.restrict(ad)
    if not np.all(np.isfinite(c)):
        raise SingularityError(f"q={q} is out of floating-point range", 0.0)
    if spec.kind == "trigonometric":
        sv = np.linalg.svd(c - np.eye(spec.split.m), compute_uv=False)
    else:
        sv = np.linalg.svd(c, compute_uv=False)
    smin = float(sv[-1]) if sv.size else np.inf
    if not smin > spec.threshold:
        raise SingularityError(
            f"q={q} is too close to the singular set (sigma_min={smin:.3e})", smin)
    return c, smin


def _r_perp(spec, q):
    c, smin = _core_perp(spec, q)
    eye = np.eye(spec.split.m)
    if spec.kind == "trigonometric":
        r = 0.5 * np.linalg.solve((c - eye).T, (c + eye).T).T
    else:
        r = np.linalg.inv(c)
    return spec.scale * r, smin


def eval_r(spec: RMatrixSpec, q) -> OperatorAtPoint:
    """R(q): zero on K, (ad_q)^-1 or 1/2 (C+1)(C-1)^-1 with C = theta e^{ad_q} on K^perp."""
    r, smin = _r_perp(spec, q)
    return OperatorAtPoint(np.asarray(q, float), spec.split.extend(r), smin)


def eval_r_plus(spec: RMatrixSpec, q) -> OperatorAtPoint:
    """R_+(q) = R(q) + nu/2."""
    out = eval_r(spec, q)
    op = out.operator + 0.5 * spec.nu * np.eye(spec.model.dim)
    return OperatorAtPoint(out.q, op, out.regularity)


def r_plus_perp(spec, q):
    """K^perp block of R_+(q) (used for inversions)."""
    r, _ = _r_perp(spec, q)
    return r + 0.5 * spec.nu * np.eye(spec.split.m)


def partial_r(spec: RMatrixSpec, q, method="analytic"):
    """List of dR/dq^i for the K basis directions, i = 1..dim K."""
    if method == "fd":
        return [nabla_r_fd(spec, q, e) for e in np.eye(spec.split.r)]
    c, _ = _core_perp(spec, q)
    eye = np.eye(spec.split.m)
    out = []
    if spec.kind == "trigonometric":
        inv = np.linalg.inv(c - eye)
        pre = -c @ inv @ inv
    else:
        inv = np.linalg.inv(c)
        pre = -inv @ inv
    for i in range(spec.split.r):
        ad_i = spec.split.restrict(spec.model.ad(spec.split.k_basis[:, i]))
        out.append(spec.scale * spec.split.extend(pre @ ad_i))
    return out


def nabla_r(spec: RMatrixSpec, q, kappa, method="analytic"):
    """Directional derivative (nabla_kappa R)(q) = kappa^i dR/dq^i.

    The analytic route uses d/dq^i R = -C (C-1)^-2 ad_{T_i} (trigonometric)
    and -ad_q^-2 ad_{T_i} (rational); ``method="fd"`` uses central finite
    differences with one Richardson extrapolation.
    """
    kappa = np.asarray(kappa, dtype=float)
    if method == "fd":
        return nabla_r_fd(spec, q, kappa)
    parts = partial_r(spec, q)
    return sum((k * p for k, p in zip(kappa, parts)),
               np.zeros((spec.model.dim, spec.model.dim)))


def nabla_r_fd(spec, q, kappa, rel_step=1e-5):
    q = np.asarray(q, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    if not np.any(kappa):
        return np.zeros((spec.model.dim, spec.model.dim))
    h = rel_step * (1.0 + np.linalg.norm(q))
    if q.size and h < 1e-12 * (1.0 + np.max(np.abs(q))):
        raise PreconditionError("finite-difference step underflow")

    def central(step):
        return (eval_r(spec, q + step * kappa).operator
                - eval_r(spec, q - step * kappa).operator) / (2 * step)

    return (4 * central(h / 2) - central(h)) / 3


def cdybe_residual(spec: RMatrixSpec, q, x, y, method="analytic"):
    """E_nu(R, X, Y) as a coefficient vector; zero for a dynamical r-matrix."""
    m, sp = spec.model, spec.split
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    r = eval_r(spec, q).operator
    parts = partial_r(spec, q, method)
    rx, ry = r @ x, r @ y
    out = 0.25 * spec.nu ** 2 * m.bracket(x, y)
    out = out + m.bracket(rx, ry) - r @ (m.bracket(x, ry) + m.bracket(rx, y))
    cov = np.array([m.pairing(x, d @ y) for d in parts])
    out = out + sp.dual_k(cov)
    xk = sp.k_coords(x)
    yk = sp.k_coords(y)
    out = out + sum(c * (d @ x) for c, d in zip(yk, parts))
    out = out - sum(c * (d @ y) for c, d in zip(xk, parts))
    return out


def antisymmetry_residual(spec, q):
    r = eval_r(spec, q).operator
    g = spec.model.gram
    return float(np.max(np.abs(g @ r + (g @ r).T)))


def compatibility_residual(spec, q):
    """max of |R(q) on K| and the K-component of R(q) K^perp."""
    r = eval_r(spec, q).operator
    sp = spec.split
    on_k = np.max(np.abs(r @ sp.k_basis))
    leak = np.max(np.abs(sp.k_left @ r @ sp.perp_basis), initial=0.0)
    return float(max(on_k, leak))


def equivariance_residual(spec, q):
    """max_i |[ad_{T_i}, R(q)]| over the K basis."""
    r = eval_r(spec, q).operator
    worst = 0.0
    for i in range(spec.split.r):
        ad = spec.model.ad(spec.split.k_basis[:, i])
        worst = max(worst, float(np.max(np.abs(ad @ r - r @ ad))))
    return worst


@dataclass(frozen=True)
class CayleyReport:
    operator: np.ndarray
    k_residual: float                 # |C|_K + id_K|
    perp_residual: float | None       # |C|_perp - theta e^{ad_q}|_perp|
    orthogonality: float              # |C^T G C - G|


def cayley(spec: RMatrixSpec, q, cond_limit=1e12) -> CayleyReport:
    """C(q) = R_+ R_-^{-1} with R_pm = R +- 1/2, plus the identity report."""
    m, sp = spec.model, spec.split
    r = eval_r(spec, q).operator
    eye = np.eye(m.dim)
    r_minus = r - 0.5 * eye
    if np.linalg.cond(r_minus) > cond_limit:
        raise CayleyDomainError("R - 1/2 is singular at this point")
    c = np.linalg.solve(r_minus.T, (r + 0.5 * eye).T).T
    k_res = float(np.max(np.abs(c @ sp.k_basis + sp.k_basis)))
    perp_res = None
    if spec.kind == "trigonometric":
        target = spec.theta.operator @ expm(_ad_q(spec, q))
        perp_res = float(np.max(np.abs(sp.restrict(c) - sp.restrict(target))))
    orth = float(np.max(np.abs(c.T @ m.gram @ c - m.gram)))
    return CayleyReport(c, k_res, perp_res, orth)


def shifted_spec(spec: RMatrixSpec, v) -> RMatrixSpec:
    """Spec with theta replaced by e^{ad_v} theta for a constant v in K."""
    ev = expm(spec.model.ad(spec.split.embed(v)))
    theta = Automorphism(spec.model, ev @ spec.theta.operator,
                         order=0, name=f"exp(ad_v){spec.theta.name}")
    return replace(spec, theta=theta)
