"""Catalogue of spin Calogero models with closed-form Hamiltonians.

Entries come in three kinds:

* principal models on the split or compact form of A_n / D_n with theta = id,
  trigonometric or rational;
* folded models, theta = the involutive diagram automorphism and K = H^+;
* cyclic models on a direct sum of N copies with theta permuting the summands.

Names follow ``<F><rank>-<form>[-folded|-rational|-cyclic<N>]``, e.g.
``A1-split``, ``A3-compact-folded``, ``A2-split-rational``, ``A1-split-cyclic3``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .dynamics import PhaseState, constraint_residual
from .errors import CapabilityError, PreconditionError, SingularityError
from .liealg import (Automorphism, BuiltModel, FoldedData, LieAlgebraModel, SubalgebraSplit,
                     build_model, diagram_automorphism, fold, folding_automorphism,
                     identity_automorphism)
from .rmatrix import RMatrixSpec, eval_r

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class ModelCatalogEntry:
    name: str
    spec: RMatrixSpec
    variant: str                          # principal | folded | cyclic
    built: BuiltModel | None = None
    folded: FoldedData | None = None
    copies: int = 1
    descriptor: dict = field(default_factory=dict)

    @property
    def model(self) -> LieAlgebraModel:
        return self.spec.model

    @property
    def split(self) -> SubalgebraSplit:
        return self.spec.split

    @property
    def theta(self) -> Automorphism | None:
        return self.spec.theta

    @property
    def form(self):
        return self.model.form

    @property
    def has_closed_form(self):
        return self.variant in ("principal", "folded")


# ---------------------------------------------------------------------------
# construction


def principal_model(family, rank, form="split", kind="trigonometric") -> ModelCatalogEntry:
    """Full Cartan K, theta = id (trigonometric) or the rational r-matrix."""
    built = build_model(family, rank, form)
    theta = identity_automorphism(built.model) if kind == "trigonometric" else None
    suffix = "-rational" if kind == "rational" else ""
    name = f"{built.model.family}{rank}-{form}{suffix}"
    desc = {"family": built.model.family, "rank": rank, "form": form,
            "automorphism": "trivial", "kind": kind}
    spec = RMatrixSpec(kind, built.model, built.split, theta, name=name)
    return ModelCatalogEntry(name, spec, "principal", built, None, 1, desc)


def folded_model(family, rank, form="split") -> ModelCatalogEntry:
    """Diagram-folded model of A_{2n-1}, A_{2n} or D_{n+1}.

    ``rank`` is the rank of the unfolded algebra; K = H^+ is spanned by
    ``h_m = E_mm - E_{N-m,N-m}`` (times i for the compact form).
    """
    built = build_model(family, rank, form)
    m = built.model
    tau = folding_automorphism(built)
    fd = fold(built, tau)
    phase = 1.0 if form == "split" else 1j
    kb = np.array([m.to_coeffs(phase * h) for h in fd.hplus]).T
    split = SubalgebraSplit(m, kb)
    tau.check(split)
    name = f"{m.family}{rank}-{form}-folded"
    spec = RMatrixSpec("trigonometric", m, split, tau, name=name)
    desc = {"family": m.family, "rank": rank, "form": form,
            "automorphism": "diagram", "kind": "trigonometric"}
    return ModelCatalogEntry(name, spec, "folded", built, fd, 1, desc)


def _direct_sum_basis(model, copies):
    n = model.size
    mats, labels = [], []
    for j in range(copies):
        for t, lab in zip(model.basis, model.labels):
            big = np.zeros((copies * n, copies * n), dtype=complex)
            big[j * n:(j + 1) * n, j * n:(j + 1) * n] = t
            mats.append(big)
            labels.append(f"{lab}@{j + 1}")
    return np.array(mats), labels


def cyclic_model(family, rank, form="split", copies=2, tau="id") -> ModelCatalogEntry:
    """N-fold direct sum with theta(u_1, .., u_N) = (tau u_N, tau u_1, .., tau u_{N-1}).

    K is the diagonal embedding of the inner Cartan subalgebra (for a
    non-trivial ``tau`` only its tau-fixed part).
    """
    if copies < 2:
        raise PreconditionError("the cyclic construction needs at least two copies")
    built = build_model(family, rank, form)
    inner = built.model
    if tau == "id":
        tau_auto = identity_automorphism(inner)
        inner_k = built.split.k_basis
    elif tau == "diagram":
        if copies % 2 == 0:
            # (h, -h, ..) with h in H^- is theta-fixed and ad_K-null: R is nowhere defined
            raise CapabilityError("a diagram twist needs an odd number of copies")
        tau_auto = diagram_automorphism(inner)
        inner_k = folded_model(family, rank, form).split.k_basis
    else:
        raise CapabilityError(f"unknown inner automorphism {tau!r}")
    t_op = tau_auto.operator
    if np.max(np.abs(t_op.T @ inner.gram @ t_op - inner.gram)) > 1e-12:
        raise PreconditionError("inner automorphism is not an isometry")

    basis, labels = _direct_sum_basis(inner, copies)
    model = LieAlgebraModel(basis, scale=inner.scale, family=inner.family,
                            rank=inner.rank, form=form, labels=labels)
    d = inner.dim
    op = np.zeros((copies * d, copies * d))
    for j in range(copies):
        src = (j - 1) % copies           # copy j of the image is tau(u_{j-1})
        op[j * d:(j + 1) * d, src * d:(src + 1) * d] = t_op
    theta = Automorphism(model, op, copies * tau_auto.order, f"cyclic{copies}")
    k_basis = np.vstack([inner_k] * copies)
    split = SubalgebraSplit(model, k_basis)
    theta.check(split)
    tag = "" if tau == "id" else "-diagram"
    name = f"{inner.family}{rank}-{form}-cyclic{copies}{tag}"
    spec = RMatrixSpec("trigonometric", model, split, theta, name=name)
    desc = {"family": inner.family, "rank": rank, "form": form,
            "automorphism": f"cyclic({copies})", "kind": "trigonometric",
            "inner_automorphism": tau}
    return ModelCatalogEntry(name, spec, "cyclic", built, None, copies, desc)


_NAME = re.compile(r"^([AD])(\d+)-(split|compact)(?:-(folded|rational|cyclic(\d+)(-diagram)?))?$")


def get_model(name: str) -> ModelCatalogEntry:
    """Catalogue entry from its name."""
    mt = _NAME.match(name.strip())
    if not mt:
        raise CapabilityError(f"unknown model name {name!r}")
    family, rank, form, variant, copies, diag = mt.groups()
    rank = int(rank)
    if variant is None:
        return principal_model(family, rank, form)
    if variant == "folded":
        return folded_model(family, rank, form)
    if variant == "rational":
        return principal_model(family, rank, form, "rational")
    return cyclic_model(family, rank, form, int(copies), "diagram" if diag else "id")


def model_from_descriptor(desc: dict) -> ModelCatalogEntry:
    """Entry from ``{family, rank, form, automorphism[, kind]}``."""
    try:
        family = str(desc["family"]).upper()
        rank = int(desc["rank"])
        form = desc.get("form", "split")
        auto = str(desc.get("automorphism", "trivial"))
    except (KeyError, TypeError, ValueError) as exc:
        raise PreconditionError(f"bad model descriptor: {exc}") from None
    kind = desc.get("kind", "trigonometric")
    if auto == "trivial":
        return principal_model(family, rank, form, kind)
    if kind != "trigonometric":
        raise CapabilityError("non-trivial automorphisms need the trigonometric kind")
    if auto == "diagram":
        return folded_model(family, rank, form)
    mt = re.fullmatch(r"cyclic\((\d+)\)", auto)
    if mt:
        return cyclic_model(family, rank, form, int(mt.group(1)),
                            desc.get("inner_automorphism", "id"))
    raise CapabilityError(f"unknown automorphism {auto!r}")


CATALOGUE = (
    "A1-split", "A2-split", "A3-split", "D4-split",
    "A1-compact", "A2-compact", "A3-compact", "D4-compact",
    "A2-split-folded", "A3-split-folded", "D3-split-folded",
    "A2-compact-folded", "A3-compact-folded", "D3-compact-folded",
    "A1-split-cyclic2", "A1-split-cyclic3", "A1-compact-cyclic2", "A1-compact-cyclic3",
    "A1-split-rational", "A2-split-rational", "A3-split-rational",
    "A1-compact-rational", "A2-compact-rational",
)


def catalogue(names=CATALOGUE):
    return [get_model(n) for n in names]


# ---------------------------------------------------------------------------
# coordinates


def _phase(entry):
    return 1.0 if entry.form == "split" else 1j


def cartan_diagonal(entry, kcoords):
    """Real diagonal of the Cartan element with K-coordinates ``kcoords``."""
    mat = entry.model.to_matrix(entry.split.embed(kcoords))
    return np.real(np.diagonal(mat) / _phase(entry))


def _pair(entry, mat_a, mat_b):
    return entry.model.scale * np.trace(mat_a @ mat_b)


def _root_vectors(entry):
    """[(functional, X_mu, X_-mu, parity)] for the root lines of the entry."""
    if entry.variant == "folded":
        fd = entry.folded
        out = [(mu, xp, xn, +1) for mu, xp, xn in fd.plus_vectors]
        out += [(mu, xp, xn, -1) for mu, xp, xn in fd.minus_vectors]
        return out
    if entry.variant == "principal":
        return [(r.weight, r.pos, r.neg, +1) for r in entry.built.roots.positive]
    raise CapabilityError(f"{entry.name} has no root coordinates")


def _functional_values(entry, mu, diag):
    if entry.variant == "folded":
        return float(np.dot(mu, diag[:len(mu)]))
    return float(np.dot(mu, diag))


def coordinates(entry, xi):
    """Root/weight coordinates of a spin vector.

    Split forms give ``xi[mu] = (xi_mu, xi_-mu)``; compact forms give
    ``(eta_mu, zeta_mu)``.  The H^- component of folded models is returned
    under ``"hminus"`` as real coefficients in the orthonormal H^- basis and
    the K part under ``"k"``.
    """
    m = entry.model
    mat = m.to_matrix(np.asarray(xi, float))
    ph = _phase(entry)
    out = {"k": entry.split.k_coords(xi), "plus": [], "minus": [], "hminus": []}
    for mu, xp, xn, par in _root_vectors(entry):
        if entry.form == "split":
            c = (np.real(_pair(entry, mat, xn)), np.real(_pair(entry, mat, xp)))
        else:
            y = 1j / SQRT2 * (xp + xn)
            z = 1 / SQRT2 * (xp - xn)
            c = (-np.real(_pair(entry, mat, y)), -np.real(_pair(entry, mat, z)))
        out["plus" if par > 0 else "minus"].append((tuple(int(v) for v in mu), c))
    if entry.variant == "folded":
        out["hminus"] = [float(np.real(_pair(entry, mat, h) / ph))
                         for h in entry.folded.hminus]
    return out


def rebuild_xi(entry, coords):
    """Inverse of :func:`coordinates`."""
    m = entry.model
    ph = _phase(entry)
    mat = np.zeros((m.size, m.size), dtype=complex)
    vecs = {(tuple(int(v) for v in mu), par): (xp, xn)
            for mu, xp, xn, par in _root_vectors(entry)}
    for key, par in (("plus", 1), ("minus", -1)):
        for mu, (a, b) in coords[key]:
            xp, xn = vecs[(mu, par)]
            if entry.form == "split":
                mat += a * xp + b * xn
            else:
                mat += a * 1j / SQRT2 * (xp + xn) + b / SQRT2 * (xp - xn)
    if entry.variant == "folded":
        for c, h in zip(coords["hminus"], entry.folded.hminus):
            mat += ph * c * h
    return m.to_coeffs(mat) + entry.split.embed(coords["k"])


# ---------------------------------------------------------------------------
# closed-form Hamiltonians


def split_hamiltonian(pp, delta_vals, a, b, hminus_sq=0.0, gamma_vals=(), c=(), d=(),
                      kind="trigonometric"):
    """Split-form closed form; ``pp = <p,p>``, (a, b) = (xi_mu, xi_-mu).

    Accepts complex arguments (holomorphic model).
    """
    delta_vals, a, b = (np.asarray(v) for v in (delta_vals, a, b))
    if kind == "rational":
        return 0.5 * pp - np.sum(a * b / delta_vals ** 2)
    gamma_vals, c, d = (np.asarray(v) for v in (gamma_vals, c, d))
    return (0.5 * pp
            - 0.25 * np.sum(a * b / np.sinh(delta_vals / 2) ** 2)
            + 0.125 * hminus_sq
            + 0.25 * np.sum(c * d / np.cosh(gamma_vals / 2) ** 2))


def compact_hamiltonian(pp, delta_vals, eta, zeta, hminus_sq=0.0, gamma_vals=(),
                        eta_m=(), zeta_m=(), kind="trigonometric"):
    """Compact-form closed form; ``pp = <p,p>`` of the real Cartan element."""
    delta_vals, eta, zeta = (np.asarray(v) for v in (delta_vals, eta, zeta))
    if kind == "rational":
        return -0.5 * pp - 0.5 * np.sum((eta ** 2 + zeta ** 2) / delta_vals ** 2)
    gamma_vals, eta_m, zeta_m = (np.asarray(v) for v in (gamma_vals, eta_m, zeta_m))
    return (-0.5 * pp
            - 0.125 * np.sum((eta ** 2 + zeta ** 2) / np.sin(delta_vals / 2) ** 2)
            - 0.125 * hminus_sq
            - 0.125 * np.sum((eta_m ** 2 + zeta_m ** 2) / np.cos(gamma_vals / 2) ** 2))


def closed_form_terms(entry, state: PhaseState):
    """Arguments of the closed-form evaluator for ``state``."""
    if not entry.has_closed_form:
        raise CapabilityError(f"{entry.name} has no closed-form Hamiltonian")
    if constraint_residual(entry.spec, state) > 1e-10:
        raise PreconditionError("closed-form Hamiltonians assume xi_K = 0")
    qd = cartan_diagonal(entry, state.q)
    pd = cartan_diagonal(entry, state.p)
    co = coordinates(entry, state.xi)
    plus = co["plus"]
    minus = co["minus"]
    return {
        "pp": entry.model.scale * float(np.sum(pd ** 2)),
        "delta_vals": [_functional_values(entry, mu, qd) for mu, _ in plus],
        "first": [c[0] for _, c in plus],
        "second": [c[1] for _, c in plus],
        "hminus_sq": float(np.sum(np.square(co["hminus"]))),
        "gamma_vals": [_functional_values(entry, mu, qd) for mu, _ in minus],
        "first_m": [c[0] for _, c in minus],
        "second_m": [c[1] for _, c in minus],
    }


def closed_form_hamiltonian(entry: ModelCatalogEntry, state: PhaseState) -> float:
    """Root/weight-coordinate Hamiltonian of a constrained state."""
    t = closed_form_terms(entry, state)
    fn = split_hamiltonian if entry.form == "split" else compact_hamiltonian
    return float(np.real(fn(t["pp"], t["delta_vals"], t["first"], t["second"],
                            t["hminus_sq"], t["gamma_vals"], t["first_m"], t["second_m"],
                            kind=entry.spec.kind)))


def hamiltonian_term_list(entry):
    """Human-readable term list of the closed-form Hamiltonian."""
    if not entry.has_closed_form:
        return []
    split = entry.form == "split"
    rational = entry.spec.kind == "rational"
    terms = ["+1/2 <p,p>" if split else "-1/2 <p,p>"]
    roots = [mu for mu, *_ , par in _root_vectors(entry) if par > 0]
    weights = [mu for mu, *_ , par in _root_vectors(entry) if par < 0]
    for mu in roots:
        mu = list(int(v) for v in mu)
        if rational:
            terms.append(f"-xi_{mu} xi_-{mu} / mu(q)^2" if split
                         else f"-1/2 (eta_{mu}^2 + zeta_{mu}^2) / mu(q)^2")
        else:
            terms.append(f"-1/4 xi_{mu} xi_-{mu} / sinh^2(mu(q)/2)" if split
                         else f"-1/8 (eta_{mu}^2 + zeta_{mu}^2) / sin^2(mu(q)/2)")
    if entry.variant == "folded" and entry.folded.hminus:
        terms.append("+1/8 <xi_H-, xi_H->" if split else "-1/8 <xi_H-, xi_H->")
    for mu in weights:
        mu = list(int(v) for v in mu)
        terms.append(f"+1/4 xi-_{mu} xi-_-{mu} / cosh^2(mu(q)/2)" if split
                     else f"-1/8 (eta-_{mu}^2 + zeta-_{mu}^2) / cos^2(mu(q)/2)")
    return terms


# ---------------------------------------------------------------------------
# random states


def _regular_q(entry, rng, margin, box, max_tries=1000):
    spec = entry.spec
    r = entry.split.r
    for _ in range(max_tries):
        q = rng.uniform(-box, box, r)
        if entry.form == "compact" and np.max(np.abs(cartan_diagonal(entry, q))) > 1.5:
            continue
        try:
            reg = eval_r(spec, q).regularity
        except SingularityError:
            continue
        if reg > margin:
            return q
    raise PreconditionError(f"could not sample a regular point for {entry.name}")


def random_state(entry, rng, constrained=True, margin=0.2, box=None, scale=1.0,
                 t=0.0, repulsive=False) -> PhaseState:
    """Random phase-space point with q in the regular domain.

    Compact samples keep the eigenvalues of q inside [-1.5, 1.5] so that e^q
    stays well inside the principal branch of the logarithm.

    ``repulsive=True`` (split forms with a closed form) flips signs so that
    every root coupling xi_mu xi_-mu is non-positive.  The root potentials are
    then repulsive at t = 0, which keeps short trajectories away from the
    collision set; attractive couplings can reach it in finite time.
    """
    box = 1.5 if box is None else box
    sp = entry.split
    q = _regular_q(entry, rng, margin, box)
    p = scale * rng.standard_normal(sp.r)
    if constrained:
        xi = sp.embed_perp(scale * rng.standard_normal(sp.m))
    else:
        xi = scale * rng.standard_normal(entry.model.dim)
    if repulsive and entry.form == "split" and entry.has_closed_form:
        co = coordinates(entry, xi)
        co["plus"] = [(mu, (a, -np.copysign(b, a))) for mu, (a, b) in co["plus"]]
        xi = rebuild_xi(entry, co)
    return PhaseState(q, p, xi, t)


def regular_trajectory_state(entry, rng, t_end=1.0, margin=0.1, scale=0.5, samples=21,
                             max_tries=50) -> PhaseState:
    """Random constrained state whose exact trajectory stays regular.

    Split spin models with attractive couplings can reach the collision set
    in finite time.  Candidates are drawn with ``repulsive=True`` and kept only
    if the geodesic solution on ``[0, t_end]`` runs to the end with
    regularity above ``margin`` at every recorded time.
    """
    from .solver import solve_geodesic

    times = np.linspace(0.0, t_end, samples)
    for _ in range(max_tries):
        s0 = random_state(entry, rng, scale=scale, repulsive=True)
        rec = solve_geodesic(entry.spec, s0, times)
        if rec.truncated:
            continue
        if min(eval_r(entry.spec, s.state.q).regularity for s in rec.samples) > margin:
            return s0
    raise PreconditionError(f"no regular trajectory found for {entry.name}")


def describe(entry, q=None):
    """JSON-ready summary: dimensions, root/weight tables, closed form and R(q)."""
    m, sp = entry.model, entry.split
    out = {
        "name": entry.name,
        "descriptor": entry.descriptor,
        "kind": entry.spec.kind,
        "dim": m.dim,
        "matrix_size": m.size,
        "dim_K": sp.r,
        "dim_K_perp": sp.m,
        "pairing_scale": m.scale,
        "basis_labels": list(m.labels),
        "theta": None if entry.theta is None else entry.theta.name,
    }
    if entry.variant == "principal":
        rs = entry.built.roots
        out["positive_roots"] = [list(map(int, r.weight)) for r in rs.positive]
        out["simple_roots"] = [list(map(int, rs.positive[i].weight)) for i in rs.simple]
        out["cartan_basis"] = [np.real(np.diagonal(h)).tolist() for h in rs.cartan]
    elif entry.variant == "folded":
        fd = entry.folded
        out["delta_plus"] = [list(map(int, v)) for v in fd.delta_plus]
        out["gamma_plus"] = [list(map(int, v)) for v in fd.gamma_plus]
        out["dim_H_minus"] = len(fd.hminus)
    else:
        out["copies"] = entry.copies
    out["hamiltonian_terms"] = hamiltonian_term_list(entry)
    if q is not None:
        op = eval_r(entry.spec, q)
        out["reference_q"] = list(map(float, op.q))
        out["regularity"] = op.regularity
    return out
