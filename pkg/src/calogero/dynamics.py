"""Phase space T*K x G*, quasi-Lax operator, Hamiltonian and equations of motion.

A :class:`PhaseState` stores ``q`` and ``p`` as coordinates in the K basis of
the bound split and ``xi`` as coefficients in the model basis.  The canonical
coordinates are ``q^i`` and the covariant momenta ``p_i = <p, T_i>``, so that
``{q^i, p_j} = delta^i_j``.  Spin coordinates are ``xi_a = <xi, T_a>`` with
``{xi_a, xi_b} = f_ab^c xi_c``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import PreconditionError
from .matfun import expm
from .rmatrix import RMatrixSpec, eval_r, eval_r_plus, partial_r, r_plus_perp

CONSTRAINT_TOL = 1e-10


@dataclass(frozen=True)
class PhaseState:
    q: np.ndarray
    p: np.ndarray
    xi: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        for name in ("q", "p", "xi"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=float))
        if self.q.shape != self.p.shape:
            raise PreconditionError("q and p must have the same length")
        object.__setattr__(self, "t", float(self.t))

    def to_json(self):
        return json.dumps({"q": self.q.tolist(), "p": self.p.tolist(),
                           "xi": self.xi.tolist(), "t": self.t})

    @classmethod
    def from_json(cls, text):
        d = json.loads(text) if isinstance(text, str) else dict(text)
        try:
            return cls(d["q"], d["p"], d["xi"], d.get("t", 0.0))
        except KeyError as exc:
            raise PreconditionError(f"phase state is missing {exc}") from None

    def flat(self):
        return np.concatenate([self.q, self.p, self.xi])

    @classmethod
    def from_flat(cls, z, r, t=0.0):
        return cls(z[:r], z[r:2 * r], z[2 * r:], t)

    def replace(self, **kw):
        d = {"q": self.q, "p": self.p, "xi": self.xi, "t": self.t}
        d.update(kw)
        return PhaseState(**d)


def check_state(spec: RMatrixSpec, state: PhaseState):
    if state.q.shape != (spec.split.r,) or state.xi.shape != (spec.model.dim,):
        raise PreconditionError(
            f"state shape (q:{state.q.shape}, xi:{state.xi.shape}) does not fit "
            f"K of dim {spec.split.r} in a model of dim {spec.model.dim}")


def constraint_residual(spec, state):
    """|xi_K|, the violation of the first class constraint."""
    return float(np.max(np.abs(spec.split.k_coords(state.xi)), initial=0.0))


def is_constrained(spec, state, tol=CONSTRAINT_TOL):
    return constraint_residual(spec, state) < tol


@dataclass(frozen=True)
class LaxValue:
    L: np.ndarray
    state: PhaseState
    constrained: bool


def lax(spec: RMatrixSpec, state: PhaseState) -> LaxValue:
    """L = p - (R(q) + nu/2) xi."""
    check_state(spec, state)
    rp = eval_r_plus(spec, state.q).operator
    L = spec.split.embed(state.p) - rp @ state.xi
    return LaxValue(L, state, is_constrained(spec, state))


def hamiltonian(spec: RMatrixSpec, state: PhaseState) -> float:
    """1/2<p,p> - 1/2<xi_perp, R^2 xi_perp> - nu/2 <p, xi_K> + nu^2/8 <xi,xi>."""
    check_state(spec, state)
    m, sp = spec.model, spec.split
    r = eval_r(spec, state.q).operator
    p = sp.embed(state.p)
    xi = state.xi
    xi_k = sp.embed(sp.k_coords(xi))
    xi_perp = xi - xi_k
    nu = spec.nu
    return float(0.5 * m.pairing(p, p)
                 - 0.5 * m.pairing(xi_perp, r @ (r @ xi_perp))
                 - 0.5 * nu * m.pairing(p, xi_k)
                 + 0.125 * nu ** 2 * m.pairing(xi, xi))


def momentum_force(spec, q, xi, method="analytic"):
    """Covariant components <R xi_perp, dR/dq^i xi_perp>."""
    sp = spec.split
    xi_perp = xi - sp.embed(sp.k_coords(xi))
    rxi = eval_r(spec, q).operator @ xi_perp
    return np.array([spec.model.pairing(rxi, d @ xi_perp)
                     for d in partial_r(spec, q, method)])


def eom_rhs(spec: RMatrixSpec, state: PhaseState):
    """(q_dot, p_dot, xi_dot) of the Hamiltonian flow.

    q_dot = p - nu/2 xi_K, p_dot = -<R xi_perp, (grad R) xi_perp> and
    xi_dot = [xi, nu/2 p + R^2 xi_perp] with its K-component set to zero.
    """
    check_state(spec, state)
    m, sp = spec.model, spec.split
    xi = state.xi
    xi_kc = sp.k_coords(xi)
    xi_perp = xi - sp.embed(xi_kc)
    r = eval_r(spec, state.q).operator
    q_dot = state.p - 0.5 * spec.nu * xi_kc
    p_dot = -sp.gram_k_inv @ momentum_force(spec, state.q, xi)
    xi_dot = m.bracket(xi, 0.5 * spec.nu * sp.embed(state.p) + r @ (r @ xi_perp))
    xi_dot = xi_dot - sp.embed(sp.k_coords(xi_dot))
    return q_dot, p_dot, xi_dot


# ---------------------------------------------------------------------------
# Poisson structure


def poisson_tensor(spec: RMatrixSpec, state: PhaseState):
    """Matrix P with {z_a, z_b} = P_ab in the coordinates z = (q, p, xi)."""
    m, sp = spec.model, spec.split
    r, d = sp.r, m.dim
    out = np.zeros((2 * r + d, 2 * r + d))
    out[:r, r:2 * r] = sp.gram_k_inv
    out[r:2 * r, :r] = -sp.gram_k_inv
    cov = m.gram @ state.xi
    lp = np.einsum("abc,c->ab", m.structure_constants, cov)
    out[2 * r:, 2 * r:] = m.gram_inv @ lp @ m.gram_inv
    return out


def fd_jacobian(func, state: PhaseState, rel_step=1e-6):
    """Central-difference Jacobian of a vector-valued map of the state."""
    z0 = state.flat()
    r = state.q.size
    f0 = np.atleast_1d(np.asarray(func(state), dtype=float))
    jac = np.zeros((f0.size, z0.size))
    for k in range(z0.size):
        h = rel_step * (1.0 + abs(z0[k]))
        zp, zm = z0.copy(), z0.copy()
        zp[k] += h
        zm[k] -= h
        fp = np.atleast_1d(func(PhaseState.from_flat(zp, r, state.t)))
        fm = np.atleast_1d(func(PhaseState.from_flat(zm, r, state.t)))
        jac[:, k] = (fp - fm) / (2 * h)
    return jac


@dataclass(frozen=True)
class Observable:
    """Scalar function of the state, with an optional analytic gradient in
    the coordinates ``(q, p, xi)`` of :meth:`PhaseState.flat`."""

    fn: Callable
    grad: Callable | None = field(default=None, compare=False)
    name: str = ""

    def __call__(self, state):
        return self.fn(state)

    def gradient(self, state, rel_step=1e-6):
        if self.grad is not None:
            return np.asarray(self.grad(state), dtype=float)
        return fd_jacobian(self.fn, state, rel_step)[0]


def q_coordinate(i):
    def grad(state):
        g = np.zeros(2 * state.q.size + state.xi.size)
        g[i] = 1.0
        return g
    return Observable(lambda s: float(s.q[i]), grad, f"q^{i + 1}")


def p_coordinate(spec, i):
    """Covariant momentum p_i = <p, T_i>."""
    row = spec.split.gram_k[i]
    r = spec.split.r

    def grad(state):
        g = np.zeros(2 * r + state.xi.size)
        g[r:2 * r] = row
        return g
    return Observable(lambda s: float(row @ s.p), grad, f"p_{i + 1}")


def xi_coordinate(spec, a):
    """Covariant spin coordinate xi_a = <xi, T_a>."""
    row = spec.model.gram[a]
    r = spec.split.r

    def grad(state):
        g = np.zeros(2 * r + state.xi.size)
        g[2 * r:] = row
        return g
    return Observable(lambda s: float(row @ s.xi), grad, f"xi_{a + 1}")


def hamiltonian_observable(spec):
    return Observable(lambda s: hamiltonian(spec, s), name="H")


def poisson_bracket(spec: RMatrixSpec, f: Observable, g: Observable, state: PhaseState):
    """{f, g} = canonical part + <xi, [grad_xi f, grad_xi g]>."""
    check_state(spec, state)
    return float(f.gradient(state) @ poisson_tensor(spec, state) @ g.gradient(state))


def poisson_bracket_matrix(spec, jac_f, jac_g, state):
    """All brackets {f_a, g_b} from Jacobians in the (q, p, xi) coordinates."""
    return jac_f @ poisson_tensor(spec, state) @ jac_g.T


def lax_jacobian(spec, state, method="fd"):
    """d L^a / d z in the (q, p, xi) coordinates.

    ``method="fd"`` differentiates :func:`lax` numerically; ``"analytic"``
    assembles the exact Jacobian from R_+ and dR/dq^i.
    """
    if method == "fd":
        return fd_jacobian(lambda s: lax(spec, s).L, state)
    sp = spec.split
    rp = eval_r_plus(spec, state.q).operator
    cols_q = [-(d @ state.xi) for d in partial_r(spec, state.q)]
    return np.hstack([np.array(cols_q).T.reshape(spec.model.dim, sp.r),
                      sp.k_basis, -rp])


def anomaly_target(spec, state):
    """[R_12, L_1 + L_2] - (nabla_{xi_K} R)_12 as a matrix on contravariant indices."""
    m, sp = spec.model, spec.split
    L = lax(spec, state).L
    r = eval_r(spec, state.q).operator
    rg = r @ m.gram_inv
    adl = m.ad(L)
    xi_k = sp.k_coords(state.xi)
    nab = sum((c * d for c, d in zip(xi_k, partial_r(spec, state.q))),
              np.zeros_like(r))
    return -(adl @ rg + rg @ adl.T) - nab @ m.gram_inv


def anomaly_residual(spec: RMatrixSpec, state: PhaseState, jacobian="fd"):
    """{L^a, L^b} minus the quasi-Lax right-hand side; zero for a valid r-matrix."""
    check_state(spec, state)
    jac = lax_jacobian(spec, state, jacobian)
    pb = poisson_bracket_matrix(spec, jac, jac, state)
    return pb - anomaly_target(spec, state)


def anomaly_from_cdybe(spec, state):
    """<xi, E_nu(R, T^a, T^b)>, the closed form of the anomaly residual."""
    from .rmatrix import cdybe_residual
    m = spec.model
    duals = m.gram_inv
    d = m.dim
    out = np.zeros((d, d))
    g_xi = m.gram @ state.xi
    for a in range(d):
        for b in range(d):
            out[a, b] = g_xi @ cdybe_residual(spec, state.q, duals[a], duals[b])
    return out


# ---------------------------------------------------------------------------
# gauge action and invariants


def gauge_transform(spec: RMatrixSpec, state: PhaseState, L: LaxValue, kappa):
    """Act with e^kappa, kappa in K, on xi_perp and L."""
    sp = spec.split
    g = expm(spec.model.ad(sp.embed(np.asarray(kappa, dtype=float))))
    xi_kc = sp.k_coords(state.xi)
    xi_k = sp.embed(xi_kc)
    xi_new = xi_k + g @ (state.xi - xi_k)
    new_state = state.replace(xi=xi_new)
    return new_state, LaxValue(g @ L.L, new_state, L.constrained)


def spectral_phase(model):
    """Scalar c making c*L diagonalizable with real spectrum on the compact form."""
    return -1j if model.form == "compact" else 1.0


def sort_spectrum(ev):
    ev = np.asarray(ev, dtype=complex)
    ev = np.where(np.abs(ev.imag) < 1e-13, ev.real + 0j, ev)
    return ev[np.lexsort((ev.imag, np.round(ev.real, 10)))]


@dataclass(frozen=True)
class SpectralData:
    traces: np.ndarray               # tr((cL)^k), k = 1..kmax
    eigenvalues: np.ndarray          # sorted, complex
    charpoly: np.ndarray             # characteristic polynomial coefficients


def spectral_invariants(model, L, kmax) -> SpectralData:
    """Traces of powers and sorted eigenvalues of c*L in the defining realization."""
    L = L.L if isinstance(L, LaxValue) else np.asarray(L)
    mat = spectral_phase(model) * model.to_matrix(L)
    traces, pw = [], np.eye(model.size, dtype=complex)
    for _ in range(kmax):
        pw = pw @ mat
        traces.append(np.trace(pw))
    traces = np.array(traces)
    if np.max(np.abs(traces.imag), initial=0.0) < 1e-9 * (1 + np.max(np.abs(traces))):
        traces = traces.real
    try:
        ev = sort_spectrum(np.linalg.eigvals(mat))
    except np.linalg.LinAlgError:
        ev = np.full(model.size, np.nan + 0j)
    return SpectralData(traces, ev, np.poly(mat))


def match_spectra(a, b):
    """Max deviation between two spectra after optimal pairing."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise PreconditionError("spectra of different size")
    cost = np.abs(a[:, None] - b[None, :])
    i, j = linear_sum_assignment(cost)
    return float(np.max(cost[i, j], initial=0.0))


def casimir2(spec, state):
    return float(spec.model.pairing(state.xi, state.xi))


# ---------------------------------------------------------------------------
# momentum map of the twisted action


def momentum_constraint_check(spec: RMatrixSpec, q, J, xi):
    """Residuals of the moment-map equation and of its gauge-fixed form.

    Returns ``(|theta J - e^{-ad_q} J + xi|, |(xi_K, theta J - J_K + R_+ xi_perp)|)``;
    the two vanish together.
    """
    if spec.kind != "trigonometric":
        raise PreconditionError("the momentum map check needs a trigonometric spec")
    m, sp = spec.model, spec.split
    q = np.asarray(q, float)
    J = np.asarray(J, float)
    xi = np.asarray(xi, float)
    th = spec.theta.operator
    e = expm(-m.ad(sp.embed(q)))
    first = th @ J - e @ J + xi
    xi_kc = sp.k_coords(xi)
    xi_perp = sp.perp_coords(xi)
    second_perp = sp.perp_coords(th @ J) + r_plus_perp(spec, q) @ xi_perp
    second_k = sp.k_coords(th @ J) - sp.k_coords(J)
    second = np.concatenate([xi_kc, second_k, second_perp])
    return float(np.linalg.norm(first)), float(np.linalg.norm(second))


def gauge_slice_momentum(spec, q, j_k, xi_perp):
    """J = J_K - theta^{-1} R_+(q) xi_perp for xi_perp in K^perp coordinates."""
    sp = spec.split
    rp = eval_r_plus(spec, q).operator
    v = rp @ sp.embed_perp(xi_perp)
    return sp.embed(j_k) - np.linalg.solve(spec.theta.operator, v)
