"""Solution engines: geodesic projection on the group or algebra, and RK4.

Both geodesic methods start from the constant ``L_0`` of a constrained state,
move along a straight line (``e^{q_0} e^{t L_0}`` on the group, ``q_0 + t L_0``
on the algebra), and bring the point back to the base by a Newton solve for
``eta`` in K^perp.  Spin is recovered algebraically from ``L(t) = e^{-ad_eta} L_0``
as ``xi_perp = -R_+(q)^{-1} L_perp``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .dynamics import (PhaseState, casimir2, constraint_residual, eom_rhs, hamiltonian,
                       lax, match_spectra, spectral_invariants)
from .errors import (BranchError, FactorizationError, PreconditionError,
                     SingularityError)
from .matfun import expm, logm
from .rmatrix import RMatrixSpec, r_plus_perp

NEWTON_TOL = 1e-12
NEWTON_MAXITER = 50
RECONSTRUCTION_TOL = 1e-10


@dataclass(frozen=True)
class FactorizationResult:
    q: np.ndarray
    eta: np.ndarray | None      # K^perp coordinates (None for eigenvector factorizations)
    iterations: int
    residual: float
    reconstruction: float
    rho: np.ndarray | None = None   # conjugator in the realization


def _newton(residual_fn, eta0, tol, maxiter, fd_step=1e-6):
    """Newton iteration with a central-difference Jacobian and step halving."""
    eta = np.array(eta0, dtype=float)
    f = residual_fn(eta)
    res = float(np.max(np.abs(f), initial=0.0))
    m = eta.size
    for it in range(maxiter + 1):
        if res < tol:
            return eta, it, res
        if it == maxiter:
            break
        jac = np.empty((f.size, m))
        for k in range(m):
            h = fd_step * (1.0 + abs(eta[k]))
            e = np.zeros(m)
            e[k] = h
            jac[:, k] = (residual_fn(eta + e) - residual_fn(eta - e)) / (2 * h)
        try:
            step = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError:
            raise FactorizationError("singular Newton Jacobian", res, it) from None
        lam = 1.0
        while True:
            try:
                f_new = residual_fn(eta + lam * step)
                res_new = float(np.max(np.abs(f_new), initial=0.0))
            except BranchError:
                res_new = np.inf
            if res_new < res or lam < 1e-4:
                break
            lam *= 0.5
        if not np.isfinite(res_new) or res_new >= res and res_new > 1e3 * tol:
            raise FactorizationError(
                f"Newton iteration stalled (residual {res:.3e})", res, it + 1)
        eta, f, res = eta + lam * step, f_new, res_new
    raise FactorizationError(
        f"Newton did not converge in {maxiter} iterations (residual {res:.3e})",
        res, maxiter)


def _log_coeffs(model, mat):
    try:
        return model.to_coeffs(logm(mat))
    except PreconditionError:
        raise BranchError("matrix logarithm left the real form") from None


def polar_factorize(spec: RMatrixSpec, g, initial_guess=None, tol=NEWTON_TOL,
                    maxiter=NEWTON_MAXITER) -> FactorizationResult:
    """Write g = Theta^{-1}(e^eta) e^q e^{-eta} with q in K and eta in K^perp."""
    if spec.kind != "trigonometric":
        raise PreconditionError("group factorization needs a trigonometric spec")
    m, sp = spec.model, spec.split
    g = np.asarray(g)
    th_inv = spec.theta.inverse_operator

    def inner(eta):
        x = sp.embed_perp(eta)
        with np.errstate(over="ignore", invalid="ignore"):
            left = expm(-m.to_matrix(th_inv @ x))
            return left @ g @ expm(m.to_matrix(x))

    def residual(eta):
        return sp.perp_coords(_log_coeffs(m, inner(eta)))

    eta0 = np.zeros(sp.m) if initial_guess is None else np.asarray(initial_guess[1], float)
    eta, its, res = _newton(residual, eta0, tol, maxiter)
    q = sp.k_coords(_log_coeffs(m, inner(eta)))
    x = sp.embed_perp(eta)
    rebuilt = (expm(m.to_matrix(th_inv @ x)) @ expm(m.to_matrix(sp.embed(q)))
               @ expm(-m.to_matrix(x)))
    rec = float(np.max(np.abs(rebuilt - g)))
    if rec > RECONSTRUCTION_TOL * (1 + np.max(np.abs(g))):
        raise FactorizationError(f"reconstruction mismatch {rec:.3e}", res, its)
    return FactorizationResult(q, eta, its, res, rec, expm(m.to_matrix(x)))


def algebra_factorize(spec: RMatrixSpec, x, initial_guess=None, tol=NEWTON_TOL,
                      maxiter=NEWTON_MAXITER) -> FactorizationResult:
    """Write X = rho q rho^{-1} with q in K.

    For sl(n) models with the full Cartan as K this is an eigendecomposition
    (real eigenvectors on the split form, unitary ones on the compact form),
    with eigenvalues ordered to follow ``initial_guess[0]``.  Otherwise
    Newton solves P_perp(e^{-ad_eta} X) = 0 for eta in K^perp.
    """
    m, sp = spec.model, spec.split
    x = np.asarray(x, float)
    if m.family == "A" and sp.r == m.rank:
        return _eigen_factorize(spec, x, None if initial_guess is None else initial_guess[0])

    def residual(eta):
        return sp.perp_coords(expm(-m.ad(sp.embed_perp(eta))) @ x)

    eta0 = np.zeros(sp.m) if initial_guess is None else np.asarray(initial_guess[1], float)
    eta, its, res = _newton(residual, eta0, tol, maxiter)
    y = expm(-m.ad(sp.embed_perp(eta))) @ x
    q = sp.k_coords(y)
    rec = float(np.max(np.abs(expm(m.ad(sp.embed_perp(eta))) @ sp.embed(q) - x)))
    if rec > RECONSTRUCTION_TOL * (1 + np.max(np.abs(x))):
        raise FactorizationError(f"reconstruction mismatch {rec:.3e}", res, its)
    return FactorizationResult(q, eta, its, res, rec, expm(m.to_matrix(sp.embed_perp(eta))))


def _eigen_factorize(spec, x, q_prev):
    m, sp = spec.model, spec.split
    mat = m.to_matrix(x)
    if m.form == "compact":
        ev, vec = np.linalg.eigh(-1j * mat)
        ev = 1j * ev
    else:
        ev, vec = np.linalg.eig(mat.real)
        if np.max(np.abs(np.imag(ev))) > 1e-9 * (1 + np.max(np.abs(ev))):
            raise FactorizationError("X(t) has left the real-diagonalizable set")
        ev, vec = ev.real, vec.real
        diff = np.abs(ev[:, None] - ev[None, :])
        if np.min(diff[~np.eye(ev.size, dtype=bool)], initial=np.inf) < 1e-8:
            raise FactorizationError("eigenvalue collision")
    if q_prev is not None:
        target = np.diagonal(m.to_matrix(sp.embed(q_prev)))
        rows, cols = linear_sum_assignment(np.abs(target[:, None] - ev[None, :]))
        order = cols[np.argsort(rows)]
        ev, vec = ev[order], vec[:, order]
    q = sp.k_coords(m.to_coeffs(np.diag(ev)))
    rho = vec
    rec = float(np.max(np.abs(rho @ m.to_matrix(sp.embed(q)) @ np.linalg.inv(rho) - mat)))
    if rec > RECONSTRUCTION_TOL * (1 + np.max(np.abs(mat))):
        raise FactorizationError(f"reconstruction mismatch {rec:.3e}", rec, 0)
    return FactorizationResult(q, None, 0, 0.0, rec, rho)


# ---------------------------------------------------------------------------
# trajectory records


def trace_order(spec):
    rank = spec.model.rank if spec.model.rank is not None else spec.split.r
    return max(3, rank + 1)


@dataclass(frozen=True)
class Sample:
    state: PhaseState
    H: float
    traces: np.ndarray          # tr((cL)^k), k = 2..kmax
    eigenvalues: np.ndarray     # sorted, complex
    casimir2: float
    newton_iters: int = 0


def make_sample(spec, state, newton_iters=0):
    L = lax(spec, state)
    sd = spectral_invariants(spec.model, L, trace_order(spec))
    return Sample(state, hamiltonian(spec, state), np.real(sd.traces[1:]),
                  sd.eigenvalues, casimir2(spec, state), newton_iters)


@dataclass(frozen=True)
class TrajectoryRecord:
    solver: str
    times: np.ndarray
    samples: tuple
    truncated: bool = False
    message: str = ""
    diagnostics: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.samples)

    @property
    def recorded_times(self):
        return np.array([s.state.t for s in self.samples])

    def series(self, name):
        if name == "eigenvalues":
            return np.array([s.eigenvalues for s in self.samples])
        if name in ("q", "p", "xi"):
            return np.array([getattr(s.state, name) for s in self.samples])
        return np.array([getattr(s, name) for s in self.samples])

    def columns(self):
        s0 = self.samples[0] if self.samples else None
        if s0 is None:
            return ["t", "solver", "newton_iters"]
        r, d = s0.state.q.size, s0.state.xi.size
        kmax = s0.traces.size + 1
        ne = s0.eigenvalues.size
        return (["t"] + [f"q_{i + 1}" for i in range(r)] + [f"p_{i + 1}" for i in range(r)]
                + [f"xi_{a + 1}" for a in range(d)] + ["H"]
                + [f"trL{k}" for k in range(2, kmax + 1)]
                + [f"eig_{k + 1}" for k in range(ne)]
                + [f"eigim_{k + 1}" for k in range(ne)]
                + ["casimir2", "solver", "newton_iters"])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns())
        fmt = "{:.17g}".format
        for s in self.samples:
            st = s.state
            nums = ([st.t, *st.q, *st.p, *st.xi, s.H, *s.traces,
                     *s.eigenvalues.real, *s.eigenvalues.imag, s.casimir2])
            w.writerow([fmt(float(v)) for v in nums] + [self.solver, s.newton_iters])
        return buf.getvalue()


def _check_initial(spec, state0, times):
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or np.any(np.diff(times) <= 0):
        raise PreconditionError("time grid must be strictly increasing")
    if constraint_residual(spec, state0) > 1e-10:
        raise PreconditionError("initial state violates the constraint xi_K = 0")
    return times


def _state_from_lax(spec, q, L, t):
    """Constrained state with Lax operator L at base point q."""
    sp = spec.split
    rp = r_plus_perp(spec, q)
    xi_perp = -np.linalg.solve(rp, sp.perp_coords(L))
    return PhaseState(q, sp.k_coords(L), sp.embed_perp(xi_perp), t)


def _geodesic(spec, state0, times, tag, factor, point):
    times = _check_initial(spec, state0, times)
    L0 = lax(spec, state0).L
    m = spec.model
    l0_mat = m.to_matrix(L0)
    samples, history = [], [np.zeros(spec.split.m)]
    q_guess = state0.q
    msg, truncated = "", False
    for t in times:
        # linear predictor from the last two converged samples
        eta_guess = 2 * history[-1] - history[-2] if len(history) > 1 else history[-1]
        try:
            fac = factor(spec, point(t), (q_guess, eta_guess))
            L_t = m.to_coeffs(np.linalg.solve(fac.rho, l0_mat @ fac.rho))
            state = _state_from_lax(spec, fac.q, L_t, t)
            samples.append(make_sample(spec, state, fac.iterations))
        except (FactorizationError, SingularityError, PreconditionError) as exc:
            truncated, msg = True, f"t={t:.6g}: {exc}"
            break
        q_guess = fac.q
        if fac.eta is not None:
            history = [history[-1], fac.eta]
    return TrajectoryRecord(tag, times, tuple(samples), truncated, msg)


def solve_geodesic_group(spec: RMatrixSpec, state0: PhaseState, times) -> TrajectoryRecord:
    """Project the group geodesic e^{q_0} e^{t L_0} onto the base."""
    m, sp = spec.model, spec.split
    g0 = expm(m.to_matrix(sp.embed(state0.q)))
    l0 = m.to_matrix(lax(spec, state0).L)
    t0 = state0.t
    return _geodesic(spec, state0, times, "geodesic-group", polar_factorize,
                     lambda t: g0 @ expm((t - t0) * l0))


def solve_geodesic_algebra(spec: RMatrixSpec, state0: PhaseState, times) -> TrajectoryRecord:
    """Project the line q_0 + t L_0 in the algebra onto K (rational specs)."""
    if spec.kind != "rational":
        raise PreconditionError("algebra geodesics need a rational spec")
    q0 = spec.split.embed(state0.q)
    L0 = lax(spec, state0).L
    t0 = state0.t
    return _geodesic(spec, state0, times, "geodesic-algebra", algebra_factorize,
                     lambda t: q0 + (t - t0) * L0)


def solve_geodesic(spec, state0, times):
    if spec.kind == "rational":
        return solve_geodesic_algebra(spec, state0, times)
    return solve_geodesic_group(spec, state0, times)


def rk4_step(spec, state, h):
    r = state.q.size

    def f(z):
        return np.concatenate(eom_rhs(spec, PhaseState.from_flat(z, r)))

    z = state.flat()
    k1 = f(z)
    k2 = f(z + 0.5 * h * k1)
    k3 = f(z + 0.5 * h * k2)
    k4 = f(z + h * k3)
    return PhaseState.from_flat(z + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4), r, state.t + h)


def integrate_rk4(spec: RMatrixSpec, state0: PhaseState, times, dt=1e-3) -> TrajectoryRecord:
    """Classical fixed-step RK4, recording at ``times``.

    Each interval between recorded times is split into the smallest number
    of equal steps not exceeding ``dt``.
    """
    times = _check_initial(spec, state0, times)
    if not dt > 0:
        raise PreconditionError("dt must be positive")
    state = state0
    samples, steps = [], 0
    truncated, msg = False, ""
    try:
        if times[0] < state0.t - 1e-14:
            raise PreconditionError("time grid starts before the initial state")
        for t in times:
            span = t - state.t
            n = int(np.ceil(span / dt - 1e-9)) if span > 1e-14 else 0
            for _ in range(n):
                state = rk4_step(spec, state, span / n)
                steps += 1
                if not np.all(np.isfinite(state.flat())):
                    raise SingularityError("state blew up (non-finite values)", 0.0)
            state = state.replace(t=t)
            samples.append(make_sample(spec, state, 0))
    except SingularityError as exc:
        truncated, msg = True, f"t={state.t:.6g}: {exc}"
    return TrajectoryRecord("rk4", times, tuple(samples), truncated, msg,
                            {"steps": steps, "dt": dt})


# ---------------------------------------------------------------------------
# comparison


GAUGE_INVARIANTS = ("H", "traces", "eigenvalues", "casimir2", "q")


@dataclass(frozen=True)
class ComparisonReport:
    deviations: dict            # max deviation per gauge invariant
    informational: dict         # gauge-dependent quantities (not judged)
    tolerance: float
    samples: int
    truncated: bool

    @property
    def passed(self):
        return (not self.truncated
                and all(v < self.tolerance for v in self.deviations.values()))

    @property
    def max_deviation(self):
        return max(self.deviations.values(), default=0.0)

    def to_dict(self):
        return {"passed": self.passed, "tolerance": self.tolerance,
                "samples": self.samples, "truncated": self.truncated,
                "deviations": dict(self.deviations),
                "informational": dict(self.informational)}


def compare_runs(a: TrajectoryRecord, b: TrajectoryRecord, tol=1e-6) -> ComparisonReport:
    """Max deviation of the gauge-invariant observables of two runs."""
    if a.times.shape != b.times.shape or np.max(np.abs(a.times - b.times)) > 1e-12:
        raise PreconditionError("runs use different time grids")
    n = min(len(a), len(b))
    dev = {k: 0.0 for k in GAUGE_INVARIANTS}
    info = {"xi": 0.0}
    for sa, sb in zip(a.samples[:n], b.samples[:n]):
        dev["H"] = max(dev["H"], abs(sa.H - sb.H))
        dev["traces"] = max(dev["traces"], float(np.max(np.abs(sa.traces - sb.traces))))
        dev["eigenvalues"] = max(dev["eigenvalues"],
                                 match_spectra(sa.eigenvalues, sb.eigenvalues))
        dev["casimir2"] = max(dev["casimir2"], abs(sa.casimir2 - sb.casimir2))
        dev["q"] = max(dev["q"], float(np.max(np.abs(sa.state.q - sb.state.q))))
        info["xi"] = max(info["xi"], float(np.max(np.abs(sa.state.xi - sb.state.xi))))
    return ComparisonReport(dev, info, tol, n, a.truncated or b.truncated)


def drift(record: TrajectoryRecord):
    """Max deviation from the initial value of H, the spectrum and <xi, xi>."""
    s0 = record.samples[0]
    return {
        "H": max(abs(s.H - s0.H) for s in record.samples),
        "eigenvalues": max(match_spectra(s.eigenvalues, s0.eigenvalues)
                           for s in record.samples),
        "traces": max(float(np.max(np.abs(s.traces - s0.traces)))
                      for s in record.samples),
        "casimir2": max(abs(s.casimir2 - s0.casimir2) for s in record.samples),
    }
