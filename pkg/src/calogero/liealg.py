"""Matrix realizations of self-dual Lie algebras.

Elements are handled as coefficient vectors in a fixed basis ``T_a`` of
square complex matrices.  A real form (split or compact) is a model whose
structure constants are real, so that coefficient vectors of its elements are
real as well.  The invariant pairing is a fixed multiple of the trace form of
the defining representation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
import scipy.linalg

from .errors import CapabilityError, ConstructionError, PreconditionError

TOL = 1e-12

#: supported (family -> admissible ranks) for :func:`build_model`
SUPPORTED = {"A": range(1, 9), "D": range(2, 9)}

#: trace-form multiple used for each family; D is halved so that the natural
#: root vectors already satisfy <X_phi, X_-phi> = 1
PAIRING_SCALE = {"A": 1.0, "D": 0.5}


def _frozen(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


class LieAlgebraModel:
    """A Lie algebra spanned by the matrices ``basis`` with pairing
    ``scale * tr(XY)``.

    Parameters
    ----------
    basis : array_like, shape (dim, n, n)
        Linearly independent matrices closed under commutators.
    scale : float
        Multiple of the trace form used as the invariant pairing.
    family, rank, form : str, int, str
        Descriptive tags; ``rank`` is the dimension of a Cartan subalgebra.
    labels : sequence of str, optional
        Human-readable names of the basis elements.
    """

    def __init__(self, basis, *, scale=1.0, family="custom", rank=None,
                 form="split", labels=None):
        basis = np.asarray(basis, dtype=complex)
        if basis.ndim != 3 or basis.shape[1] != basis.shape[2]:
            raise ConstructionError("basis must have shape (dim, n, n)")
        self.basis = _frozen(basis)
        self.dim = basis.shape[0]
        self.size = basis.shape[1]
        self.scale = float(scale)
        self.family = family
        self.rank = rank
        self.form = form
        self.labels = tuple(labels) if labels is not None else tuple(
            f"T{a}" for a in range(self.dim))

        gram = self.scale * np.einsum("aij,bji->ab", basis, basis)
        if np.max(np.abs(gram.imag)) > TOL * (1 + np.max(np.abs(gram))):
            raise ConstructionError("pairing is not real on the basis")
        gram = gram.real
        if np.max(np.abs(gram - gram.T)) > TOL:
            raise ConstructionError("pairing is not symmetric")
        if np.linalg.matrix_rank(gram, tol=1e-10) < self.dim:
            raise ConstructionError("pairing is degenerate on the basis")
        self.gram = _frozen(gram)
        self.gram_inv = _frozen(np.linalg.inv(gram))
        dual = np.einsum("ab,bij->aij", self.gram_inv, basis)
        self.dual = _frozen(dual)

        comm = (np.einsum("aij,bjk->abik", basis, basis)
                - np.einsum("bij,ajk->abik", basis, basis))
        f = self.scale * np.einsum("abij,cji->abc", comm, dual)
        if np.max(np.abs(f.imag)) > 1e-10:
            raise ConstructionError("structure constants are not real")
        f = f.real
        rebuilt = np.einsum("abc,cij->abij", f, basis)
        err = np.max(np.abs(rebuilt - comm)) if self.dim else 0.0
        if err > 1e-10:
            raise ConstructionError(
                f"basis is not closed under commutators (residual {err:.2e})")
        self.structure_constants = _frozen(f)
        self._commutator_residual = float(err)

    def __repr__(self):
        return (f"LieAlgebraModel({self.family}{self.rank}, form={self.form!r}, "
                f"dim={self.dim})")

    # conversions -----------------------------------------------------------

    def to_matrix(self, x):
        x = np.asarray(x)
        self._check_dim(x)
        return np.einsum("a,aij->ij", x, self.basis)

    def to_coeffs(self, m):
        """Coefficients of the matrix ``m`` in the model basis.

        The imaginary part must vanish (all models here are real forms).
        """
        m = np.asarray(m)
        c = self.scale * np.einsum("aij,ji->a", self.dual, m)
        if np.max(np.abs(c.imag), initial=0.0) > 1e-8 * (1 + np.max(np.abs(m))):
            raise PreconditionError("matrix is not in the real form of the model")
        return c.real

    def span_residual(self, m):
        """Distance of ``m`` from the complex span of the basis."""
        m = np.asarray(m, dtype=complex)
        c = self.scale * np.einsum("aij,ji->a", self.dual, m)
        return float(np.max(np.abs(np.einsum("a,aij->ij", c, self.basis) - m)))

    def realness_residual(self, m):
        """Imaginary residue of the coefficients of ``m`` (0 for real-form members)."""
        c = self.scale * np.einsum("aij,ji->a", self.dual, np.asarray(m))
        return float(np.max(np.abs(np.imag(c)), initial=0.0))

    def _check_dim(self, *xs):
        for x in xs:
            if np.shape(x)[-1] != self.dim:
                raise PreconditionError(
                    f"element has {np.shape(x)[-1]} coefficients, model has dim {self.dim}")

    # algebra ---------------------------------------------------------------

    def bracket(self, x, y):
        self._check_dim(x, y)
        return np.einsum("a,b,abc->c", x, y, self.structure_constants)

    def pairing(self, x, y):
        self._check_dim(x, y)
        return x @ self.gram @ y

    def ad(self, x):
        """Operator matrix of ``ad_x`` acting on coefficient vectors."""
        self._check_dim(x)
        return np.einsum("a,abc->cb", x, self.structure_constants)

    def unit(self, a):
        e = np.zeros(self.dim)
        e[a] = 1.0
        return e

    # invariant checks ------------------------------------------------------

    def invariance_residual(self):
        """max |<[T_a,T_b],T_c> + <T_b,[T_a,T_c]>| over all basis triples."""
        fg = np.einsum("abd,dc->abc", self.structure_constants, self.gram)
        return float(np.max(np.abs(fg + np.transpose(fg, (0, 2, 1)))))

    def commutator_residual(self):
        return self._commutator_residual

    def jacobi_residual(self, rng, samples=10):
        worst = 0.0
        for _ in range(samples):
            x, y, z = rng.standard_normal((3, self.dim))
            j = (self.bracket(x, self.bracket(y, z))
                 + self.bracket(y, self.bracket(z, x))
                 + self.bracket(z, self.bracket(x, y)))
            worst = max(worst, float(np.max(np.abs(j))))
        return worst


class SubalgebraSplit:
    """Orthogonal decomposition G = K + K^perp for a self-dual Abelian K.

    ``k_basis`` holds the K basis as columns of coefficient vectors.  When the
    remaining unit vectors of the model basis are orthogonal to K they are used
    as the K^perp basis; otherwise an orthonormal null-space basis is used.
    """

    def __init__(self, model: LieAlgebraModel, k_basis):
        kb = np.asarray(k_basis, dtype=float)
        if kb.ndim == 1:
            kb = kb[:, None]
        self.model = model
        self.k_basis = _frozen(kb)
        self.r = kb.shape[1]
        g = model.gram
        gk = kb.T @ g @ kb
        if np.linalg.matrix_rank(gk, tol=1e-10) < self.r:
            raise ConstructionError("K is not self-dual (degenerate restricted pairing)")
        self.gram_k = _frozen(gk)
        self.gram_k_inv = _frozen(np.linalg.inv(gk))

        w = self._unit_complement(kb, g)
        if w is None:
            w = scipy.linalg.null_space(kb.T @ g)
        self.perp_basis = _frozen(w)
        self.m = w.shape[1]
        full = np.hstack([kb, w])
        inv = np.linalg.inv(full)
        self.k_left = _frozen(inv[: self.r])
        self.perp_left = _frozen(inv[self.r:])
        self.P_k = _frozen(kb @ self.k_left)
        self.P_perp = _frozen(w @ self.perp_left)

        for a in range(self.r):
            for b in range(self.r):
                if np.max(np.abs(model.bracket(kb[:, a], kb[:, b]))) > 1e-10:
                    raise ConstructionError("K is not Abelian")

    @staticmethod
    def _unit_complement(kb, g):
        dim = kb.shape[0]
        support = np.flatnonzero(np.any(np.abs(kb) > 0, axis=1))
        rest = [a for a in range(dim) if a not in set(support)]
        if len(rest) + kb.shape[1] != dim:
            return None
        w = np.eye(dim)[:, rest]
        if np.max(np.abs(kb.T @ g @ w), initial=0.0) > TOL:
            return None
        return w

    # coordinates -----------------------------------------------------------

    def embed(self, kcoords):
        """K element with coordinates ``kcoords`` as a model coefficient vector."""
        return self.k_basis @ np.asarray(kcoords)

    def k_coords(self, x):
        return self.k_left @ np.asarray(x)

    def perp_coords(self, x):
        return self.perp_left @ np.asarray(x)

    def embed_perp(self, c):
        return self.perp_basis @ np.asarray(c)

    def project(self, x):
        """Return ``(X_K, X_perp)`` as model coefficient vectors."""
        x = np.asarray(x)
        self.model._check_dim(x)
        xk = self.P_k @ x
        return xk, x - xk

    def restrict(self, op):
        """Block of ``op`` acting on K^perp (``op`` must preserve K^perp)."""
        return self.perp_left @ op @ self.perp_basis

    def extend(self, op_perp):
        """Operator equal to ``op_perp`` on K^perp and zero on K."""
        return self.perp_basis @ op_perp @ self.perp_left

    def dual_k(self, covariant):
        """K element from covariant components c_i = <X, T_i>."""
        return self.embed(self.gram_k_inv @ np.asarray(covariant))

    def projector_residuals(self):
        g = self.model.gram
        eye = np.eye(self.model.dim)
        return {
            "sum": float(np.max(np.abs(self.P_k + self.P_perp - eye))),
            "product": float(np.max(np.abs(self.P_k @ self.P_perp))),
            "selfadjoint_k": float(np.max(np.abs(g @ self.P_k - (g @ self.P_k).T))),
            "selfadjoint_perp": float(np.max(np.abs(g @ self.P_perp - (g @ self.P_perp).T))),
        }


@dataclass(frozen=True)
class Root:
    """A positive root with its root vectors in the defining realization."""

    weight: tuple            # integer functional on diagonal matrices
    pos: np.ndarray          # X_phi
    neg: np.ndarray          # X_-phi
    simple_index: int | None = None

    def __call__(self, diag_matrix):
        """phi(Q) for a diagonal matrix Q."""
        return np.asarray(self.weight) @ np.diagonal(diag_matrix)


@dataclass(frozen=True)
class RootSystemData:
    cartan: tuple                     # real Cartan basis T_{phi_k} (matrices)
    positive: tuple                   # Root objects, lexicographic order
    simple: tuple                     # indices into ``positive``
    scale: float

    def cartan_gram(self):
        return np.array([[self.scale * np.trace(a @ b).real for b in self.cartan]
                         for a in self.cartan])

    def values(self, diag_matrix):
        """phi(Q) for every positive root."""
        d = np.diagonal(diag_matrix)
        return np.array([np.asarray(r.weight) @ d for r in self.positive])


class BuiltModel(NamedTuple):
    model: LieAlgebraModel
    roots: RootSystemData
    split: SubalgebraSplit


def _elementary(n, a, b):
    m = np.zeros((n, n))
    m[a, b] = 1.0
    return m


def _classical_roots(family, rank):
    """(matrix size, [(weight, X_phi)], simple weights) for A_rank or D_rank."""
    roots = []
    if family == "A":
        n = rank + 1
        for a in range(n):
            for b in range(a + 1, n):
                w = np.zeros(n, dtype=int)
                w[a], w[b] = 1, -1
                roots.append((tuple(w), _elementary(n, a, b)))
        simple = [(k, k + 1) for k in range(rank)]
    else:
        n = 2 * rank
        bar = lambda i: n - 1 - i  # noqa: E731
        for i in range(rank):
            for j in range(i + 1, rank):
                w = np.zeros(n, dtype=int)
                w[i], w[j] = 1, -1
                roots.append((tuple(w), _elementary(n, i, j) - _elementary(n, bar(j), bar(i))))
                w = np.zeros(n, dtype=int)
                w[i], w[bar(j)] = 1, -1
                roots.append((tuple(w), _elementary(n, i, bar(j)) - _elementary(n, j, bar(i))))
        simple = [(k, k + 1) for k in range(rank - 1)] + [(rank - 2, bar(rank - 1))]
    simple_w = []
    for a, b in simple:
        w = np.zeros(n, dtype=int)
        w[a], w[b] = 1, -1
        simple_w.append(tuple(w))
    return n, roots, simple_w


def _weight_sort_key(w):
    return tuple(-x for x in w)


def build_model(family, rank, form="split") -> BuiltModel:
    """Split or compact real form of A_rank / D_rank with its full Cartan split.

    The split basis is ``[T_{phi_k}, X_phi (phi>0), X_-phi (phi>0)]``; the
    compact basis is ``[i T_{phi_k}, Y_phi, Z_phi]``.  K is spanned by the
    first ``rank`` basis elements.
    """
    family = str(family).upper()
    if family not in SUPPORTED or rank not in SUPPORTED[family]:
        raise CapabilityError(f"unsupported algebra {family}{rank}")
    if form not in ("split", "compact"):
        raise CapabilityError(f"unknown real form {form!r}")
    scale = PAIRING_SCALE[family]
    n, raw, simple_w = _classical_roots(family, rank)

    positive = []
    for w, x in sorted(raw, key=lambda t: _weight_sort_key(t[0])):
        nrm = scale * np.trace(x @ x.T)
        x = x / np.sqrt(nrm)
        pair = scale * np.trace(x @ x.T)
        if abs(pair - 1.0) > TOL:
            raise ConstructionError(f"root vector normalization failed: {pair}")
        positive.append([w, x, x.T.copy(), None])
    for k, w in enumerate(simple_w):
        idx = next(i for i, r in enumerate(positive) if r[0] == w)
        positive[idx][3] = k
    simple = tuple(next(i for i, r in enumerate(positive) if r[3] == k)
                   for k in range(rank))
    roots = tuple(Root(w, x, y, s) for w, x, y, s in positive)
    cartan = tuple(roots[i].pos @ roots[i].neg - roots[i].neg @ roots[i].pos
                   for i in simple)
    rsd = RootSystemData(cartan=cartan, positive=roots, simple=simple, scale=scale)

    if form == "split":
        mats = list(cartan) + [r.pos for r in roots] + [r.neg for r in roots]
        labels = ([f"H{k + 1}" for k in range(rank)]
                  + [f"X+{[int(w) for w in r.weight]}" for r in roots]
                  + [f"X-{[int(w) for w in r.weight]}" for r in roots])
    else:
        mats = [1j * h for h in cartan]
        labels = [f"iH{k + 1}" for k in range(rank)]
        for r in roots:
            mats.append(1j / np.sqrt(2) * (r.pos + r.neg))
            mats.append(1 / np.sqrt(2) * (r.pos - r.neg))
            labels += [f"Y{[int(w) for w in r.weight]}", f"Z{[int(w) for w in r.weight]}"]
    model = LieAlgebraModel(np.array(mats), scale=scale, family=family,
                            rank=rank, form=form, labels=labels)
    _check_root_data(model, rsd)
    split = SubalgebraSplit(model, np.eye(model.dim)[:, :rank])
    return BuiltModel(model, rsd, split)


def _check_root_data(model, rsd):
    for r in rsd.positive:
        pair = model.scale * np.trace(r.pos @ r.neg).real
        if abs(pair - 1.0) > TOL:
            raise ConstructionError(f"<X_phi, X_-phi> = {pair} for {r.weight}")
        for h in rsd.cartan:
            comm = h @ r.pos - r.pos @ h
            if np.max(np.abs(comm - r(h) * r.pos)) > TOL:
                raise ConstructionError(f"root relation fails for {r.weight}")


def chevalley_involution(m):
    """sigma(X) = -X^T, the Chevalley automorphism in these realizations."""
    return -np.asarray(m).T


# ---------------------------------------------------------------------------
# automorphisms


@dataclass(frozen=True, eq=False)
class Automorphism:
    """Scalar-product preserving automorphism theta acting on coefficients.

    ``matrix_map`` is the same map on realization matrices and ``group_map``
    its lift to group elements, when known.
    """

    model: LieAlgebraModel
    operator: np.ndarray
    order: int
    name: str = "theta"
    matrix_map: Callable | None = field(default=None, repr=False)
    group_map: Callable | None = field(default=None, repr=False)

    @property
    def inverse_operator(self):
        return np.linalg.inv(self.operator)

    def apply(self, x):
        return self.operator @ np.asarray(x)

    def residuals(self, split: SubalgebraSplit | None = None):
        """Bracket, isometry, order and K-fixing residuals."""
        m = self.model
        th = self.operator
        f = m.structure_constants
        lhs = np.einsum("cd,abd->abc", th, f)           # theta [T_a, T_b]
        rhs = np.einsum("ia,jb,ijc->abc", th, th, f)    # [theta T_a, theta T_b]
        out = {
            "bracket": float(np.max(np.abs(lhs - rhs))),
            "isometry": float(np.max(np.abs(th.T @ m.gram @ th - m.gram))),
        }
        if self.order > 0:  # 0 marks an automorphism of infinite/unknown order
            out["order"] = float(np.max(np.abs(
                np.linalg.matrix_power(th, self.order) - np.eye(m.dim))))
        if split is not None:
            out["fixes_k"] = float(np.max(np.abs(th @ split.k_basis - split.k_basis)))
        return out

    def check(self, split=None, tol=1e-10):
        res = self.residuals(split)
        bad = {k: v for k, v in res.items() if v > tol}
        if bad:
            raise ConstructionError(f"automorphism {self.name} fails: {bad}")
        return res


def automorphism_from_matrix_map(model, fmap, order, name, group_map=None):
    cols = []
    for t in model.basis:
        img = fmap(t)
        if model.span_residual(img) > 1e-10:
            raise ConstructionError(f"{name} does not preserve the algebra")
        if model.realness_residual(img) > TOL:
            raise ConstructionError(f"{name} does not preserve the real form")
        cols.append(model.to_coeffs(img))
    op = np.array(cols).T
    return Automorphism(model, _frozen(op), order, name, fmap, group_map)


def identity_automorphism(model):
    return Automorphism(model, _frozen(np.eye(model.dim)), 1, "id",
                        lambda x: np.asarray(x), lambda g: np.asarray(g))


def _a_diagram_maps(n):
    # tau(E_ab) = (-1)^(b-a+1) E_{n+1-b, n+1-a}
    i, j = np.indices((n, n))
    sign = (-1.0) ** (j - i + 1)

    def fmap(x):
        return sign * np.asarray(x)[::-1, ::-1].T

    s = np.zeros((n, n))
    for a in range(n):
        s[a, n - 1 - a] = (-1.0) ** (a + 1)

    def gmap(g):
        return s @ np.linalg.inv(np.asarray(g)).T @ np.linalg.inv(s)

    return fmap, gmap


def _d_diagram_maps(rank):
    n = 2 * rank
    perm = np.arange(n)
    perm[[rank - 1, rank]] = perm[[rank, rank - 1]]
    p = np.eye(n)[perm]

    def fmap(x):
        return p @ np.asarray(x) @ p

    return fmap, fmap


def diagram_maps(family, rank):
    """Realization-level (algebra map, group map) of the involutive diagram symmetry."""
    family = str(family).upper()
    if family == "A" and rank >= 2:
        return _a_diagram_maps(rank + 1)
    if family == "D" and rank >= 2:
        return _d_diagram_maps(rank)
    raise CapabilityError(f"{family}{rank} has no non-trivial involutive diagram symmetry")


def diagram_automorphism(model: LieAlgebraModel) -> Automorphism:
    """The involutive Dynkin-diagram automorphism tau, in ``model``'s basis."""
    if model.family not in SUPPORTED:
        raise CapabilityError(f"no diagram automorphism for family {model.family!r}")
    fmap, gmap = diagram_maps(model.family, model.rank)
    auto = automorphism_from_matrix_map(model, fmap, 2, "diagram", gmap)
    auto.check()
    return auto


# ---------------------------------------------------------------------------
# folding


@dataclass(frozen=True)
class FoldedData:
    """Result of folding a root system by an involutive diagram automorphism.

    Functionals (``delta_plus``, ``gamma_plus``) are integer tuples in the
    coordinates ``e_m(q) = q_m`` of ``q = diag(q_1, .., q_n, .., -q_n, .., -q_1)``.
    """

    hplus: tuple                 # matrices h_m spanning H^+
    hminus: tuple                # orthonormal basis of H^- (trace pairing)
    tau_perm: tuple              # index of tau(phi) for every positive root
    c: tuple                     # c_phi for every positive root
    xi_plus: tuple               # indices of fixed roots with c = +1
    xi_minus: tuple              # indices of fixed roots with c = -1
    psi: tuple                   # orbit representatives of 2-point orbits
    delta_plus: tuple            # folded positive roots
    gamma_plus: tuple            # positive weights of the odd module
    plus_vectors: tuple          # (alpha, X^+_alpha, X^+_-alpha)
    minus_vectors: tuple         # (lambda, X^-_lambda, X^-_-lambda)
    restrictions: tuple          # restriction of every positive root to H^+


def fold(built: BuiltModel, tau: Automorphism) -> FoldedData:
    """Fold the root data of ``built`` by the involution ``tau``."""
    model, rsd = built.model, built.roots
    fmap = tau.matrix_map
    if fmap is None:
        raise CapabilityError("folding needs the realization-level map of tau")
    if tau.order not in (1, 2):
        raise CapabilityError("folding requires an involutive automorphism")
    if any(np.max(np.abs(fmap(fmap(t)) - t)) > 1e-12 for t in model.basis):
        raise CapabilityError("tau is not involutive")
    pos = rsd.positive
    weights = [r.weight for r in pos]

    perm, cs = [], []
    for r in pos:
        img = fmap(r.pos)
        hit = None
        for j, s in enumerate(pos):
            denom = model.scale * np.trace(s.neg @ img)
            if abs(denom) > 1e-9:
                hit = (j, denom)
                break
        if hit is None:
            raise ConstructionError(f"tau maps root {r.weight} outside the positive roots")
        j, c = hit
        if np.max(np.abs(img - c * pos[j].pos)) > 1e-10:
            raise ConstructionError("tau(X_phi) is not proportional to a root vector")
        neg_img = fmap(r.neg)
        if np.max(np.abs(neg_img - c * pos[j].neg)) > 1e-10:
            raise ConstructionError("c_phi differs from c_-phi")
        if abs(c.imag) > 1e-12 or abs(abs(c.real) - 1) > 1e-12:
            raise ConstructionError(f"c_phi^2 != 1 for {r.weight}: {c}")
        perm.append(j)
        cs.append(int(round(c.real)))
    for i, j in enumerate(perm):
        if cs[i] != cs[j]:
            raise ConstructionError("c_phi != c_tau(phi)")
    for k in rsd.simple:
        if cs[k] != 1:
            raise ConstructionError("tau does not map simple root vectors to root vectors")

    n = model.size
    n_plus = sum(1 for k in rsd.simple if perm[k] >= k)  # tau-orbits on simple roots
    hplus = []
    for m in range(n_plus):
        h = np.zeros((n, n))
        h[m, m], h[n - 1 - m, n - 1 - m] = 1.0, -1.0
        if np.max(np.abs(fmap(h) - h)) > 1e-12 or model.span_residual(
                h if model.form == "split" else 1j * h) > 1e-10:
            raise ConstructionError("standard H^+ basis is not tau-fixed")
        hplus.append(h)

    # H^-: tau-odd part of the real Cartan, orthonormal in the trace pairing
    cart = np.array(rsd.cartan).real
    odd = np.array([c - fmap(c) for c in cart]).reshape(len(cart), -1).T
    u, s, _ = np.linalg.svd(odd, full_matrices=False)
    rank_minus = int(np.sum(s > 1e-10))
    hminus = []
    for v in u[:, :rank_minus].T:
        h = v.reshape(n, n)
        for prev in hminus:
            h = h - rsd.scale * np.trace(h @ prev) * prev
        h = h / np.sqrt(rsd.scale * np.trace(h @ h))
        hminus.append(h)
    if len(hplus) + len(hminus) != len(cart):
        raise ConstructionError("H^+ and H^- do not span the Cartan subalgebra")

    def restrict(w):
        return tuple(int(round(np.asarray(w) @ np.diagonal(h))) for h in hplus)

    restrictions = tuple(restrict(w) for w in weights)
    xi_plus = tuple(i for i, j in enumerate(perm) if j == i and cs[i] == 1)
    xi_minus = tuple(i for i, j in enumerate(perm) if j == i and cs[i] == -1)
    psi = tuple(i for i, j in enumerate(perm) if j > i)

    orbits = {}
    for i, j in enumerate(perm):
        orbits.setdefault(min(i, j), restrictions[i])
        if restrictions[i] != restrictions[j]:
            raise ConstructionError("tau-orbit restricts to two functionals")
    vals = list(orbits.values())
    if any(all(v == 0 for v in f) for f in vals) or len(set(vals)) != len(vals):
        raise ConstructionError("restrictions of tau-orbits are not distinct and nonzero")

    inv_sqrt2 = 1 / np.sqrt(2)
    plus, minus = [], []
    for i in psi:
        r = pos[i]
        plus.append((restrictions[i], inv_sqrt2 * (r.pos + fmap(r.pos)),
                     inv_sqrt2 * (r.neg + fmap(r.neg))))
        minus.append((restrictions[i], inv_sqrt2 * (r.pos - fmap(r.pos)),
                      inv_sqrt2 * (r.neg - fmap(r.neg))))
    for i in xi_plus:
        plus.append((restrictions[i], pos[i].pos, pos[i].neg))
    for i in xi_minus:
        minus.append((restrictions[i], pos[i].pos, pos[i].neg))
    plus.sort(key=lambda t: _weight_sort_key(t[0]))
    minus.sort(key=lambda t: _weight_sort_key(t[0]))

    return FoldedData(
        hplus=tuple(hplus), hminus=tuple(hminus), tau_perm=tuple(perm), c=tuple(cs),
        xi_plus=xi_plus, xi_minus=xi_minus, psi=psi,
        delta_plus=tuple(t[0] for t in plus), gamma_plus=tuple(t[0] for t in minus),
        plus_vectors=tuple(plus), minus_vectors=tuple(minus),
        restrictions=restrictions,
    )


def folded_vector_residuals(folded: FoldedData, scale, fmap):
    """Worst violations of the normalization, sigma and eigenvector relations."""
    worst = {"pairing": 0.0, "sigma": 0.0, "eigen": 0.0, "parity": 0.0}
    for sign, vecs in ((1, folded.plus_vectors), (-1, folded.minus_vectors)):
        for mu, xp, xn in vecs:
            worst["pairing"] = max(worst["pairing"],
                                   abs(scale * np.trace(xp @ xn) - 1.0))
            worst["sigma"] = max(worst["sigma"],
                                 float(np.max(np.abs(chevalley_involution(xp) + xn))))
            worst["parity"] = max(worst["parity"],
                                  float(np.max(np.abs(fmap(xp) - sign * xp))),
                                  float(np.max(np.abs(fmap(xn) - sign * xn))))
            for m, h in enumerate(folded.hplus):
                for vec, s in ((xp, 1), (xn, -1)):
                    comm = h @ vec - vec @ h
                    worst["eigen"] = max(worst["eigen"],
                                         float(np.max(np.abs(comm - s * mu[m] * vec))))
    return worst


def golden_folded_sets(family, rank):
    """Closed-form Delta_+ / Gamma_+ lists for the classical foldings.

    ``family``/``rank`` name the unfolded algebra: A_{2n-1}, A_{2n} or D_{n+1}.
    """
    family = str(family).upper()

    def vec(*pairs, n):
        v = [0] * n
        for i, c in pairs:
            v[i] += c
        return tuple(v)

    if family == "A" and rank % 2 == 1:
        n = (rank + 1) // 2
        kl = [(k, l) for k in range(n) for l in range(k + 1, n)]
        delta = {vec((k, 1), (l, -1), n=n) for k, l in kl}
        delta |= {vec((k, 1), (l, 1), n=n) for k, l in kl}
        delta |= {vec((m, 2), n=n) for m in range(n)}
        gamma = {vec((k, 1), (l, s), n=n) for k, l in kl for s in (1, -1)}
    elif family == "A":
        n = rank // 2
        kl = [(k, l) for k in range(n) for l in range(k + 1, n)]
        delta = {vec((k, 1), (l, s), n=n) for k, l in kl for s in (1, -1)}
        delta |= {vec((m, 1), n=n) for m in range(n)}
        gamma = set(delta) | {vec((m, 2), n=n) for m in range(n)}
    elif family == "D":
        n = rank - 1
        kl = [(k, l) for k in range(n) for l in range(k + 1, n)]
        delta = {vec((k, 1), (l, s), n=n) for k, l in kl for s in (1, -1)}
        delta |= {vec((m, 1), n=n) for m in range(n)}
        gamma = {vec((m, 1), n=n) for m in range(n)}
    else:
        raise CapabilityError(f"no folding data for {family}{rank}")
    return delta, gamma


def folding_automorphism(built: BuiltModel) -> Automorphism:
    """Diagram involution used for folding; identity for A_1 (= A_{2n-1}, n=1)."""
    m = built.model
    if m.family == "A" and m.rank == 1:
        return identity_automorphism(m)
    return diagram_automorphism(m)
