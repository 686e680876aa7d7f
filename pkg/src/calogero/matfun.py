"""Dense matrix exponential and principal logarithm.

Both are thin wrappers over :mod:`scipy.linalg` (Pade scaling-and-squaring
for ``expm``, inverse scaling-and-squaring for ``logm``).  The logarithm
wrapper adds an explicit branch-cut guard so callers get a clean error
instead of a silently wrong branch.
"""

import numpy as np
import scipy.linalg

from .errors import BranchError

BRANCH_MARGIN = 1e-6


def expm(a):
    return scipy.linalg.expm(a)


def logm(a, margin=BRANCH_MARGIN):
    """Principal logarithm of ``a``.

    Raises :class:`BranchError` if an eigenvalue of ``a`` lies on (or within
    ``margin`` of) the closed negative real axis.
    """
    a = np.asarray(a)
    if not np.all(np.isfinite(a)):
        raise BranchError("non-finite matrix in matrix logarithm")
    ev = np.linalg.eigvals(a)
    if not np.all(np.isfinite(ev)):
        raise BranchError("non-finite eigenvalues in matrix logarithm")
    scale = max(1.0, float(np.max(np.abs(ev))))
    bad = (np.abs(ev) < margin * scale) | (
        (ev.real < 0) & (np.abs(ev.imag) < margin * scale)
    )
    if np.any(bad):
        raise BranchError(
            "matrix logarithm: eigenvalue on the branch cut "
            f"(min |lambda| = {np.min(np.abs(ev)):.3e})"
        )
    out, _ = scipy.linalg.logm(a, disp=False)
    if np.isrealobj(a) and np.iscomplexobj(out):
        if np.max(np.abs(out.imag)) < 1e-10 * (1.0 + np.max(np.abs(out.real))):
            out = out.real
    return out
