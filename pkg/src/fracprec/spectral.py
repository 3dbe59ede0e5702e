"""Fractional powers of symmetric definite pencils via full diagonalization.

For a pencil (A, M) with A symmetric positive semi-definite and M symmetric
positive definite, ``generalized_eig`` computes all eigenpairs
``A @ modes == M @ modes @ diag(eigenvalues)`` with M-orthonormal modes.
Powers of the operator represented by the pencil are then diagonal in that
basis.  Two application routines cover both orientations used throughout:

- ``solve_power(pair, s, d)``:  dual -> coefficient, ``modes @ diag(w**-s) @ modes.T @ d``
  (the inverse s-power; s=1 solves A x = d, s=0 solves M x = d);
- ``apply_power(pair, s, c)``:  coefficient -> dual,
  ``M @ modes @ diag(w**s) @ modes.T @ M @ c`` (the forward s-power; s=1 is
  A @ c, s=0 is M @ c).

They are inverses of each other at the same exponent.  Both accept either a
plain array or a :class:`~fracprec.vectors.TaggedVector`; tagged input is
checked against the pair's space/level tags and returned re-tagged with the
opposite representation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fem import LevelMatrices
from .vectors import TaggedVector

__all__ = [
    "SpectralPair",
    "PencilError",
    "generalized_eig",
    "solve_power",
    "apply_power",
    "inf_sup_constant",
]

DENSE_LIMIT = 3500


class PencilError(RuntimeError):
    """The pencil is not symmetric definite or the eigensolve lost accuracy."""


@dataclass(frozen=True)
class SpectralPair:
    """Full eigendecomposition of a symmetric definite pencil."""

    eigenvalues: np.ndarray
    modes: np.ndarray
    mass: object  # sparse or dense symmetric positive definite matrix
    space: str | None = None
    level: int | None = None

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]


def _densify(mat) -> np.ndarray:
    return mat.toarray() if sp.issparse(mat) else np.asarray(mat, dtype=float)


def generalized_eig(
    a_mat,
    m_mat,
    space: str | None = None,
    level: int | None = None,
    dense_limit: int | None = DENSE_LIMIT,
    residual_tol: float = 1e-10,
) -> SpectralPair:
    """All eigenpairs of (a_mat, m_mat), M-orthonormal, ascending.

    The decomposition is validated column by column: the residual
    ``A phi - lambda M phi`` must stay below ``residual_tol * max |lambda|``;
    if it does not, the modes are re-orthonormalized in the M inner product
    and checked once more.
    """
    n = a_mat.shape[0]
    if dense_limit is not None and n > dense_limit:
        raise PencilError(
            f"pencil of dimension {n} exceeds the dense eigensolve cap {dense_limit}; "
            "raise the cap explicitly for large runs"
        )
    a_dense = _densify(a_mat)
    m_dense = _densify(m_mat)
    if not np.allclose(a_dense, a_dense.T, rtol=0, atol=1e-10 * max(1.0, np.abs(a_dense).max())):
        raise PencilError("left matrix is not symmetric")
    try:
        w, phi = sla.eigh(a_dense, m_dense, driver="gvd")
    except sla.LinAlgError as err:
        raise PencilError(f"mass matrix is not positive definite: {err}") from err
    if w[0] <= 0:
        raise PencilError(f"pencil is not positive definite (min eigenvalue {w[0]:.3e})")

    scale = residual_tol * np.abs(w).max()
    mass_op = sp.csr_matrix(m_mat) if sp.issparse(m_mat) else m_dense
    resid = a_mat @ phi - (mass_op @ phi) * w
    if np.linalg.norm(resid, axis=0).max() > scale:
        # Fix up M-orthonormality and try once more.
        gram = phi.T @ (mass_op @ phi)
        phi = phi @ np.linalg.inv(np.linalg.cholesky(gram).T)
        resid = a_mat @ phi - (mass_op @ phi) * w
        if np.linalg.norm(resid, axis=0).max() > scale:
            raise PencilError("eigen residual exceeds tolerance after re-orthonormalization")
    return SpectralPair(eigenvalues=w, modes=phi, mass=mass_op, space=space, level=level)


def _coerce(pair: SpectralPair, x, rep: str) -> np.ndarray:
    if isinstance(x, TaggedVector):
        x.require(space=pair.space, level=pair.level, rep=rep)
        return x.values
    return np.asarray(x, dtype=float)


def _tag(pair: SpectralPair, x, values: np.ndarray, rep: str):
    if isinstance(x, TaggedVector):
        return TaggedVector(x.space, x.level, rep, values)
    return values


def solve_power(pair: SpectralPair, s: float, d):
    """Inverse s-power applied to a dual vector; returns coefficients."""
    vals = _coerce(pair, d, "dual")
    out = pair.modes @ (pair.eigenvalues ** (-s) * (pair.modes.T @ vals))
    return _tag(pair, d, out, "coefficient")


def apply_power(pair: SpectralPair, s: float, c):
    """Forward s-power applied to a coefficient vector; returns a dual vector."""
    vals = _coerce(pair, c, "coefficient")
    out = pair.mass @ (pair.modes @ (pair.eigenvalues**s * (pair.modes.T @ (pair.mass @ vals))))
    return _tag(pair, c, out, "dual")


def power_matrix(pair: SpectralPair, s: float, dual_form: bool = False) -> np.ndarray:
    """Dense matrix of the s-power: dual->coefficient by default, or the
    coefficient->dual (forward) form."""
    if dual_form:
        core = (pair.modes * pair.eigenvalues**s) @ pair.modes.T
        m = _densify(pair.mass)
        return m @ core @ m
    return (pair.modes * pair.eigenvalues ** (-s)) @ pair.modes.T


def inf_sup_constant(lm: LevelMatrices) -> float:
    """The constant beta relating the two S-space energies: beta**2 is the
    smallest eigenvalue of the pencil (grad.T inv(hdiv) grad, mass_s)."""
    lu = spla.splu(lm.hdiv.tocsc())
    B0 = lm.grad.T @ lu.solve(lm.grad.toarray())
    a = lm.mass_s.diagonal()
    scaled = B0 / np.sqrt(np.outer(a, a))
    w = np.linalg.eigvalsh(0.5 * (scaled + scaled.T))
    return float(np.sqrt(w[0]))
