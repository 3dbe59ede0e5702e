"""Additive multilevel preconditioner for fractional flux-space operators.

The preconditioner acts on a dual vector of the finest level and returns a
coefficient vector.  It sums one exact fractional solve on the coarsest
level with, on every finer level, a vertex-patch smoother built from local
eigendecompositions:

- restriction of dual data is the transposed coefficient embedding, applied
  level by level (projections onto coarser spaces need no mass solve in the
  dual representation);
- on the coarsest level the full pencil (hdiv, mass_v) is diagonalized and
  the inverse s-power applied exactly;
- on level k >= 1 every mesh vertex contributes the inverse s-power of the
  pencil restricted to the edges meeting that vertex, scattered back;
- coefficient contributions are carried up through the embeddings and added.

Patch eigendecompositions do not depend on the exponent, so they can be
computed once (``precompute_patches``) and shared between preconditioners
for different exponents.

All sums run in a fixed order (levels ascending; within a level the patch
batches by ascending patch size, each batch in ascending vertex order), so
repeated applications are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem import assemble_prolongation
from .spectral import SpectralPair, generalized_eig, solve_power
from .vectors import TaggedVector

__all__ = ["PatchSolverGroup", "AdditiveMultigrid", "precompute_patches", "build_additive_multigrid"]


@dataclass(frozen=True)
class PatchSolverGroup:
    """All patches of one size on one level, eigendecomposed as a batch.

    ``dofs[p]`` are the edge indices of patch p (ascending vertex order
    across p); ``eigenvalues[p]``/``modes[p]`` diagonalize the local pencil
    (hdiv restricted, mass_v restricted) with mass-orthonormal modes.
    """

    dofs: np.ndarray         # (npatch, size) int
    eigenvalues: np.ndarray  # (npatch, size)
    modes: np.ndarray        # (npatch, size, size)


def _group_patches(lm, patches) -> list:
    by_size = {}
    for p in patches:
        by_size.setdefault(len(p.edge_ids), []).append(p.edge_ids)
    hdiv = lm.hdiv.toarray()
    mass = lm.mass_v.toarray()
    groups = []
    for size in sorted(by_size):
        dofs = np.vstack(by_size[size])
        A = hdiv[dofs[:, :, None], dofs[:, None, :]]
        M = mass[dofs[:, :, None], dofs[:, None, :]]
        L = np.linalg.cholesky(M)
        Linv = np.linalg.inv(L)
        w, Q = np.linalg.eigh(Linv @ A @ np.transpose(Linv, (0, 2, 1)))
        modes = np.transpose(Linv, (0, 2, 1)) @ Q
        groups.append(PatchSolverGroup(dofs=dofs, eigenvalues=w, modes=modes))
    return groups


def precompute_patches(hierarchy, lms) -> list:
    """Per-level patch eigendecompositions; entry 0 is None (exact there)."""
    from .mesh import vertex_patches

    out = [None]
    for k in range(1, len(lms)):
        out.append(_group_patches(lms[k], vertex_patches(hierarchy.levels[k])))
    return out


class AdditiveMultigrid:
    """Sum of an exact coarse fractional solve and per-level patch smoothers."""

    def __init__(self, s, coarse_pair: SpectralPair, patch_groups, prolongations, finest_index, dim):
        if not 0.0 <= s <= 1.0:
            raise ValueError(f"exponent must lie in [0, 1], got {s}")
        self.s = s
        self.coarse_pair = coarse_pair
        self.patch_groups = patch_groups
        self.prolongations = prolongations  # flux embeddings, level k -> k+1
        self.finest_index = finest_index
        self.dim = dim
        # Exponent-scaled patch spectra, fixed at build time.
        self._scaled = [
            None if groups is None else [g.eigenvalues ** (-s) for g in groups]
            for groups in patch_groups
        ]

    @property
    def num_levels(self) -> int:
        return len(self.patch_groups)

    def _smooth(self, k, dual: np.ndarray) -> np.ndarray:
        out = np.zeros_like(dual)
        for g, lam in zip(self.patch_groups[k], self._scaled[k]):
            x = dual[g.dofs]
            y = np.einsum("pji,pj->pi", g.modes, x)
            z = np.einsum("pij,pj->pi", g.modes, lam * y)
            np.add.at(out, g.dofs.ravel(), z.ravel())
        return out

    def apply(self, d):
        """Dual vector in, coefficient vector out."""
        tagged = isinstance(d, TaggedVector)
        if tagged:
            d.require(space="V", level=self.finest_index, rep="dual")
            vals = d.values
        else:
            vals = np.asarray(d, dtype=float)
        if vals.shape != (self.dim,):
            raise ValueError(f"expected dual vector of length {self.dim}, got {vals.shape}")

        J = self.num_levels
        duals = [None] * J
        duals[J - 1] = vals
        for k in range(J - 2, -1, -1):
            duals[k] = self.prolongations[k].T @ duals[k + 1]
        acc = solve_power(self.coarse_pair, self.s, duals[0])
        for k in range(1, J):
            acc = self.prolongations[k - 1] @ acc
            acc += self._smooth(k, duals[k])
        if tagged:
            return TaggedVector("V", self.finest_index, "coefficient", acc)
        return acc

    def as_matrix(self) -> np.ndarray:
        """Dense dual-to-coefficient matrix (small problems; for checks)."""
        cols = [self.apply(col) for col in np.eye(self.dim)]
        return np.column_stack(cols)


def build_additive_multigrid(hierarchy, lms, s, patch_data=None, prolongations=None, coarse_pair=None):
    """Assemble the preconditioner for one exponent.

    ``patch_data``, ``prolongations`` and ``coarse_pair`` may be passed in to
    share setup work between exponents on the same hierarchy (none of them
    depends on the exponent).
    """
    if len(lms) != hierarchy.num_levels:
        raise ValueError("one assembled level per mesh level is required")
    if patch_data is None:
        patch_data = precompute_patches(hierarchy, lms)
    if prolongations is None:
        prolongations = [
            assemble_prolongation(hierarchy, k).flux for k in range(hierarchy.num_levels - 1)
        ]
    if coarse_pair is None:
        coarse_pair = generalized_eig(lms[0].hdiv, lms[0].mass_v, space="V", level=0)
    return AdditiveMultigrid(
        s=s,
        coarse_pair=coarse_pair,
        patch_groups=patch_data,
        prolongations=prolongations,
        finest_index=hierarchy.num_levels - 1,
        dim=lms[-1].mesh.num_edges,
    )
