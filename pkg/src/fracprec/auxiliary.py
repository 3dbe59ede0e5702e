"""Preconditioner for negative fractional powers of the scalar operator.

For exponents s in [-1, 0] the preconditioner sandwiches a flux-space solve
between the discrete gradient and its transpose,

    B_s = grad.T  o  (inverse (1+s)-power on the flux space)  o  grad,

mapping scalar coefficient vectors to scalar dual vectors.  The inner solve
is either the exact spectral inverse power (reference) or the additive
multilevel preconditioner (practical).  At s = -1 the exact variant
reproduces the inverse scalar operator's action identically, because the
inner solve degenerates to a flux mass solve.

The exact preconditioned spectrum is available without running any Krylov
iterations: with the flux pencil modes Phi_V (eigenvalues mu) and scalar
pencil modes Phi_S (eigenvalues alpha), the preconditioned operator is
similar to

    diag(alpha^(s/2)) @ E.T @ diag(mu^-(1+s)) @ E @ diag(alpha^(s/2)),

with the coupling matrix E = Phi_V.T @ grad @ Phi_S computed once per level
and shared across exponents.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem import LevelMatrices
from .spectral import SpectralPair, solve_power
from .vectors import TaggedVector

__all__ = [
    "AuxiliaryPreconditioner",
    "build_exact",
    "build_multigrid",
    "AuxSpectrumContext",
    "make_aux_spectrum_context",
    "aux_pencil_eigenvalues",
    "exact_condition_number",
]


class AuxiliaryPreconditioner:
    """grad.T composed with an inner flux solve composed with grad."""

    def __init__(self, s: float, lm: LevelMatrices, inner, kind: str):
        if not -1.0 <= s <= 0.0:
            raise ValueError(f"exponent must lie in [-1, 0], got {s}")
        self.s = s
        self.lm = lm
        self.inner = inner
        self.kind = kind

    def apply(self, u):
        tagged = isinstance(u, TaggedVector)
        if tagged:
            u.require(space="S", level=self.lm.index, rep="coefficient")
            vals = u.values
        else:
            vals = np.asarray(u, dtype=float)
        flux_dual = self.lm.grad @ vals
        flux_coeff = self.inner(flux_dual)
        out = self.lm.grad.T @ flux_coeff
        if tagged:
            return TaggedVector("S", self.lm.index, "dual", out)
        return out

    def as_matrix(self) -> np.ndarray:
        dim = self.lm.mesh.num_triangles
        return np.column_stack([self.apply(col) for col in np.eye(dim)])


def build_exact(s: float, lm: LevelMatrices, flux_pair: SpectralPair) -> AuxiliaryPreconditioner:
    """Reference variant: exact inverse (1+s)-power on the flux space."""
    return AuxiliaryPreconditioner(
        s, lm, lambda d: solve_power(flux_pair, 1.0 + s, d), kind="exact"
    )


def build_multigrid(s: float, hierarchy, lms, **shared) -> AuxiliaryPreconditioner:
    """Practical variant: the additive multilevel solver at exponent 1+s.

    ``shared`` forwards ``patch_data``/``prolongations``/``coarse_pair`` so a
    sweep over exponents pays the setup once.
    """
    from .multigrid import build_additive_multigrid

    if not -1.0 <= s <= 0.0:
        raise ValueError(f"exponent must lie in [-1, 0], got {s}")
    mg = build_additive_multigrid(hierarchy, lms, 1.0 + s, **shared)
    return AuxiliaryPreconditioner(s, lms[-1], mg.apply, kind="multigrid")


@dataclass(frozen=True)
class AuxSpectrumContext:
    """Exponent-independent pieces of the exact preconditioned spectrum."""

    scalar_eigenvalues: np.ndarray
    flux_eigenvalues: np.ndarray
    coupling: np.ndarray  # flux modes.T @ grad @ scalar modes

    @property
    def dim(self) -> int:
        return self.scalar_eigenvalues.shape[0]


def make_aux_spectrum_context(
    lm: LevelMatrices, flux_pair: SpectralPair, scalar_pair: SpectralPair
) -> AuxSpectrumContext:
    coupling = flux_pair.modes.T @ (lm.grad @ scalar_pair.modes)
    return AuxSpectrumContext(
        scalar_eigenvalues=scalar_pair.eigenvalues,
        flux_eigenvalues=flux_pair.eigenvalues,
        coupling=coupling,
    )


def aux_pencil_eigenvalues(ctx: AuxSpectrumContext, s: float) -> np.ndarray:
    """All eigenvalues of the exactly preconditioned scalar s-power."""
    if not -1.0 <= s <= 0.0:
        raise ValueError(f"exponent must lie in [-1, 0], got {s}")
    w = ctx.flux_eigenvalues ** -(1.0 + s)
    core = (ctx.coupling * w[:, None]).T @ ctx.coupling
    a = ctx.scalar_eigenvalues ** (s / 2.0)
    return np.linalg.eigvalsh(core * np.outer(a, a))


def exact_condition_number(ctx: AuxSpectrumContext, s: float) -> float:
    w = aux_pencil_eigenvalues(ctx, s)
    return float(w[-1] / w[0])
