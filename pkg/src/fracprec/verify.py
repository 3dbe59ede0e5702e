"""Numerical checks of the operator inequalities behind the preconditioners.

Every check phrases its inequality as an eigenvalue statement about a
difference or quotient pencil — no per-vector sampling — and reports the
worst (most negative) margin found over its parameter grid, normalized by
the spectral radius of the operator involved.  A report passes when that
margin is no worse than ``-tol``.

The matrix-level checks (operator Jensen, Loewner-Heinz) run hundreds of
randomized trials on small dense matrices.  The mesh-level checks build the
actual discrete operators on a small hierarchy and verify

  * the one-sided coarse-restriction inequality for fractional powers (with
    its adjoint form, and the fact that the fractional coarse projection is
    a projection only at the endpoint exponents),
  * the commuting identity  (level power) o (fractional projection chain)
    = (dual restriction chain) o (finest power),
  * the two-sided spectral bounds of the gradient-sandwich preconditioner,
  * invariance of the discrete Helmholtz subspaces under fractional powers,
  * the smoother upper bound, its endpoint interpolation, and the
    stable-decomposition lower-bound constant of the additive multilevel
    solver.

The last two double as measurements: the constants they estimate (K0, K1,
C1, C2, the splitting stability c) are reported alongside the pass flag.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .fem import assemble_all, assemble_prolongation, laplacian_dual
from .mesh import build_hierarchy
from .multigrid import build_additive_multigrid, precompute_patches
from .spectral import generalized_eig, inf_sup_constant, power_matrix
from .auxiliary import aux_pencil_eigenvalues, make_aux_spectrum_context

__all__ = [
    "InequalityReport",
    "DEFAULT_GRID",
    "check_jensen",
    "check_loewner_heinz",
    "check_noninheritance",
    "check_projection_identity",
    "check_aux_bounds",
    "check_helmholtz_invariance",
    "check_smoother_bound",
    "check_stable_decomposition",
    "run_all",
    "report_text",
    "report_csv",
]

DEFAULT_GRID = tuple(np.round(np.linspace(0.0, 1.0, 11), 1))


@dataclass(frozen=True)
class InequalityReport:
    name: str
    grid: tuple
    worst: float  # most negative normalized margin seen (>= 0: no violation)
    tol: float
    constants: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.worst >= -self.tol

    def __str__(self) -> str:
        status = "pass" if self.passed else "FAIL"
        extra = "".join(f"  {k}={v:.4g}" for k, v in sorted(self.constants.items()))
        return f"{status}  {self.name}: worst margin {self.worst:+.3e} (tol {self.tol:g}){extra}"


def _min_eig(sym: np.ndarray) -> float:
    return float(sla.eigh(0.5 * (sym + sym.T), eigvals_only=True)[0])


def _power(symmetric: np.ndarray, s: float) -> np.ndarray:
    w, V = sla.eigh(0.5 * (symmetric + symmetric.T))
    w = np.clip(w, 0.0, None)
    return (V * w**s) @ V.T


def check_jensen(trials=200, max_dim=40, s_grid=DEFAULT_GRID, seed=20, tol=1e-9):
    """T' A^s T <= (T' A T)^s for contractions T and symmetric PSD A."""
    rng = np.random.default_rng(seed)
    worst = np.inf
    for _ in range(trials):
        m = int(rng.integers(2, max_dim + 1))
        k = int(rng.integers(1, m + 1))
        T = rng.standard_normal((m, k))
        norm = np.linalg.norm(T, 2)
        if norm > 1.0:
            T /= norm * (1.0 + 1e-12)
        C = rng.standard_normal((m, m))
        A = C.T @ C
        w, V = sla.eigh(A)
        w = np.clip(w, 0.0, None)
        scale = max(w[-1], 1.0)
        for s in s_grid:
            lhs = T.T @ ((V * w**s) @ V.T) @ T
            rhs = _power(T.T @ A @ T, s)
            worst = min(worst, _min_eig(rhs - lhs) / scale**s)
    return InequalityReport("operator-jensen", tuple(s_grid), worst, tol)


def check_loewner_heinz(trials=200, max_dim=40, s_grid=DEFAULT_GRID, seed=21, tol=1e-9):
    """A <= B implies A^s <= B^s for s in [0, 1]."""
    rng = np.random.default_rng(seed)
    worst = np.inf
    for _ in range(trials):
        m = int(rng.integers(2, max_dim + 1))
        C = rng.standard_normal((m, m))
        A = C.T @ C
        D = rng.standard_normal((int(rng.integers(1, m + 1)), m))
        B = A + D.T @ D
        scale = max(np.linalg.norm(B, 2), 1.0)
        for s in s_grid:
            worst = min(worst, _min_eig(_power(B, s) - _power(A, s)) / scale**s)
    return InequalityReport("loewner-heinz", tuple(s_grid), worst, tol)


class MeshOperators:
    """Dense level operators on a small hierarchy, shared by the mesh checks.

    Holds, per level: the flux pencil eigendecomposition, dual-form and
    inverse-power matrices for any exponent, and the embedding (prolongation)
    matrices between consecutive levels.
    """

    def __init__(self, n0=1, num_levels=4):
        self.hierarchy = build_hierarchy(n0, num_levels)
        self.lms = assemble_all(self.hierarchy)
        self.pairs = [
            generalized_eig(lm.hdiv, lm.mass_v, space="V", level=k)
            for k, lm in enumerate(self.lms)
        ]
        self.embeddings = [
            assemble_prolongation(self.hierarchy, k).flux.toarray()
            for k in range(num_levels - 1)
        ]
        self.patch_data = precompute_patches(self.hierarchy, self.lms)

    @property
    def num_levels(self) -> int:
        return self.hierarchy.num_levels

    def dual_form(self, k: int, s: float) -> np.ndarray:
        return power_matrix(self.pairs[k], s, dual_form=True)

    def solve_form(self, k: int, s: float) -> np.ndarray:
        return power_matrix(self.pairs[k], s)

    def fractional_projection(self, k: int, s: float) -> np.ndarray:
        """The coarse-restriction map defined by matching s-power duals
        against every coarse function: inv(F_c(s)) P' F_f(s)."""
        P = self.embeddings[k]
        return np.linalg.solve(self.dual_form(k, s), P.T @ self.dual_form(k + 1, s))

    def smoother_matrix(self, k: int, s: float) -> np.ndarray:
        """Dense dual-to-coefficient matrix of the level-k patch smoother."""
        mg = build_additive_multigrid(
            self.hierarchy, self.lms, s,
            patch_data=self.patch_data,
            prolongations=[],  # not used by _smooth
            coarse_pair=self.pairs[0],
        )
        dim = self.lms[k].mesh.num_edges
        R = np.column_stack([mg._smooth(k, col) for col in np.eye(dim)])
        return 0.5 * (R + R.T)  # symmetric up to roundoff by construction


def check_noninheritance(ops: MeshOperators | None = None, s_grid=DEFAULT_GRID, tol=1e-9):
    """Fractional powers are not inherited under coarsening, but one-sided:
    the coarse s-power form dominates the restricted fine one.  Also checks
    the adjoint form and that the fractional coarse projection composed with
    the embedding is the identity only at s in {0, 1}."""
    ops = ops or MeshOperators()
    worst = np.inf
    defects = {}
    for s in s_grid:
        for k in range(ops.num_levels - 1):
            P = ops.embeddings[k]
            Fc = ops.dual_form(k, s)
            Ff = ops.dual_form(k + 1, s)
            scale = sla.eigh(Fc, eigvals_only=True)[-1]
            worst = min(worst, _min_eig(Fc - P.T @ Ff @ P) / scale)
            # Adjoint form: the projected coarse form is dominated by the
            # fine one.
            Ps = ops.fractional_projection(k, s)
            scale_f = sla.eigh(Ff, eigvals_only=True)[-1]
            worst = min(worst, _min_eig(Ff - Ps.T @ Fc @ Ps) / scale_f)
            if k == ops.num_levels - 2:
                defect = np.linalg.norm(Ps @ P - np.eye(P.shape[1]), 2)
                defects[f"projection_defect_s={s:g}"] = defect
    # Endpoints collapse to genuine projections; strictly inside (0,1) they
    # must not (the composed map fails to reproduce coarse functions).
    for s in s_grid:
        defect = defects[f"projection_defect_s={s:g}"]
        if s in (0.0, 1.0):
            worst = min(worst, tol - defect)  # defect itself must be ~ 0
        elif defect <= 1e-6:
            worst = min(worst, -1.0)  # a projection where there must not be one
    keep = {k: v for k, v in defects.items() if k.endswith(("s=0", "s=0.5", "s=1"))}
    return InequalityReport("coarse-power-noninheritance", tuple(s_grid), worst, tol, keep)


def check_projection_identity(ops: MeshOperators | None = None, s_grid=DEFAULT_GRID, tol=1e-10):
    """(level power) o (fractional projection chain) equals
    (dual restriction chain) o (finest power), level by level."""
    ops = ops or MeshOperators(n0=1, num_levels=3)
    J = ops.num_levels
    worst = np.inf
    for s in s_grid:
        Fh = ops.dual_form(J - 1, s)
        chain = np.eye(Fh.shape[0])
        proj = np.eye(Fh.shape[0])
        for k in range(J - 2, -1, -1):
            chain = ops.embeddings[k].T @ chain  # dual restriction to level k
            proj = ops.fractional_projection(k, s) @ proj
            lhs = ops.dual_form(k, s) @ proj
            rhs = chain @ Fh
            worst = min(worst, -np.abs(lhs - rhs).max() / np.abs(rhs).max())
    return InequalityReport("power-projection-commutes", tuple(s_grid), worst, tol)


def check_aux_bounds(lm=None, t_grid=DEFAULT_GRID, tol=1e-9):
    """Eigenvalues of the gradient-sandwich pencil lie in [beta^(2(1-t)), 1]:
    grad' (flux -(1-t)-power) grad against the scalar t-power dual form."""
    if lm is None:
        lm = assemble_all(build_hierarchy(8, 1))[-1]
    flux_pair = generalized_eig(lm.hdiv, lm.mass_v, space="V", level=lm.index)
    scalar_pair = generalized_eig(laplacian_dual(lm), lm.mass_s, space="S", level=lm.index)
    ctx = make_aux_spectrum_context(lm, flux_pair, scalar_pair)
    beta_sq = inf_sup_constant(lm) ** 2
    worst = np.inf
    for t in t_grid:
        w = aux_pencil_eigenvalues(ctx, -t)
        worst = min(worst, float(w[0]) - beta_sq ** (1.0 - t), 1.0 - float(w[-1]))
    return InequalityReport(
        "gradient-sandwich-bounds", tuple(t_grid), worst, tol,
        {"beta^-2": 1.0 / beta_sq},
    )


def check_helmholtz_invariance(lm=None, s_grid=DEFAULT_GRID, tol=1e-9):
    """Fractional powers of the flux operator preserve the Helmholtz split:
    rotated-gradient fields are fixed vectors (eigenvalue 1 for every s),
    gradient fields stay gradient fields, and on them the s-power acts with
    eigenvalues (1 + scalar eigenvalue)^s."""
    if lm is None:
        lm = assemble_all(build_hierarchy(8, 1))[-1]
    vpair = generalized_eig(lm.hdiv, lm.mass_v, space="V", level=lm.index)
    M = lm.mass_v.toarray()
    Minv_grad = np.linalg.solve(M, lm.grad.toarray())  # gradient fields, coefficients
    curl = lm.curl.toarray()[:, 1:]  # rotated gradients, dual; drop the constant
    alpha = generalized_eig(
        lm.grad.T @ Minv_grad, lm.mass_s, space="S", level=lm.index
    ).eigenvalues
    worst = np.inf
    for s in s_grid:
        Fs = power_matrix(vpair, s, dual_form=True)
        curl_image = Fs @ np.linalg.solve(M, curl)
        worst = min(worst, -np.abs(curl_image - curl).max() / np.abs(curl).max())
        cross = Minv_grad.T @ curl_image
        worst = min(worst, -np.abs(cross).max() / sla.eigh(Fs, eigvals_only=True)[-1])
        w = generalized_eig(Minv_grad.T @ Fs @ Minv_grad, Minv_grad.T @ M @ Minv_grad).eigenvalues
        expect = np.sort((1.0 + alpha) ** s)
        worst = min(worst, -np.abs(w - expect).max() / expect[-1])
    return InequalityReport("helmholtz-invariance", tuple(s_grid), worst, tol)


def check_smoother_bound(ops: MeshOperators | None = None, s_grid=DEFAULT_GRID, tol=1e-8):
    """Patch-smoother upper bound: the smoother form is dominated by a
    constant times the inverse s-power form, with the constant interpolating
    the endpoint constants K0 (mass solve) and K1 (full solve) as
    K0^(1-s) K1^s."""
    ops = ops or MeshOperators()
    K0 = K1 = c = 0.0
    worst = np.inf
    C1 = 0.0
    for k in range(1, ops.num_levels):
        R0 = ops.smoother_matrix(k, 0.0)
        R1 = ops.smoother_matrix(k, 1.0)
        w0 = generalized_eig(R0, ops.solve_form(k, 0.0)).eigenvalues
        w1 = generalized_eig(R1, ops.solve_form(k, 1.0)).eigenvalues
        K0 = max(K0, w0[-1])
        K1 = max(K1, w1[-1])
        c = max(c, 1.0 / w0[0])  # splitting stability of the patch cover
        for s in s_grid:
            top = generalized_eig(
                ops.smoother_matrix(k, s), ops.solve_form(k, s)
            ).eigenvalues[-1]
            C1 = max(C1, top)
            bound = w0[-1] ** (1.0 - s) * w1[-1] ** s
            worst = min(worst, (bound - top) / bound)
    return InequalityReport(
        "smoother-upper-bound", tuple(s_grid), worst, tol,
        {"K0": K0, "K1": K1, "C1": C1, "c": c},
    )


def check_stable_decomposition(ops: MeshOperators | None = None, s_grid=DEFAULT_GRID,
                               tol=1e-9, decay_floor=0.5):
    """Multilevel splitting on the complement of the fractional coarse
    projection: pencil of the inverse smoother form against the s-power form.

    Its smallest eigenvalue is what the preconditioner's lower spectral bound
    rests on; we require it not to collapse between consecutive levels
    (finer/coarser ratio above ``decay_floor``).  The largest eigenvalue is
    the splitting constant C2, which is only conjectured to be
    level-independent: away from the endpoint exponents the complement map is
    not a projection and its range fills the whole level, so C2 is reported
    as a measurement, not asserted.
    """
    ops = ops or MeshOperators()
    C2 = 0.0
    growth = 1.0
    lam_min = np.inf
    worst = np.inf
    for s in s_grid:
        prev = None
        for k in range(1, ops.num_levels):
            Rinv = np.linalg.inv(ops.smoother_matrix(k, s))
            Ps = ops.fractional_projection(k - 1, s)
            comp = np.eye(Rinv.shape[0]) - ops.embeddings[k - 1] @ Ps
            Z = sla.orth(comp)
            w = generalized_eig(
                Z.T @ (0.5 * (Rinv + Rinv.T)) @ Z,
                Z.T @ ops.dual_form(k, s) @ Z,
            ).eigenvalues
            C2 = max(C2, w[-1])
            lam_min = min(lam_min, w[0])
            if prev is not None:
                worst = min(worst, w[0] / prev[0] - decay_floor)
                growth = max(growth, w[-1] / prev[-1])
            prev = w
    return InequalityReport(
        "stable-decomposition", tuple(s_grid), worst, tol,
        {"C2": C2, "C2_growth": growth, "lambda_min": lam_min},
    )


def run_all(trials=200, max_dim=40, s_grid=DEFAULT_GRID, seed=20, tol=1e-9, workers=0):
    """Run every check; returns the list of reports in a fixed order."""
    ops = MeshOperators()
    jobs = [
        lambda: check_jensen(trials, max_dim, s_grid, seed, tol),
        lambda: check_loewner_heinz(trials, max_dim, s_grid, seed + 1, tol),
        lambda: check_noninheritance(ops, s_grid, tol),
        lambda: check_projection_identity(MeshOperators(1, 3), s_grid, max(tol, 1e-10)),
        lambda: check_aux_bounds(None, s_grid, tol),
        lambda: check_helmholtz_invariance(None, s_grid, tol),
        lambda: check_smoother_bound(ops, s_grid, max(tol, 1e-8)),
        lambda: check_stable_decomposition(ops, s_grid, tol),
    ]
    if workers and workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(job) for job in jobs]
            return [f.result() for f in futures]
    return [job() for job in jobs]


def report_text(reports) -> str:
    lines = [str(r) for r in reports]
    failed = sum(not r.passed for r in reports)
    lines.append(f"{len(reports) - failed}/{len(reports)} checks passed")
    return "\n".join(lines)


def report_csv(reports, stream) -> None:
    writer = csv.writer(stream)
    writer.writerow(["name", "grid", "worst", "tol", "passed", "constants"])
    for r in reports:
        consts = ";".join(f"{k}={v:.6g}" for k, v in sorted(r.constants.items()))
        writer.writerow([r.name, " ".join(f"{g:g}" for g in r.grid),
                         f"{r.worst:.6e}", f"{r.tol:g}", int(r.passed), consts])
