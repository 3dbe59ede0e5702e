"""Experiment grids: iteration counts and condition numbers.

Three grids are produced, mirroring the package's three headline results:

  1. the positive-power flux operator preconditioned by the additive
     multilevel solver (PCG iterations + Lanczos condition estimates),
  2. the exact gradient-sandwich preconditioner for negative scalar powers
     (exact condition numbers, no Krylov iterations),
  3. the multilevel gradient-sandwich preconditioner for negative scalar
     powers (PCG + estimates).

Cells are seeded individually from (seed, table, exponent, size), so a grid
is reproducible cell by cell no matter which subset or order is run, and
re-running a configuration writes byte-identical output.  The table column
label ``N`` is the system dimension: edge count for grid 1, triangle count
for grids 2 and 3.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .auxiliary import (
    build_multigrid,
    exact_condition_number,
    make_aux_spectrum_context,
)
from .fem import assemble_all, assemble_prolongation, laplacian_dual
from .krylov import IndefinitenessError, pcg
from .mesh import build_hierarchy
from .multigrid import build_additive_multigrid, precompute_patches
from .spectral import PencilError, apply_power, generalized_eig, inf_sup_constant, solve_power
from .vectors import TaggedVector

__all__ = [
    "ExperimentConfig",
    "CellResult",
    "TableResult",
    "default_config",
    "run_table1",
    "run_table2",
    "run_table3",
    "run_props",
]

POSITIVE_S = tuple(round(0.1 * i, 1) for i in range(11))
NEGATIVE_S = tuple(round(-1.0 + 0.1 * i, 1) for i in range(11))

_DEFAULTS = {
    "1": dict(s_values=POSITIVE_S, sizes=(8, 16, 32), tol=1e-9),
    "2": dict(s_values=NEGATIVE_S, sizes=(16, 32), tol=None),
    "3": dict(s_values=NEGATIVE_S, sizes=(8, 16, 32), tol=1e-10),
    "props": dict(s_values=POSITIVE_S, sizes=(8,), tol=1e-9),
}


@dataclass(frozen=True)
class ExperimentConfig:
    table: str
    s_values: tuple
    sizes: tuple  # finest mesh subdivisions n per column
    levels: int = 4
    tol: float | None = None  # None: table default (exact eigensolve for "2")
    maxit: int = 200
    seed: int = 7
    fmt: str = "markdown"
    out: str | None = None
    workers: int = 0
    max_dense: int = 3500
    trials: int = 200  # property-suite only


def default_config(table: str, **overrides) -> ExperimentConfig:
    table = str(table)
    if table not in _DEFAULTS:
        raise ValueError(f"unknown table {table!r}; expected 1, 2, 3 or props")
    base = dict(_DEFAULTS[table], table=table)
    tol = overrides.pop("tol", None)
    if tol is not None:
        base["tol"] = tol
    cfg = ExperimentConfig(**base)
    return replace(cfg, **overrides) if overrides else cfg


def resolve_size(value: int, table: str) -> int:
    """Accept either a mesh subdivision count n (small values) or a system
    dimension N (values of 100 and up), returning n."""
    if value < 100:
        return value
    if table == "1":  # N = 3n^2 + 2n (edge count)
        n = (math.isqrt(1 + 3 * value) - 1) / 3
    else:  # N = 2n^2 (triangle count)
        n = math.isqrt(value // 2)
    n = int(round(n))
    expected = 3 * n * n + 2 * n if table == "1" else 2 * n * n
    if expected != value:
        raise ValueError(f"{value} is not a valid system dimension for this grid")
    return n


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    cfg = replace(cfg, sizes=tuple(resolve_size(v, cfg.table) for v in cfg.sizes))
    if cfg.table in ("1", "3"):
        step = 2 ** (cfg.levels - 1)
        for n in cfg.sizes:
            if n % step or n < step:
                raise ValueError(
                    f"finest size n={n} does not refine down over {cfg.levels} levels "
                    f"(needs a multiple of {step})"
                )
        lo, hi = (0.0, 1.0) if cfg.table == "1" else (-1.0, 0.0)
        for s in cfg.s_values:
            if not lo <= s <= hi:
                raise ValueError(f"exponent {s} outside [{lo}, {hi}]")
    if cfg.table == "2":
        for s in cfg.s_values:
            if not -1.0 <= s <= 0.0:
                raise ValueError(f"exponent {s} outside [-1.0, 0.0]")
    if cfg.tol is not None and cfg.tol <= 0:
        raise ValueError("tolerance must be positive")
    if cfg.maxit < 1:
        raise ValueError("maxit must be at least 1")
    return cfg


@dataclass(frozen=True)
class CellResult:
    s: float
    size: int  # system dimension N
    iters: int | None
    cond: float
    converged: bool
    note: str = ""


@dataclass
class TableResult:
    table: str
    config: ExperimentConfig
    columns: tuple  # N per size column
    cells: dict = field(default_factory=dict)  # (s, column N) -> CellResult
    reference: dict = field(default_factory=dict)  # table 2: s -> beta^(-2(1+s))

    @property
    def failed(self) -> bool:
        return any(not c.converged for c in self.cells.values())

    def _cell_text(self, s, N) -> str:
        cell = self.cells[(s, N)]
        if self.table == "2":
            return f"{cell.cond:.3f}"
        text = f"{cell.iters}({cell.cond:.1f})" if cell.iters is not None else "error"
        return text if cell.converged else text + "*"

    def to_markdown(self) -> str:
        header = ["s"] + [f"N={N}" for N in self.columns]
        if self.reference:
            header.append("beta^-2(1+s)")
        lines = ["| " + " | ".join(header) + " |",
                 "|" + "---|" * len(header)]
        for s in self.config.s_values:
            row = [f"{s:.1f}"] + [self._cell_text(s, N) for N in self.columns]
            if self.reference:
                row.append(f"{self.reference[s]:.3f}")
            lines.append("| " + " | ".join(row) + " |")
        notes = [c.note for c in self.cells.values() if c.note]
        if any(not c.converged for c in self.cells.values()):
            lines.append("")
            lines.append("`*` did not converge within the iteration cap"
                         + ("; " + "; ".join(sorted(set(notes))) if notes else ""))
        return "\n".join(lines) + "\n"

    def to_csv(self, stream) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["table", "s", "N", "iters", "cond", "seed", "tol"])
        tol = "exact" if self.config.tol is None else f"{self.config.tol:g}"
        for s in self.config.s_values:
            for N in self.columns:
                cell = self.cells[(s, N)]
                writer.writerow([
                    self.table, f"{s:.1f}", N,
                    "" if cell.iters is None else cell.iters,
                    f"{cell.cond:.6g}", self.config.seed, tol,
                ])
            if self.reference:
                writer.writerow([self.table, f"{s:.1f}", "ref", "",
                                 f"{self.reference[s]:.6g}", self.config.seed, tol])

    def render(self, fmt: str) -> str:
        if fmt == "csv":
            import io

            buf = io.StringIO()
            self.to_csv(buf)
            return buf.getvalue()
        return self.to_markdown()


def _cell_rng(seed: int, table_no: int, s: float, n: int):
    return np.random.default_rng([seed, table_no, int(round(abs(s) * 10)), n])


class _HierarchySetup:
    """Per-size shared state: mesh hierarchy, assembled levels, patch
    eigensolves, embeddings, coarse pencil, and the fine operator pencil."""

    def __init__(self, n: int, cfg: ExperimentConfig, scalar_op: bool):
        n0 = n // 2 ** (cfg.levels - 1)
        self.n = n
        self.hierarchy = build_hierarchy(n0, cfg.levels)
        self.lms = assemble_all(self.hierarchy)
        self.finest = cfg.levels - 1
        self.patch_data = precompute_patches(self.hierarchy, self.lms)
        self.prolongations = [
            assemble_prolongation(self.hierarchy, k).flux
            for k in range(cfg.levels - 1)
        ]
        self.coarse_pair = generalized_eig(
            self.lms[0].hdiv, self.lms[0].mass_v, space="V", level=0,
            dense_limit=cfg.max_dense,
        )
        fine = self.lms[-1]
        if scalar_op:
            self.op_pair = generalized_eig(
                laplacian_dual(fine), fine.mass_s, space="S", level=self.finest,
                dense_limit=cfg.max_dense,
            )
            self.dim = fine.mesh.num_triangles
        else:
            self.op_pair = generalized_eig(
                fine.hdiv, fine.mass_v, space="V", level=self.finest,
                dense_limit=cfg.max_dense,
            )
            self.dim = fine.mesh.num_edges

    @property
    def shared(self) -> dict:
        return dict(patch_data=self.patch_data, prolongations=self.prolongations,
                    coarse_pair=self.coarse_pair)


def _run_krylov_cell(setup: _HierarchySetup, s: float, cfg: ExperimentConfig) -> CellResult:
    try:
        if cfg.table == "1":
            precond = build_additive_multigrid(
                setup.hierarchy, setup.lms, s, **setup.shared
            ).apply
            op = lambda v: apply_power(setup.op_pair, s, v)
            rng = _cell_rng(cfg.seed, 1, s, setup.n)
            rhs = TaggedVector("V", setup.finest, "dual", rng.uniform(-1, 1, setup.dim))
            x0 = TaggedVector("V", setup.finest, "coefficient", rng.uniform(-1, 1, setup.dim))
        else:
            precond = build_multigrid(s, setup.hierarchy, setup.lms, **setup.shared).apply
            op = lambda v: solve_power(setup.op_pair, -s, v)
            rng = _cell_rng(cfg.seed, 3, s, setup.n)
            rhs = TaggedVector("S", setup.finest, "coefficient", rng.uniform(-1, 1, setup.dim))
            x0 = TaggedVector("S", setup.finest, "dual", rng.uniform(-1, 1, setup.dim))
        _, report = pcg(op, precond, rhs, x0, tol=cfg.tol, maxit=cfg.maxit)
        return CellResult(s, setup.dim, report.iterations, report.cond_estimate,
                          report.converged)
    except (IndefinitenessError, PencilError) as err:
        return CellResult(s, setup.dim, None, float("nan"), False, note=str(err))


def _run_krylov_table(cfg: ExperimentConfig) -> TableResult:
    cfg = validate(cfg)
    scalar_op = cfg.table == "3"
    setups = [_HierarchySetup(n, cfg, scalar_op) for n in cfg.sizes]
    result = TableResult(cfg.table, cfg, tuple(s.dim for s in setups))
    jobs = [(s, setup) for setup in setups for s in cfg.s_values]
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            futures = {
                (s, setup.dim): pool.submit(_run_krylov_cell, setup, s, cfg)
                for s, setup in jobs
            }
            cells = {key: f.result() for key, f in futures.items()}
    else:
        cells = {(s, setup.dim): _run_krylov_cell(setup, s, cfg) for s, setup in jobs}
    result.cells = dict(sorted(cells.items(), key=lambda kv: (kv[0][1], kv[0][0])))
    return result


def run_table1(cfg: ExperimentConfig | None = None) -> TableResult:
    return _run_krylov_table(cfg or default_config("1"))


def run_table3(cfg: ExperimentConfig | None = None) -> TableResult:
    return _run_krylov_table(cfg or default_config("3"))


def run_table2(cfg: ExperimentConfig | None = None) -> TableResult:
    cfg = validate(cfg or default_config("2"))
    result = TableResult("2", cfg, ())
    columns = []
    beta_sq = None
    for n in cfg.sizes:
        lm = assemble_all(build_hierarchy(n, 1))[-1]
        flux_pair = generalized_eig(lm.hdiv, lm.mass_v, space="V", level=0,
                                    dense_limit=cfg.max_dense)
        scalar_pair = generalized_eig(laplacian_dual(lm), lm.mass_s, space="S",
                                      level=0, dense_limit=cfg.max_dense)
        ctx = make_aux_spectrum_context(lm, flux_pair, scalar_pair)
        N = lm.mesh.num_triangles
        columns.append(N)
        for s in cfg.s_values:
            cond = exact_condition_number(ctx, s)
            result.cells[(s, N)] = CellResult(s, N, None, cond, True)
        beta_sq = inf_sup_constant(lm) ** 2  # keep the finest mesh's value
    result.columns = tuple(columns)
    result.reference = {s: beta_sq ** -(1.0 + s) for s in cfg.s_values}
    return result


def run_props(cfg: ExperimentConfig | None = None):
    """Dispatch the operator-inequality suite; returns the report list."""
    from . import verify

    cfg = cfg or default_config("props")
    grid = tuple(abs(s) for s in cfg.s_values)
    return verify.run_all(trials=cfg.trials, s_grid=grid, seed=cfg.seed,
                          tol=cfg.tol or 1e-9, workers=cfg.workers)
