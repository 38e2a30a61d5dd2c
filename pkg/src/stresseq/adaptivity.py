"""Adaptive solve-estimate-mark-refine driver.

Each step solves the saddle-point system, reconstructs the equilibrated
stress, and records the full estimator report; between steps a bulk
(Doerfler) criterion marks the smallest set of largest indicators and the
mesh is bisected.  Histories keep every mesh and solution so energy
errors against the finest level can be attached after the run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .elasticity import (
    FieldPair,
    Material,
    assemble_system,
    direct_stress,
    solve,
)
from .equilibration import equilibrate
from .errors import ConfigError, StressEqError
from .estimator import (
    BoundConstants,
    EstimatorReport,
    compose_ancestry,
    conservative_constants,
    energy_error,
    estimate,
    proxy_energy_error,
)
from .mesh import Mesh, refine
from .problems import Problem
from .spaces import Discretization

_ESTIMATORS = ("equilibrated", "residual")
_MODES = ("adaptive", "uniform")


@dataclass(frozen=True)
class AdaptiveConfig:
    """Parameters of one adaptive (or uniform) refinement run."""

    k: int = 1
    theta: float = 0.5
    max_steps: int = 1
    max_dofs: int | None = None
    estimator: str = "equilibrated"
    mode: str = "adaptive"
    uniform_rounds: int = 2
    constants: BoundConstants = field(default_factory=conservative_constants)

    def __post_init__(self):
        if self.k not in (1, 2):
            raise ConfigError(f"polynomial degree {self.k} not in (1, 2)")
        if not (0.0 < self.theta <= 1.0):
            raise ConfigError(f"marking fraction {self.theta} outside (0, 1]")
        if self.max_steps < 1:
            raise ConfigError(f"max_steps {self.max_steps} is below 1")
        if self.max_dofs is not None and self.max_dofs < 1:
            raise ConfigError(f"max_dofs {self.max_dofs} is below 1")
        if self.estimator not in _ESTIMATORS:
            raise ConfigError(
                f"estimator {self.estimator!r} not in {_ESTIMATORS}"
            )
        if self.mode not in _MODES:
            raise ConfigError(f"mode {self.mode!r} not in {_MODES}")


def doerfler_mark(eta: np.ndarray, theta: float) -> np.ndarray:
    """Smallest set of largest indicators with
    sum of marked eta^2 >= theta^2 * total; ties broken by element index.

    Returns ascending element indices; empty when every indicator is zero,
    every positive indicator when theta == 1.
    """
    if not (0.0 < theta <= 1.0):
        raise ConfigError(f"marking fraction {theta} outside (0, 1]")
    eta = np.asarray(eta, dtype=float)
    sq = eta**2
    total = float(np.sum(sq))
    if total == 0.0:
        return np.empty(0, dtype=np.int64)
    if theta == 1.0:
        return np.flatnonzero(eta > 0.0).astype(np.int64)
    order = np.lexsort((np.arange(len(eta)), -eta))
    csum = np.cumsum(sq[order])
    nsel = int(np.searchsorted(csum, theta**2 * total, side="left")) + 1
    nsel = min(nsel, len(eta))
    return np.sort(order[:nsel])


@dataclass
class StepRecord:
    """Everything recorded for one solve of the loop."""

    step: int
    n_dofs: int
    mesh: Mesh
    fields: FieldPair
    report: EstimatorReport
    marked: np.ndarray | None = None
    error: float | None = None

    @property
    def effectivity(self) -> float | None:
        if self.error is None or self.error == 0.0:
            return None
        return float(np.sqrt(self.report.bound)) / self.error


@dataclass
class RunHistory:
    """Ordered step records of one run; dof counts strictly increase."""

    records: list[StepRecord] = field(default_factory=list)

    def append(self, rec: StepRecord):
        if self.records and rec.n_dofs <= self.records[-1].n_dofs:
            raise StressEqError(
                f"dof count stalled at step {rec.step}: "
                f"{self.records[-1].n_dofs} -> {rec.n_dofs}"
            )
        self.records.append(rec)

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, i) -> StepRecord:
        return self.records[i]

    @property
    def meshes(self) -> list[Mesh]:
        return [r.mesh for r in self.records]

    @property
    def n_dofs(self) -> np.ndarray:
        return np.array([r.n_dofs for r in self.records])

    def totals(self, name: str) -> np.ndarray:
        """Per-step global value: eta_A/eta_B/eta_C/eta_total/bound."""
        key = {
            "eta_A": "eta_A_total",
            "eta_B": "eta_B_total",
            "eta_C": "eta_C_total",
            "eta_total": "eta_total",
            "bound": "bound",
        }[name]
        return np.array([getattr(r.report, key) for r in self.records])


def _uniform_refine_tracked(mesh: Mesh, rounds: int) -> Mesh:
    """Uniform bisection whose parent array maps back to ``mesh`` itself."""
    out = mesh
    lineage = None
    for _ in range(rounds):
        out = refine(out, np.arange(out.n_triangles))
        lineage = out.parent if lineage is None else lineage[out.parent]
    out.parent = lineage
    return out


def adaptive_loop(problem: Problem, config: AdaptiveConfig) -> RunHistory:
    """Run solve/equilibrate/estimate steps with refinement in between.

    Exactly one record per solve; the mesh is refined between steps, never
    after the last.  Any component failure is re-raised with the step
    index prefixed.
    """
    history = RunHistory()
    mesh = problem.mesh
    for step in range(config.max_steps):
        try:
            disc = Discretization(mesh, config.k)
            fields = solve(assemble_system(disc, problem.material, problem.load))
            sigma_h = direct_stress(fields, problem.material)
            delta, _, _ = equilibrate(disc, sigma_h, problem.load)
            report = estimate(
                disc,
                fields,
                sigma_h,
                delta,
                problem.load,
                problem.material,
                config.constants,
            )
            if problem.exact is not None:
                report.energy_error = energy_error(
                    fields, problem.exact, problem.material
                )
            rec = StepRecord(
                step=step,
                n_dofs=fields.u.size + fields.p.size,
                mesh=mesh,
                fields=fields,
                report=report,
                error=report.energy_error,
            )
            history.append(rec)
            if step == config.max_steps - 1:
                break
            if config.max_dofs is not None and rec.n_dofs >= config.max_dofs:
                break
            if config.mode == "uniform":
                mesh = _uniform_refine_tracked(mesh, config.uniform_rounds)
            else:
                indicator = (
                    report.eta_R
                    if config.estimator == "residual"
                    else report.eta_T
                )
                rec.marked = doerfler_mark(indicator, config.theta)
                mesh = refine(mesh, rec.marked)
        except StressEqError as exc:
            if str(exc).startswith("step "):
                raise
            raise type(exc)(f"step {step}: {exc}") from exc
    return history


def attach_reference_errors(
    history: RunHistory, material: Material, skip_last: int = 2
) -> None:
    """Fill energy errors against the finest solution of the run.

    The finest level acts as the reference; its own error and that of the
    ``skip_last - 1`` levels before it stay unset because the proxy is no
    longer trustworthy there.
    """
    if len(history) <= skip_last:
        return
    reference = history.records[-1].fields
    meshes = history.meshes
    for i, rec in enumerate(history.records[: len(history) - skip_last]):
        anc = compose_ancestry(meshes[i:])
        rec.error = proxy_energy_error(
            rec.fields, reference, material, anc
        )
        rec.report.energy_error = rec.error
