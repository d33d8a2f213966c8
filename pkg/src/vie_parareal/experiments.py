"""Convergence experiments: error versus M, versus k and versus Mc.

Every experiment point becomes one :class:`ErrorRecord`; a list of records
is written to CSV with 17 significant digits so that reading the file back
reproduces the records exactly.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Union

import numpy as np
import pandas as pd
from langsmith import traceable
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .collocation import Partition, SweepStats, linf_error, sequential_solve
from .configuration import LinearSolveConfig, PararealConfig
from .errors import NotApplicableError, SpecError
from .gauss_legendre import compute_rule
from .graph import run
from .problem import VolterraProblem, available_problems, builtin

logger = logging.getLogger(__name__)

Family = Literal["error-vs-M", "error-vs-k", "error-vs-Mc", "single"]
Mode = Literal["parareal", "sequential-fine", "sequential-coarse"]

FAMILIES = ("error-vs-M", "error-vs-k", "error-vs-Mc", "single")
MODES = ("parareal", "sequential-fine", "sequential-coarse")

# Points within this factor of the fine floor are left out of slope fits.
FLOOR_MARGIN = 100.0


class ExperimentSpec(BaseModel):
    """One convergence study.

    ``M``, ``Mc`` and ``k`` are sweep lists; families that hold a parameter
    fixed expect a single value in the corresponding list.
    """

    model_config = ConfigDict(frozen=True)

    family: Family
    problem: str
    T: float = Field(gt=0)
    N: int = Field(ge=1)
    M: List[int]
    Mc: List[int]
    k: List[int] = Field(default_factory=lambda: [0])
    iters: int = Field(default=10, ge=0)
    tol: float = Field(default=1e-12, ge=0)
    mode: Mode = "parareal"
    parallel: bool = False
    name: Optional[str] = None
    out: Optional[Path] = None
    plot: Optional[Path] = None

    @field_validator("problem")
    @classmethod
    def _known_problem(cls, value: str) -> str:
        if value not in available_problems():
            raise ValueError(f"unknown problem {value!r}; choose from {', '.join(available_problems())}")
        return value

    @field_validator("M", "Mc", "k")
    @classmethod
    def _strictly_increasing(cls, values: List[int]) -> List[int]:
        if not values:
            raise ValueError("sweep list must not be empty")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError(f"sweep list must be strictly increasing, got {values}")
        if values[0] < 0:
            raise ValueError(f"sweep values must be non-negative, got {values}")
        return values

    @model_validator(mode="after")
    def _consistent(self) -> ExperimentSpec:
        if self.family != "error-vs-M" and len(self.M) != 1:
            raise ValueError(f"{self.family} keeps M fixed; got {self.M}")
        if self.family in ("error-vs-M", "single") and len(self.Mc) != 1:
            raise ValueError(f"{self.family} keeps Mc fixed; got {self.Mc}")
        if min(self.Mc) < 1:
            raise ValueError("coarse degrees must be at least 1")
        if max(self.Mc) >= min(self.M):
            raise ValueError(f"every Mc must be below every M; got Mc={self.Mc}, M={self.M}")
        if self.family == "error-vs-Mc" and max(self.k) < 1:
            raise ValueError("error-vs-Mc needs at least one iteration count k >= 1")
        if self.family in ("error-vs-k", "error-vs-Mc") and self.mode != "parareal":
            raise ValueError(f"{self.family} only makes sense in parareal mode")
        return self

    @classmethod
    def create(cls, **values) -> ExperimentSpec:
        """Validate ``values``, raising :class:`SpecError` on any violation."""
        try:
            return cls(**values)
        except ValidationError as exc:
            raise SpecError(str(exc)) from exc

    @property
    def experiment_id(self) -> str:
        return self.name or self.family


@dataclass(frozen=True)
class ErrorRecord:
    """One row of an experiment CSV."""

    experiment: str
    problem: str
    T: float
    N: int
    M: int
    Mc: int
    k: int
    linf_error: float
    increment: float
    "Last parareal increment; 0.0 for k = 0 and for sequential solves."

    wall_ms: float
    fine_sweeps: int
    coarse_sweeps: int


CSV_COLUMNS = [f.name for f in fields(ErrorRecord)]
_COLUMN_TYPES = {f.name: {"str": str, "float": float, "int": int}[f.type] for f in fields(ErrorRecord)}


def parse_sweep(text: str) -> List[int]:
    """Parse ``"11,12,13"`` or ``"14:26:2"`` (inclusive) or a comma mix of both."""
    values: List[int] = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            pieces = [int(p) for p in part.split(":")]
            if len(pieces) == 2:
                pieces.append(1)
            if len(pieces) != 3 or pieces[2] <= 0:
                raise SpecError(f"range {part!r} must look like a:b or a:b:step with step > 0")
            start, stop, step = pieces
            values.extend(range(start, stop + 1, step))
        else:
            values.append(int(part))
    if not values:
        raise SpecError(f"empty sweep {text!r}")
    return values


PRESETS: Dict[str, Dict] = {
    "fine-degree": dict(
        family="error-vs-M", problem="sin-kernel", T=100.0, N=20,
        M=list(range(14, 27, 2)), Mc=[13], iters=20,
    ),
    "iterations": dict(
        family="error-vs-k", problem="sin-kernel", T=100.0, N=20,
        M=[25], Mc=[11, 12, 13], iters=10,
    ),
    "iterations-low-degree": dict(
        family="error-vs-k", problem="sin-kernel", T=20.0, N=20,
        M=[13], Mc=[4], iters=12,
    ),
    "coarse-degree": dict(
        family="error-vs-Mc", problem="sin-kernel", T=100.0, N=20,
        M=[25], Mc=list(range(9, 15)), k=[2, 3, 4],
    ),
    "exp-fine-degree": dict(
        family="error-vs-M", problem="exp-kernel", T=100.0, N=20,
        M=list(range(6, 23, 2)), Mc=[5], iters=20,
    ),
}


def preset(name: str, **overrides) -> ExperimentSpec:
    """Build a ready-made convergence study, optionally overridden."""
    if name not in PRESETS:
        raise SpecError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}")
    return ExperimentSpec.create(**{**PRESETS[name], "name": name, **overrides})


def _config(spec: ExperimentSpec, M: int, Mc: int, *, max_iters: int, stop_tol: float) -> PararealConfig:
    return PararealConfig(
        N=spec.N, M=M, Mc=Mc, max_iters=max_iters, stop_tol=stop_tol,
        linear=LinearSolveConfig(), parallel=spec.parallel,
    )


def _record(spec: ExperimentSpec, *, M: int, Mc: int, k: int, error: float, increment: float,
            wall_ms: float, fine_sweeps: int, coarse_sweeps: int) -> ErrorRecord:
    return ErrorRecord(
        experiment=spec.experiment_id, problem=spec.problem, T=float(spec.T), N=spec.N,
        M=M, Mc=Mc, k=k, linf_error=float(error), increment=float(increment),
        wall_ms=float(wall_ms), fine_sweeps=int(fine_sweeps), coarse_sweeps=int(coarse_sweeps),
    )


def _sequential_record(spec: ExperimentSpec, problem: VolterraProblem, partition: Partition,
                       M: int, Mc: int) -> ErrorRecord:
    degree = M if spec.mode == "sequential-fine" else Mc
    stats = SweepStats()
    start = time.perf_counter()
    solution = sequential_solve(problem, partition, compute_rule(degree), stats=stats)
    wall = (time.perf_counter() - start) * 1e3
    fine, coarse = (stats.sweeps, 0) if spec.mode == "sequential-fine" else (0, stats.sweeps)
    return _record(spec, M=M, Mc=Mc, k=0, error=linf_error(solution, problem.exact), increment=0.0,
                   wall_ms=wall, fine_sweeps=fine, coarse_sweeps=coarse)


def _iteration_records(spec: ExperimentSpec, report, M: int, Mc: int, ks: Sequence[int]) -> List[ErrorRecord]:
    records = []
    for k in ks:
        if k > report.iterations:
            logger.warning(f"M={M}, Mc={Mc}: run stopped at k={report.iterations}, no point for k={k}")
            continue
        fine, coarse = report.sweep_history[k]
        records.append(_record(
            spec, M=M, Mc=Mc, k=k, error=report.errors[k],
            increment=report.increments[k - 1] if k > 0 else 0.0,
            wall_ms=report.wall_ms_through(k), fine_sweeps=fine, coarse_sweeps=coarse,
        ))
    return records


@traceable(run_type="chain", name="vie-parareal experiment")
def run_experiment(spec: ExperimentSpec) -> List[ErrorRecord]:
    """Run every point of ``spec`` and return one record per point.

    Writes the CSV (and the SVG chart) when ``spec.out`` (``spec.plot``) is set.
    """
    problem = builtin(spec.problem, spec.T)
    if problem.exact is None:
        raise NotApplicableError(f"{spec.problem} has no exact solution to measure errors against")
    partition = Partition(N=spec.N, T=spec.T)
    records: List[ErrorRecord] = []
    logger.info(f"{spec.experiment_id}: {spec.family} on {spec.problem}, T={spec.T}, N={spec.N}")

    if spec.family in ("error-vs-M", "single"):
        Mc = spec.Mc[0]
        for M in spec.M:
            if spec.mode != "parareal":
                records.append(_sequential_record(spec, problem, partition, M, Mc))
                continue
            _, report = run(problem, partition, _config(spec, M, Mc, max_iters=spec.iters, stop_tol=spec.tol))
            ks = range(report.iterations + 1) if spec.family == "single" else [report.iterations]
            records.extend(_iteration_records(spec, report, M, Mc, ks))
    elif spec.family == "error-vs-k":
        M = spec.M[0]
        for Mc in spec.Mc:
            _, report = run(problem, partition, _config(spec, M, Mc, max_iters=spec.iters, stop_tol=0.0))
            records.extend(_iteration_records(spec, report, M, Mc, range(1, report.iterations + 1)))
    else:
        M = spec.M[0]
        ks = [k for k in spec.k if k >= 1]
        for Mc in spec.Mc:
            _, report = run(problem, partition, _config(spec, M, Mc, max_iters=max(ks), stop_tol=0.0))
            records.extend(_iteration_records(spec, report, M, Mc, ks))

    if spec.out is not None:
        write_csv(records, spec.out)
    if spec.plot is not None:
        from .plotting import plot_records

        plot_records(records, spec.family, spec.plot, title=spec.experiment_id)
    return records


def records_frame(records: Sequence[ErrorRecord]) -> pd.DataFrame:
    """Tabulate records with one column per CSV field."""
    return pd.DataFrame([asdict(r) for r in records], columns=CSV_COLUMNS)


def write_csv(records: Sequence[ErrorRecord], path: Union[str, Path]) -> Path:
    """Write ``records`` as UTF-8 CSV with LF endings and 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    records_frame(records).to_csv(
        path, index=False, float_format="%.17g", lineterminator="\n", encoding="utf-8"
    )
    logger.info(f"wrote {len(records)} records to {path}")
    return path


def read_csv(path: Union[str, Path]) -> List[ErrorRecord]:
    """Parse a file written by :func:`write_csv` back into records."""
    frame = pd.read_csv(path, float_precision="round_trip", dtype={"experiment": str, "problem": str})
    if list(frame.columns) != CSV_COLUMNS:
        raise SpecError(f"{path}: unexpected header {list(frame.columns)}")
    return [
        ErrorRecord(**{name: _COLUMN_TYPES[name](row[name]) for name in CSV_COLUMNS})
        for row in frame.to_dict(orient="records")
    ]


@dataclass(frozen=True)
class SlopeFit:
    """Straight-line fit of log10 error against Mc at one k."""

    k: int
    slope: float
    "d log10(error) / d Mc."

    c: float
    "Rate constant in error ~ exp(-c Mc (k+1))."

    points: int


def fine_floor(problem: VolterraProblem, partition: Partition, M: int) -> float:
    """Error of the sequential fine solution, the level parareal converges to."""
    return linf_error(sequential_solve(problem, partition, compute_rule(M)), problem.exact)


def fit_coarse_slopes(records: Sequence[ErrorRecord], floor: float) -> Dict[int, SlopeFit]:
    """Least-squares fit of log10(error) against Mc, separately for each k.

    Only points above ``FLOOR_MARGIN * floor`` take part. Points at coarse
    degrees below the one with the largest error are dropped too. A k with
    fewer than two remaining points is left out.
    """
    frame = records_frame(records)
    fits: Dict[int, SlopeFit] = {}
    for k, group in frame.groupby("k"):
        usable = group[group["linf_error"] >= FLOOR_MARGIN * floor].sort_values("Mc")
        if usable.empty:
            continue
        usable = usable.iloc[int(np.argmax(usable["linf_error"].to_numpy())):]
        if len(usable) < 2:
            continue
        slope, _ = np.polyfit(usable["Mc"].to_numpy(float), np.log10(usable["linf_error"].to_numpy(float)), 1)
        fits[int(k)] = SlopeFit(
            k=int(k), slope=float(slope), c=float(-slope / ((k + 1) * math.log10(math.e))),
            points=len(usable),
        )
    return fits
