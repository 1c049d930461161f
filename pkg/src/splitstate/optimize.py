"""Condition-number minimization over hidden-layer phase programs.

The first phase of every layer is pinned to zero because a common phase on
all waveguides of one layer does not change any output correlation. The
remaining ``(S - 1) * (m - 1)`` phases are searched with a multi-start
Nelder-Mead simplex at fixed, equal section lengths.
"""

from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from .circuit import TWO_PI, CircuitSpec, coupling_matrix, fold_phases
from .exceptions import DesignInfeasibleError
from .tomography import build_measurement_matrix, condition_number

logger = logging.getLogger(__name__)

SENTINEL = 1e12


@dataclass
class NelderMeadResult:
    x: np.ndarray
    fun: float
    iterations: int
    evaluations: int
    converged: bool


def nelder_mead(
    objective: Callable[[np.ndarray], float],
    x0,
    step: float = 0.5,
    xatol: float = 1e-8,
    fatol: float = 1e-10,
    max_evals: int | None = None,
    alpha: float = 1.0,
    gamma: float = 2.0,
    rho: float = 0.5,
    sigma: float = 0.5,
) -> NelderMeadResult:
    """Minimize ``objective`` with the Nelder-Mead simplex method.

    The initial simplex is ``x0`` plus ``step`` along each coordinate axis.
    Iteration stops once the simplex diameter (max-norm distance to the best
    vertex) drops below ``xatol``, the spread of objective values drops below
    ``fatol``, or ``max_evals`` evaluations (default ``2000 * dim``) are used.
    Non-finite objective values are replaced by a large finite sentinel.

    Args:
        objective: function of a 1-d float array.
        x0: starting point.
        step: edge length of the initial simplex.
        alpha, gamma, rho, sigma: reflection, expansion, contraction and
            shrink coefficients.
    """
    x0 = np.array(x0, dtype=float).ravel()
    dim = x0.size
    max_evals = 2000 * max(dim, 1) if max_evals is None else max_evals
    evals = 0

    def f(x):
        nonlocal evals
        evals += 1
        val = float(objective(x))
        return val if np.isfinite(val) else SENTINEL

    if dim == 0:
        return NelderMeadResult(x0, f(x0), 0, evals, True)

    simplex = np.vstack([x0, x0 + step * np.eye(dim)])
    values = np.array([f(x) for x in simplex])
    iterations = 0
    converged = False
    while True:
        order = np.argsort(values, kind="stable")
        simplex, values = simplex[order], values[order]
        diameter = np.max(np.abs(simplex[1:] - simplex[0]))
        if diameter < xatol or values[-1] - values[0] < fatol:
            converged = True
            break
        if evals >= max_evals:
            break
        iterations += 1

        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = centroid + alpha * (centroid - worst)
        fr = f(xr)
        if fr < values[0]:
            xe = centroid + gamma * (xr - centroid)
            fe = f(xe)
            if fe < fr:
                simplex[-1], values[-1] = xe, fe
            else:
                simplex[-1], values[-1] = xr, fr
            continue
        if fr < values[-2]:
            simplex[-1], values[-1] = xr, fr
            continue
        if fr < values[-1]:
            xc = centroid + rho * (xr - centroid)
            fc = f(xc)
            if fc <= fr:
                simplex[-1], values[-1] = xc, fc
                continue
        else:
            xc = centroid + rho * (worst - centroid)
            fc = f(xc)
            if fc < values[-1]:
                simplex[-1], values[-1] = xc, fc
                continue
        simplex[1:] = simplex[0] + sigma * (simplex[1:] - simplex[0])
        values[1:] = [f(x) for x in simplex[1:]]

    return NelderMeadResult(simplex[0].copy(), float(values[0]), iterations, evals, converged)


@dataclass(frozen=True)
class DesignProblem:
    """A phase-optimization job for one circuit geometry.

    Attributes:
        m: number of waveguides.
        n: number of photons.
        input_ports: occupied input waveguides.
        sections: number of coupled sections ``S`` (``S - 1`` phase layers).
        total_length: total length in inverse-coupling units, split equally.
        starts: number of random Nelder-Mead starts.
        seed: root seed for the starting points.
        optimize_length: also vary the total length, starting from ``total_length``.
        polish: how many of the best starts are refined by restarting
            Nelder-Mead from their optimum. A fresh simplex escapes the
            premature collapse that is common above about ten parameters.
        restart_tol: polishing of a start stops once one restart improves
            the condition number by less than this relative amount.
        max_restarts: cap on restarts per polished start.
    """

    m: int
    n: int
    input_ports: tuple[int, ...]
    sections: int
    total_length: float
    starts: int = 50
    seed: int = 0
    optimize_length: bool = False
    kappa: float = 1.0
    step: float = 0.5
    max_evals: int | None = None
    polish: int = 5
    restart_tol: float = 1e-6
    max_restarts: int = 100

    def __post_init__(self):
        object.__setattr__(self, "input_ports", tuple(int(p) for p in self.input_ports))
        if len(self.input_ports) != self.n:
            raise ValueError(f"{self.n} photons need {self.n} input ports, got {self.input_ports}")
        if self.sections < 1:
            raise ValueError("need at least one section")
        if self.starts < 1:
            raise ValueError("need at least one start")
        if self.polish < 0 or self.max_restarts < 0:
            raise ValueError("polish and max_restarts must be non-negative")

    @property
    def free_parameters(self) -> int:
        return (self.sections - 1) * (self.m - 1)

    def to_json(self) -> dict:
        doc = asdict(self)
        doc["input_ports"] = list(self.input_ports)
        return doc


def phases_from_free(free, m: int, layers: int) -> np.ndarray:
    """Insert the pinned zero phase at the start of each layer."""
    free = np.asarray(free, dtype=float).reshape(layers, m - 1)
    return np.hstack([np.zeros((layers, 1)), free])


class PhaseObjective:
    """Condition number as a function of the free phases (and optionally length)."""

    def __init__(self, problem: DesignProblem):
        self.problem = problem
        self.layers = problem.sections - 1
        c = coupling_matrix(problem.m, problem.kappa)
        self._w, self._v = np.linalg.eigh(c)
        self._ports = list(problem.input_ports)
        self._section = self._propagator(problem.total_length)

    def _propagator(self, total_length: float) -> np.ndarray:
        return (self._v * np.exp(1j * self._w * total_length / self.problem.sections)) @ self._v.T

    def unitary(self, free_phases, total_length: float | None = None) -> np.ndarray:
        w = self._section if total_length is None else self._propagator(total_length)
        u = w
        for row in phases_from_free(free_phases, self.problem.m, self.layers):
            u = w @ (np.exp(1j * row)[:, None] * u)
        return u

    def condition(self, free_phases, total_length: float | None = None) -> float:
        u = self.unitary(free_phases, total_length)
        t = build_measurement_matrix(u[:, self._ports], self.problem.n)
        return condition_number(t)

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if self.problem.optimize_length:
            if x[-1] < 0:
                return SENTINEL
            return self.condition(x[:-1], x[-1])
        return self.condition(x)


@dataclass
class StartRecord:
    start: np.ndarray
    start_value: float
    free_phases: np.ndarray
    value: float
    iterations: int
    converged: bool
    total_length: float
    restarts: int = 0


@dataclass
class DesignResult:
    """Best phase program found for a :class:`DesignProblem`.

    ``best_phases`` holds full layers (pinned zero first) folded into
    ``[0, 2 pi)``.
    """

    problem: DesignProblem
    best_phases: np.ndarray
    best_condition_number: float
    total_length: float
    iterations: int
    converged: bool
    history: list[StartRecord] = field(default_factory=list)

    def circuit(self) -> CircuitSpec:
        p = self.problem
        return CircuitSpec.uniform(p.m, self.total_length, self.best_phases, p.input_ports, p.kappa)

    def centered_phases(self) -> np.ndarray:
        """Best phases mapped into ``[-pi, pi)``, convenient for spotting zeros."""
        return np.mod(self.best_phases + np.pi, TWO_PI) - np.pi

    def to_json(self) -> dict:
        return {
            "problem": self.problem.to_json(),
            "best_condition_number": self.best_condition_number,
            "best_phases": self.best_phases.tolist(),
            "total_length": self.total_length,
            "iterations": self.iterations,
            "converged": self.converged,
            "history": [
                {
                    "start": r.start.tolist(),
                    "start_condition_number": r.start_value,
                    "free_phases": r.free_phases.tolist(),
                    "condition_number": r.value,
                    "iterations": r.iterations,
                    "converged": r.converged,
                    "total_length": r.total_length,
                    "restarts": r.restarts,
                }
                for r in self.history
            ],
        }


def _record(res, problem: DesignProblem, start, start_value, iterations, restarts) -> StartRecord:
    if problem.optimize_length:
        phases, length = res.x[:-1], float(res.x[-1])
    else:
        phases, length = res.x, problem.total_length
    return StartRecord(
        start=start,
        start_value=float(start_value),
        free_phases=fold_phases(phases),
        value=res.fun,
        iterations=iterations,
        converged=res.converged,
        total_length=length,
        restarts=restarts,
    )


def _run_start(objective: PhaseObjective, problem: DesignProblem, seed_seq) -> tuple[StartRecord, NelderMeadResult]:
    rng = np.random.default_rng(seed_seq)
    x0 = rng.uniform(0.0, TWO_PI, problem.free_parameters)
    if problem.optimize_length:
        x0 = np.append(x0, problem.total_length)
    start_value = objective(x0)
    res = nelder_mead(objective, x0, step=problem.step, max_evals=problem.max_evals)
    return _record(res, problem, x0, start_value, res.iterations, 0), res


def _polish(objective: PhaseObjective, problem: DesignProblem, record: StartRecord, res: NelderMeadResult) -> StartRecord:
    """Restart Nelder-Mead from the current optimum until it stops improving."""
    iterations = record.iterations
    restarts = 0
    while restarts < problem.max_restarts and res.fun < SENTINEL:
        nxt = nelder_mead(objective, res.x, step=problem.step, max_evals=problem.max_evals)
        restarts += 1
        iterations += nxt.iterations
        improved = res.fun - nxt.fun
        if nxt.fun < res.fun:
            res = nxt
        if improved < problem.restart_tol * abs(res.fun):
            break
    return _record(res, problem, record.start, record.start_value, iterations, restarts)


def _map(fn, items, workers: int):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def optimize_phases(problem: DesignProblem, workers: int = 1) -> DesignResult:
    """Multi-start Nelder-Mead minimization of the condition number.

    Start points are drawn uniformly from ``[0, 2 pi)`` with one spawned seed
    per start, so the result does not depend on ``workers``. The best
    ``problem.polish`` starts are then refined by repeated restarts.

    Raises:
        DesignInfeasibleError: if every start ends on a singular design.
    """
    objective = PhaseObjective(problem)
    seeds = np.random.SeedSequence(problem.seed).spawn(problem.starts)
    runs = _map(lambda s: _run_start(objective, problem, s), seeds, workers)
    ranked = sorted(
        (i for i, (rec, _) in enumerate(runs) if rec.value < SENTINEL),
        key=lambda i: (runs[i][0].value, tuple(runs[i][0].free_phases)),
    )[: problem.polish]
    polished = _map(lambda i: _polish(objective, problem, *runs[i]), ranked, workers)
    records = [rec for rec, _ in runs]
    for i, rec in zip(ranked, polished):
        records[i] = rec

    finite = [r for r in records if r.value < SENTINEL]
    if not finite:
        raise DesignInfeasibleError(f"all {problem.starts} starts gave a singular measurement matrix")
    best = min(finite, key=lambda r: (r.value, tuple(r.free_phases)))
    layers = problem.sections - 1
    phases = fold_phases(phases_from_free(best.free_phases, problem.m, layers))
    logger.debug("L=%.3f best cond %.6g", best.total_length, best.value)
    return DesignResult(
        problem=problem,
        best_phases=phases,
        best_condition_number=best.value,
        total_length=best.total_length,
        iterations=sum(r.iterations for r in records),
        converged=best.converged,
        history=records,
    )


@dataclass
class SweepRow:
    total_length: float
    condition_number: float
    phases: np.ndarray
    error: str | None = None


def length_sweep(problem: DesignProblem, lengths, workers: int = 1) -> list[SweepRow]:
    """Run :func:`optimize_phases` at each total length of ``lengths``.

    Infeasible grid points are recorded with an infinite condition number
    and an error message instead of aborting the sweep.
    """
    lengths = [float(x) for x in lengths]
    if not lengths:
        raise ValueError("length grid is empty")
    rows = []
    for length in lengths:
        try:
            res = optimize_phases(replace(problem, total_length=length), workers=workers)
            rows.append(SweepRow(length, res.best_condition_number, res.best_phases))
        except DesignInfeasibleError as exc:
            empty = np.zeros((problem.sections - 1, problem.m))
            rows.append(SweepRow(length, float("inf"), empty, str(exc)))
    return rows


def length_grid(start: float, stop: float, step: float) -> np.ndarray:
    """Inclusive grid ``start, start + step, ..., stop`` without drift."""
    count = int(round((stop - start) / step)) + 1
    return np.round(start + step * np.arange(count), 12)


def sweep_to_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    width = max((r.phases.size for r in rows), default=0)
    writer.writerow(["total_length", "condition_number", *(f"phase_{i}" for i in range(width))])
    for r in rows:
        writer.writerow([f"{r.total_length:.12g}", f"{r.condition_number:.12g}", *(f"{p:.12g}" for p in r.phases.ravel())])
    return buf.getvalue()
