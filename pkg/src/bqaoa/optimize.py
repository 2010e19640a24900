"""Variational parameter search and the strategy-comparison benchmark.

Parameters are trained on a noiseless exact-expectation evaluator (a coarse
deterministic grid seeds Nelder-Mead refinements), then frozen for the
noisy evaluation at the requested shot count.  Within a benchmark, the same
chain is reused for every opt level and depth of a strategy family.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from . import qaoa, sim
from .device import DeviceModel
from .errors import ConfigError, NoChainError, NoFeasibleOutcomeError
from .lower import LoweredCircuit, OptLevel, lower_circuit
from .mapper import ChainSelection, Strategy, fidelity_score, select
from .qaoa import IsingProblem, MetricsResult, ParamVector, ProblemFile

Evaluator = Callable[[ParamVector], MetricsResult]


@dataclass(frozen=True)
class OptimizerConfig:
    """Budget and grid resolution of the parameter search."""

    max_evals: int = 20000
    initial_grid: int = 8
    seed: int = 0
    tolerance: float = 1e-4
    refine_starts: int = 2


@dataclass(frozen=True)
class OptimizationResult:
    params: ParamVector
    ar: float
    trace: tuple[tuple[tuple[float, ...], float], ...]
    evaluations: int
    budget_exhausted: bool


def _to_params(flat: Sequence[float], p: int) -> ParamVector:
    return ParamVector(gammas=tuple(flat[:p]), betas=tuple(flat[p:]))


def exact_expectation_evaluator(prob: IsingProblem, sense: str) -> Evaluator:
    """Noiseless evaluator: exact outcome distribution of the built circuit."""

    def evaluate(params: ParamVector) -> MetricsResult:
        circ = qaoa.build_swap_network(prob, params)
        return qaoa.metrics(prob, sim.ideal_distribution(circ), sense)

    return evaluate


def optimize_params(
    prob: IsingProblem,
    p: int,
    evaluator: Evaluator,
    cfg: OptimizerConfig,
    warm_starts: Sequence[ParamVector] = (),
) -> OptimizationResult:
    """Maximize AR over [0, pi)^p x [0, pi/2)^p, grid then Nelder-Mead.

    warm_starts are extra seed points (e.g. a lower depth's optimum padded
    with zero layers).  Runs deterministically; if the evaluation budget is
    exhausted the best point so far is returned, flagged.
    """
    if p < 1:
        raise ConfigError(f"p must be >= 1, got {p}")
    trace: list[tuple[tuple[float, ...], float]] = []
    evaluations = 0
    exhausted = False

    def objective(flat: Sequence[float]) -> float:
        nonlocal evaluations
        evaluations += 1
        result = evaluator(_to_params(flat, p))
        value = result.ar if result.ar is not None else -np.inf
        trace.append((tuple(float(v) for v in flat), value))
        return -value

    grid = max(1, cfg.initial_grid)
    gamma_axis = [np.pi * i / grid for i in range(grid)]
    beta_axis = [np.pi / 2 * i / grid for i in range(grid)]
    mesh = np.meshgrid(*([gamma_axis] * p + [beta_axis] * p), indexing="ij")
    grid_points = np.stack([m.ravel() for m in mesh], axis=1)
    seed_points = [tuple(w.gammas) + tuple(w.betas) for w in warm_starts]
    seed_points.extend(tuple(float(v) for v in point) for point in grid_points)
    for point in seed_points:
        if evaluations >= cfg.max_evals:
            exhausted = True
            break
        objective(point)

    scored = sorted(
        ((value, flat) for flat, value in trace), key=lambda t: -t[0]
    )
    seen: set[tuple[float, ...]] = set()
    refine_from: list[tuple[float, ...]] = []
    for value, flat in scored:
        if not np.isfinite(value):
            continue  # nothing to refine (e.g. AR undefined everywhere)
        if flat not in seen:
            seen.add(flat)
            refine_from.append(flat)
        if len(refine_from) >= cfg.refine_starts:
            break

    for start in refine_from:
        remaining = cfg.max_evals - evaluations
        if remaining <= 1:
            exhausted = True
            break
        minimize(
            objective,
            np.array(start),
            method="Nelder-Mead",
            options={
                "maxfev": remaining,
                "xatol": 1e-4,
                "fatol": cfg.tolerance / 10,
            },
        )

    best_flat, best_value = max(trace, key=lambda t: t[1])
    return OptimizationResult(
        params=_to_params(best_flat, p),
        ar=best_value,
        trace=tuple(trace),
        evaluations=evaluations,
        budget_exhausted=exhausted,
    )


def cell_seed(master_seed: int, *key_parts) -> int:
    """Stable per-cell RNG seed derived from the master seed and cell key."""
    text = "|".join(str(part) for part in (master_seed,) + key_parts)
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "big")


def evaluate_noisy(
    dev: DeviceModel,
    chain: Sequence[int],
    prob: IsingProblem,
    sense: str,
    params: ParamVector,
    opt: OptLevel,
    shots: int,
    seed: int,
    noise_scale: float,
    mitigated: bool = True,
) -> tuple[MetricsResult, LoweredCircuit]:
    """Noisy evaluation of frozen parameters on a fixed chain.

    Pipeline: build, lower, density-matrix evolution, sampling through the
    scaled confusion matrices, readout mitigation, budget post-selection.
    """
    circ = qaoa.build_swap_network(prob, params)
    lowered = lower_circuit(circ, tuple(chain), dev, opt)
    noise = sim.NoiseModel.from_device(dev, lowered.chain, scale=noise_scale)
    rho = sim.evolve(lowered, noise)
    confusions = noise.confusion_matrices()
    counts = sim.sample(rho, shots, confusions, seed)
    if mitigated:
        _, dist = sim.mitigate_readout(counts, confusions)
    else:
        dist = {k: float(v) for k, v in counts.items()}
    logical = sim.remap_counts(dist, lowered.measure_map())
    return qaoa.metrics(prob, logical, sense), lowered


@dataclass(frozen=True)
class BenchmarkRun:
    """One benchmark cell: a (strategy, opt level, depth) combination."""

    problem: str
    strategy: Strategy
    opt_level: OptLevel
    p: int
    chain: tuple[int, ...]
    gammas: tuple[float, ...]
    betas: tuple[float, ...]
    ar: float | None
    sp: float | None
    duration_ns: float | None
    cx_count: int | None
    fidelity_score: float | None
    shots: int
    seed: int
    optimizer: str = "grid+nelder-mead"
    reason: str = ""


CSV_COLUMNS = [
    "problem",
    "strategy",
    "opt_level",
    "p",
    "chain",
    "gammas",
    "betas",
    "ar",
    "sp",
    "duration_ns",
    "cx_count",
    "fidelity_score",
    "shots",
    "seed",
    "optimizer",
    "reason",
]

#: template angles used only to rank chain durations during selection
SELECTION_TEMPLATE_ANGLES = (np.pi / 2, np.pi / 2)


def selection_opt_level(strategy: Strategy) -> OptLevel:
    """Bipotent ranks chains by pulse-optimized duration; others by fidelity."""
    return OptLevel.ZZ_SWAP_OPT if strategy is Strategy.BIPOTENT else OptLevel.DEFAULT


def select_chain_for(
    dev: DeviceModel, prob: IsingProblem, strategy: Strategy
) -> ChainSelection:
    template = qaoa.build_swap_network(
        prob, ParamVector((SELECTION_TEMPLATE_ANGLES[0],), (SELECTION_TEMPLATE_ANGLES[1],))
    )
    return select(dev, prob.n, strategy, template, selection_opt_level(strategy))


def optimize_depth_sweep(
    prob: IsingProblem, sense: str, p_values: Sequence[int], cfg: OptimizerConfig
) -> dict[int, OptimizationResult]:
    """Noiseless optimum per depth, warm-starting each depth from the last."""
    evaluator = exact_expectation_evaluator(prob, sense)
    optimized: dict[int, OptimizationResult] = {}
    previous: OptimizationResult | None = None
    for p in sorted(set(p_values)):
        warm = []
        if previous is not None:
            warm.append(
                ParamVector(
                    previous.params.gammas + (0.0,) * (p - previous.params.p),
                    previous.params.betas + (0.0,) * (p - previous.params.p),
                )
            )
        level_cfg = OptimizerConfig(
            max_evals=cfg.max_evals,
            initial_grid=max(2, cfg.initial_grid // p),
            seed=cfg.seed,
            tolerance=cfg.tolerance,
            refine_starts=cfg.refine_starts,
        )
        result = optimize_params(prob, p, evaluator, level_cfg, warm_starts=warm)
        optimized[p] = result
        previous = result
    return optimized


def _run_cell(
    dev: DeviceModel,
    problem: ProblemFile,
    strategy: Strategy,
    opt: OptLevel,
    p: int,
    chain: tuple[int, ...],
    infeasible: str | None,
    params: ParamVector,
    shots: int,
    seed: int,
    noise_scale: float,
) -> BenchmarkRun:
    base = dict(
        problem=problem.label,
        strategy=strategy,
        opt_level=opt,
        p=p,
        chain=chain,
        gammas=params.gammas,
        betas=params.betas,
        shots=shots,
        seed=seed,
    )
    if infeasible is not None:
        return BenchmarkRun(
            **base | {"chain": ()},
            ar=None,
            sp=None,
            duration_ns=None,
            cx_count=None,
            fidelity_score=None,
            reason=infeasible,
        )
    try:
        result, lowered = evaluate_noisy(
            dev, chain, problem.ising, problem.sense, params, opt, shots, seed,
            noise_scale,
        )
    except NoFeasibleOutcomeError as exc:
        return BenchmarkRun(
            **base,
            ar=None,
            sp=None,
            duration_ns=None,
            cx_count=None,
            fidelity_score=None,
            reason=str(exc),
        )
    return BenchmarkRun(
        **base,
        ar=result.ar,
        sp=result.sp,
        duration_ns=lowered.total_duration_ns,
        cx_count=lowered.cx_count,
        fidelity_score=fidelity_score(dev, chain, lowered),
    )


def run_benchmark(
    dev: DeviceModel,
    problem: ProblemFile,
    strategies: Sequence[Strategy],
    opt_levels: Sequence[OptLevel],
    p_values: Sequence[int],
    cfg: OptimizerConfig,
    shots: int,
    noise_scale: float = 1.0,
    jobs: int = 1,
) -> list[BenchmarkRun]:
    """Benchmark sweep over strategies, opt levels and depths.

    Parameters are optimized noiselessly once per depth (warm-started from
    the previous depth) and reused across every strategy and opt level;
    each cell then gets one seeded noisy evaluation.  Infeasible strategy
    cells are recorded with a reason rather than aborting the run.  Cells
    are independent, so jobs > 1 fans them out; results reduce into a
    deterministic order either way.
    """
    if not strategies or not opt_levels or not p_values:
        raise ConfigError("strategies, opt levels and p range must be non-empty")
    if any(p < 1 for p in p_values):
        raise ConfigError("p values must be >= 1")
    optimized = optimize_depth_sweep(problem.ising, problem.sense, p_values, cfg)

    cells = []
    for strategy in strategies:
        try:
            selection = select_chain_for(dev, problem.ising, strategy)
            chain: tuple[int, ...] = selection.chain
            infeasible = None
        except NoChainError as exc:
            chain = ()
            infeasible = str(exc)
        for opt in opt_levels:
            for p in p_values:
                seed = cell_seed(
                    cfg.seed, problem.label, strategy.value, opt.value, p
                )
                cells.append(
                    (strategy, opt, p, chain, infeasible, optimized[p].params, seed)
                )

    def run(cell) -> BenchmarkRun:
        strategy, opt, p, chain, infeasible, params, seed = cell
        return _run_cell(
            dev, problem, strategy, opt, p, chain, infeasible, params,
            shots, seed, noise_scale,
        )

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run, cells))
    else:
        rows = [run(cell) for cell in cells]
    rows.sort(key=lambda r: (r.problem, r.strategy.value, r.opt_level.value, r.p))
    return rows


def _format_value(value) -> str:
    if value is None:
        return "NA"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def runs_to_csv(rows: Sequence[BenchmarkRun]) -> str:
    """Deterministic CSV: byte-identical for identical inputs and seeds."""
    out = io.StringIO()
    out.write(",".join(CSV_COLUMNS) + "\n")
    for row in rows:
        values = [
            row.problem,
            row.strategy.value,
            row.opt_level.value,
            str(row.p),
            "-".join(str(q) for q in row.chain),
            ";".join(repr(g) for g in row.gammas),
            ";".join(repr(b) for b in row.betas),
            _format_value(row.ar),
            _format_value(row.sp),
            _format_value(row.duration_ns),
            _format_value(row.cx_count),
            _format_value(row.fidelity_score),
            str(row.shots),
            str(row.seed),
            row.optimizer,
            row.reason,
        ]
        out.write(",".join(values) + "\n")
    return out.getvalue()
