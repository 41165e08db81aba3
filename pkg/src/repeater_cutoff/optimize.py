"""Cut-off threshold optimization by differential evolution, and parameter sweeps."""

from __future__ import annotations

import enum
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.optimize

from .errors import ConfigError, NoKeyError, NumericalSingularityError
from .evaluator import eval_protocol
from .keyrate import SecretKeyReport, binary_entropy, secret_key_rate, truncated_averages
from .protocol import CutoffSpec, HardwareParams, Strategy, build_nested_chain

__all__ = [
    "DEResult",
    "Mode",
    "NO_DELIVERY",
    "OptimizationProblem",
    "differential_evolution",
    "optimize_cutoffs",
    "rate_at",
    "raw_key_rate",
    "sensitivity_sweep",
]


#: Objective value of candidates that never deliver a link; the raw key rate
#: of any delivering candidate is at least -1.
NO_DELIVERY = -2.0


class Mode(str, enum.Enum):
    UNIFORM = "uniform"
    NONUNIFORM = "nonuniform"


@dataclass(frozen=True)
class OptimizationProblem:
    """Search space for the cut-offs of a nested swap chain.

    ``bounds`` holds one ``(low, high)`` pair per dimension (one dimension
    in UNIFORM mode, ``levels`` otherwise); ``None`` selects
    ``[1, ttr]`` for time cut-offs and ``[0, 1]`` for Werner thresholds.
    ``popsize`` is per dimension, as in SciPy.
    """

    levels: int
    mode: Mode = Mode.UNIFORM
    strategy: Strategy = Strategy.DIF_TIME
    bounds: tuple | None = None
    popsize: int = 15
    mutation: tuple = (0.5, 1.0)
    recombination: float = 0.7
    maxiter: int = 200
    tol: float = 1e-8
    seed: int | None = 0
    workers: int = 1

    @property
    def dim(self):
        return 1 if Mode(self.mode) is Mode.UNIFORM else self.levels

    @property
    def integer(self):
        return Strategy(self.strategy) is not Strategy.FIDELITY

    def resolved_bounds(self, ttr):
        if self.bounds is not None:
            bounds = [tuple(map(float, b)) for b in self.bounds]
        elif self.integer:
            bounds = [(1.0, float(ttr))] * self.dim
        else:
            bounds = [(0.0, 1.0)] * self.dim
        if len(bounds) != self.dim:
            raise ConfigError(f"{self.dim} bound pairs expected, got {len(bounds)}")
        for low, high in bounds:
            if not low <= high:
                raise ConfigError(f"empty bounds ({low}, {high})")
        return bounds

    def thresholds(self, x):
        """Candidate vector to per-level thresholds (bottom level first)."""
        vals = [float(v) for v in np.atleast_1d(x)]
        if self.integer:
            vals = [int(round(v)) for v in vals]
        if self.dim == 1:
            vals = vals * self.levels
        return tuple(vals)

    def protocol(self, thresholds):
        make = {
            Strategy.DIF_TIME: CutoffSpec.dif_time,
            Strategy.MAX_TIME: CutoffSpec.max_time,
            Strategy.FIDELITY: CutoffSpec.fidelity,
        }[Strategy(self.strategy)]
        return build_nested_chain(self.levels, [make(v) for v in thresholds])


@dataclass
class DEResult:
    x: np.ndarray
    value: float
    trace: list = field(default_factory=list)
    converged: bool = True
    message: str = ""
    evaluations: int = 0


def differential_evolution(objective, bounds, *, integer=False, popsize=15, mutation=(0.5, 1.0),
                           recombination=0.7, maxiter=200, tol=1e-8, seed=None, workers=1):
    """Minimize ``objective`` with DE/rand/1/bin (SciPy implementation).

    Candidates stay continuous inside the population; when ``integer`` is
    true they are rounded before every call to ``objective``. ``trace`` holds
    the best value after each generation. ``converged`` is false when the
    generation budget ran out first; the best candidate found is returned
    either way.
    """
    integer = np.broadcast_to(np.asarray(integer, dtype=bool), (len(bounds),))

    def rounded(x):
        return np.where(integer, np.round(x), x)

    trace = []

    def callback(intermediate_result):
        trace.append(float(intermediate_result.fun))

    def fun(x):
        return objective(rounded(x))

    kwargs = {}
    if workers > 1:
        pool = ThreadPoolExecutor(workers)
        kwargs = {"workers": pool.map, "updating": "deferred"}
    try:
        res = scipy.optimize.differential_evolution(
            fun, bounds, strategy="rand1bin", popsize=popsize, mutation=mutation,
            recombination=recombination, maxiter=maxiter, tol=tol, rng=seed,
            polish=False, init="latinhypercube", callback=callback, **kwargs)
    finally:
        if workers > 1:
            pool.shutdown()
    x = rounded(res.x)
    return DEResult(x=x, value=float(res.fun), trace=trace, converged=bool(res.success),
                    message=str(res.message), evaluations=int(res.nfev))


def raw_key_rate(link):
    """Unclipped ``(1 - 2 h(e)) / T_bar``: the key rate, negative when no key.

    Below the key threshold it still ranks candidates by how far they are
    from producing key, which keeps the optimizer off flat zero plateaus.
    Links that are never delivered score :data:`NO_DELIVERY`.
    """
    try:
        t_bar, w_bar = truncated_averages(link)
    except NoKeyError:
        return NO_DELIVERY
    return (1.0 - 2.0 * binary_entropy((1.0 - w_bar) / 2.0)) / t_bar


def _evaluate(root, cfg):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return eval_protocol(root, cfg, warn=False)


def _raw_rate(root, cfg):
    try:
        return raw_key_rate(_evaluate(root, cfg))
    except NumericalSingularityError:
        return NO_DELIVERY


def _report(root, cfg):
    try:
        return secret_key_rate(_evaluate(root, cfg))
    except (NumericalSingularityError, NoKeyError):
        return SecretKeyReport(math.inf, 0.0, 0.25, 0.0, 0.0, 0.0)


def optimize_cutoffs(problem, cfg):
    """Maximize the secret-key rate of ``problem``'s chain over its cut-offs.

    Returns a JSON-ready report: optimal thresholds and rate, the no-cut-off
    baseline, every distinct candidate evaluated (``curve``), the
    per-generation best rates and convergence information.
    """
    bounds = problem.resolved_bounds(cfg.ttr)
    cache = {}

    def objective(x):
        key = problem.thresholds(x)
        if key not in cache:
            cache[key] = _raw_rate(problem.protocol(key), cfg)
        return -cache[key]

    result = differential_evolution(
        objective, bounds, integer=problem.integer, popsize=problem.popsize,
        mutation=problem.mutation, recombination=problem.recombination,
        maxiter=problem.maxiter, tol=problem.tol, seed=problem.seed, workers=problem.workers)
    best = problem.thresholds(result.x)
    report = _report(problem.protocol(best), cfg)
    baseline = _report(build_nested_chain(problem.levels), cfg)
    curve = sorted((list(k), max(0.0, v)) for k, v in cache.items())
    return {
        "levels": problem.levels,
        "mode": Mode(problem.mode).value,
        "strategy": Strategy(problem.strategy).value,
        "seed": problem.seed,
        "bounds": [list(b) for b in bounds],
        "thresholds": list(best),
        "rate": report.rate,
        "key": report.to_dict(),
        "no_key": report.rate == 0.0,
        "baseline_rate": baseline.rate,
        "baseline": baseline.to_dict(),
        "curve": [{"thresholds": k, "rate": v} for k, v in curve],
        "trace": [max(0.0, -v) for v in result.trace],
        "converged": result.converged,
        "message": result.message,
        "evaluations": result.evaluations,
    }


def rate_at(problem, cfg, thresholds):
    """Secret-key rate of ``problem``'s chain with the given per-level thresholds."""
    return _report(problem.protocol(tuple(thresholds)), cfg).rate


def sensitivity_sweep(baseline, axis, values, cfg, problem):
    """Re-optimize the cut-offs while one hardware parameter is varied.

    For every value the row holds the re-optimized thresholds and rate
    ``R(tau_target)``, the rate ``R(tau_baseline)`` of the thresholds that
    are optimal for ``baseline``, and the relative difference
    ``(R(tau_target) - R(tau_baseline)) / R(tau_target)``; it is ``None``
    (row flagged) when ``R(tau_target)`` is zero.
    """
    if axis not in ("p_gen", "p_swap", "w0", "t_coh"):
        raise ConfigError(f"unknown sweep axis {axis!r}")
    if not isinstance(baseline, HardwareParams):
        raise TypeError("baseline must be HardwareParams")
    base = optimize_cutoffs(problem, cfg.with_(hardware=baseline))
    rows = []
    for value in values:
        hw = replace(baseline, **{axis: value})
        if hw == baseline:
            target = base
        else:
            target = optimize_cutoffs(problem, cfg.with_(hardware=hw))
        r_target = target["rate"]
        r_base = rate_at(problem, cfg.with_(hardware=hw), base["thresholds"])
        ratio = (r_target - r_base) / r_target if r_target > 0.0 else None
        rows.append({
            "axis": axis,
            "value": value,
            "thresholds": target["thresholds"],
            "rate_target": r_target,
            "rate_baseline": r_base,
            "ratio": ratio,
            "flagged": ratio is None,
        })
    return {"baseline_thresholds": base["thresholds"], "baseline_rate": base["rate"], "rows": rows}
