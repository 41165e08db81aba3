import numpy as np
import pytest

from repeater_cutoff import Backend, CutoffSpec, EvalConfig, HardwareParams, LinkState, Strategy
from repeater_cutoff.errors import ConfigError
from repeater_cutoff.optimize import (
    NO_DELIVERY,
    Mode,
    OptimizationProblem,
    differential_evolution,
    optimize_cutoffs,
    rate_at,
    raw_key_rate,
    sensitivity_sweep,
)

HW = HardwareParams(0.3, 0.5, 0.97, 30.0)
CFG = EvalConfig(HW, 400, Backend.FAST)


def test_de_finds_integer_minimum():
    calls = []

    def f(x):
        calls.append(x.copy())
        return float(((x - np.array([3.0, -7.0])) ** 2).sum())

    res = differential_evolution(f, [(-20, 20), (-20, 20)], integer=True, seed=1, maxiter=100)
    assert res.x.tolist() == [3.0, -7.0] and res.value == 0.0
    assert all(np.all(c == np.round(c)) for c in calls)
    assert res.evaluations == len(calls)
    assert res.trace == sorted(res.trace, reverse=True)


def test_de_is_seeded():
    def f(x):
        return float(np.sin(3 * x[0]) + (x[0] - 1) ** 2)

    a = differential_evolution(f, [(-5, 5)], seed=4, maxiter=30)
    b = differential_evolution(f, [(-5, 5)], seed=4, maxiter=30)
    c = differential_evolution(f, [(-5, 5)], seed=4, maxiter=30, workers=2)
    assert a.x == b.x and a.trace == b.trace
    assert c.x == pytest.approx(a.x, abs=1e-3)


def test_problem_thresholds_and_bounds():
    uni = OptimizationProblem(levels=3)
    assert uni.dim == 1 and uni.integer
    assert uni.thresholds([4.4]) == (4, 4, 4)
    assert uni.resolved_bounds(100) == [(1.0, 100.0)]
    non = OptimizationProblem(levels=2, mode=Mode.NONUNIFORM, strategy=Strategy.FIDELITY)
    assert non.thresholds([0.5, 0.75]) == (0.5, 0.75)
    assert non.resolved_bounds(100) == [(0.0, 1.0)] * 2
    assert non.protocol((0.5, 0.75)).cutoff == CutoffSpec.fidelity(0.75)
    with pytest.raises(ConfigError):
        OptimizationProblem(levels=2, mode=Mode.NONUNIFORM, bounds=[(1, 5)]).resolved_bounds(10)
    with pytest.raises(ConfigError):
        OptimizationProblem(levels=2, bounds=[(5, 1)]).resolved_bounds(10)


def test_raw_rate_is_signed_key_rate():
    good = LinkState(np.array([0.0, 0.5, 0.5]), np.array([0.0, 1.0, 1.0]))
    assert raw_key_rate(good) == pytest.approx(1 / 1.5)
    noisy = LinkState(np.array([0.0, 1.0]), np.array([0.0, 0.5]))
    assert -1.0 <= raw_key_rate(noisy) < 0.0
    assert raw_key_rate(LinkState(np.zeros(3), np.zeros(3))) == NO_DELIVERY


def grid_optimum(problem, cfg, values):
    rates = {v: rate_at(problem, cfg, problem.thresholds([v])) for v in values}
    best = max(rates, key=rates.get)
    return best, rates[best]


def test_uniform_optimum_matches_grid_search():
    problem = OptimizationProblem(levels=2, bounds=[(1, 60)], seed=3)
    report = optimize_cutoffs(problem, CFG)
    tau, rate = grid_optimum(problem, CFG, range(1, 61))
    assert report["thresholds"] == [tau, tau]
    assert report["rate"] == pytest.approx(rate, rel=1e-12)
    assert report["rate"] > report["baseline_rate"]
    assert report["curve"] and report["trace"][-1] == pytest.approx(rate)


def test_report_is_reproducible():
    problem = OptimizationProblem(levels=2, mode=Mode.NONUNIFORM, bounds=[(1, 40)] * 2,
                                  seed=8, maxiter=15)
    assert optimize_cutoffs(problem, CFG) == optimize_cutoffs(problem, CFG)


def test_impossible_fidelity_thresholds_score_no_delivery():
    problem = OptimizationProblem(levels=1, strategy=Strategy.FIDELITY, bounds=[(0.98, 1.0)],
                                  maxiter=3, popsize=4)
    cfg = CFG.with_(backend=Backend.FOURIER)
    report = optimize_cutoffs(problem, cfg)
    assert report["rate"] == 0.0 and report["no_key"]
    assert rate_at(problem, cfg, [0.99]) == 0.0


def test_sensitivity_sweep_rows():
    problem = OptimizationProblem(levels=1, bounds=[(1, 40)], seed=0, maxiter=20)
    out = sensitivity_sweep(HW, "t_coh", [15.0, 30.0], CFG, problem)
    base_row = out["rows"][1]
    assert base_row["thresholds"] == out["baseline_thresholds"]
    assert base_row["ratio"] == pytest.approx(0.0, abs=1e-12)
    assert out["rows"][0]["ratio"] >= -1e-12
    noisy = sensitivity_sweep(HW, "w0", [0.6], CFG, problem)
    assert noisy["rows"][0]["flagged"] and noisy["rows"][0]["ratio"] is None
    with pytest.raises(ConfigError):
        sensitivity_sweep(HW, "ttr", [1], CFG, problem)
