"""Monte Carlo sampler of (delivery time, Werner parameter) pairs.

Protocol trees are sampled by literally running them: leaves draw geometric
generation times, internal nodes draw both children until the cut-off passes
and the unit succeeds. Used to validate the deterministic evaluator.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba as nb
import numpy as np

from .errors import ConfigError, RepeaterError
from .protocol import Kind, Strategy, validate_protocol

__all__ = [
    "CHUNK_SIZE",
    "McEstimate",
    "McSample",
    "STEP_CAP",
    "StepCapExceeded",
    "compare_to_exact",
    "estimate_distribution",
    "make_rng",
    "sample_batch",
    "sample_protocol",
]

#: Elapsed time after which a single sample is declared pathological.
STEP_CAP = 10**9

#: Samples per independent RNG substream; fixes the stream layout so results
#: do not depend on the number of workers.
CHUNK_SIZE = 1 << 15


class StepCapExceeded(RepeaterError):
    """A sample ran longer than the configured step cap."""


def make_rng(seed):
    """Counter-based Philox generator seeded through a SeedSequence."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class McSample:
    t: int
    w: float


def _leaf_params(node, hw):
    p = hw.p_gen if node.p_gen is None else node.p_gen
    w0 = hw.w0 if node.w0 is None else node.w0
    return p, w0


def _geometric(p, u):
    """Inverse-CDF geometric draw on {1, 2, ...} from ``u`` in (0, 1]."""
    if p >= 1.0:
        return np.ones(np.shape(u), dtype=np.int64)
    t = np.ceil(np.log(u) / math.log1p(-p))
    return np.maximum(t, 1).astype(np.int64)


def _decayed(tA, wA, tB, wB, t_coh):
    """Werner parameters at retrieval: the earlier link waited ``|tA - tB|``."""
    if t_coh == math.inf:
        return wA, wB
    d = np.abs(tA - tB)
    fA = np.where(tA < tB, np.exp(-d / t_coh), 1.0)
    fB = np.where(tB < tA, np.exp(-d / t_coh), 1.0)
    return wA * fA, wB * fB


def _cutoff(spec, tA, tB, u, v):
    """``(passed, failure time)`` of a cut-off on the primed inputs."""
    t = np.maximum(tA, tB)
    if spec is None:
        return np.ones(np.shape(t), dtype=bool), t
    if spec.strategy is Strategy.DIF_TIME:
        return np.abs(tA - tB) <= spec.tau, np.minimum(tA, tB) + _int(spec.tau)
    if spec.strategy is Strategy.MAX_TIME:
        return t <= spec.tau, np.full(np.shape(t), _int(spec.tau))
    return (u >= spec.w_cut) & (v >= spec.w_cut), t


def _int(tau):
    return int(min(tau, STEP_CAP + 1))


def _unit(kind, p_swap, u, v, rand):
    """Success flags and output Werner parameters of a SWAP/DIST attempt."""
    if kind is Kind.SWAP:
        return rand < p_swap, u * v
    p = 0.5 * (1.0 + u * v)
    return rand < p, (u + v + 4.0 * u * v) / (6.0 * p)


def sample_protocol(root, cfg, rng, step_cap=STEP_CAP):
    """Draw one delivery of ``root``; a plain recursive reference sampler."""
    hw = cfg.hardware

    def draw(node):
        if node.kind is Kind.GEN:
            p, w0 = _leaf_params(node, hw)
            return int(_geometric(p, 1.0 - rng.random())), w0
        elapsed = 0
        while True:
            tA, wA = draw(node.left)
            tB, wB = draw(node.right)
            u, v = _decayed(tA, wA, tB, wB, hw.t_coh)
            passed, t_fail = _cutoff(node.cutoff, tA, tB, u, v)
            if not passed:
                elapsed += int(t_fail)
            else:
                ok, w = _unit(node.kind, hw.p_swap, float(u), float(v), rng.random())
                if ok:
                    return elapsed + max(tA, tB), float(w)
                elapsed += max(tA, tB)
            if elapsed > step_cap:
                raise StepCapExceeded(f"sample exceeded {step_cap} time steps")

    t, w = draw(root)
    return McSample(t, min(max(w, 0.0), 1.0))


_KIND = {Kind.GEN: 0, Kind.SWAP: 1, Kind.DIST: 2}
_STRAT = {None: 0, Strategy.DIF_TIME: 1, Strategy.MAX_TIME: 2, Strategy.FIDELITY: 3}


def _node_table(root, hw):
    """Flatten a tree into parallel arrays (children before parents)."""
    nodes = list(root.iter_nodes())
    index = {}
    for node in nodes:
        index.setdefault(id(node), len(index))
    size = len(index)
    kind = np.zeros(size, dtype=np.int64)
    left = np.full(size, -1, dtype=np.int64)
    right = np.full(size, -1, dtype=np.int64)
    strat = np.zeros(size, dtype=np.int64)
    tau = np.zeros(size, dtype=np.int64)
    w_cut = np.zeros(size)
    p_gen = np.zeros(size)
    w0 = np.zeros(size)
    for node in nodes:
        i = index[id(node)]
        kind[i] = _KIND[node.kind]
        if node.kind is Kind.GEN:
            p_gen[i], w0[i] = _leaf_params(node, hw)
            continue
        left[i], right[i] = index[id(node.left)], index[id(node.right)]
        spec = node.cutoff
        strat[i] = _STRAT[None if spec is None else spec.strategy]
        if spec is not None and spec.strategy is not Strategy.FIDELITY:
            tau[i] = _int(spec.tau)
        if spec is not None and spec.strategy is Strategy.FIDELITY:
            w_cut[i] = spec.w_cut
    return index[id(root)], (kind, left, right, strat, tau, w_cut, p_gen, w0)


@nb.njit
def _draw(i, kind, left, right, strat, tau, w_cut, p_gen, w0, p_swap, t_coh, cap, rng):
    """One delivery of node ``i``; ``t = -1`` signals that ``cap`` was exceeded."""
    if kind[i] == 0:
        p = p_gen[i]
        if p >= 1.0:
            return 1, w0[i]
        u = 1.0 - rng.random()
        t = int(math.ceil(math.log(u) / math.log1p(-p)))
        return max(t, 1), w0[i]
    elapsed = 0
    while True:
        tA, wA = _draw(left[i], kind, left, right, strat, tau, w_cut, p_gen, w0,
                       p_swap, t_coh, cap, rng)
        if tA < 0:
            return -1, 0.0
        tB, wB = _draw(right[i], kind, left, right, strat, tau, w_cut, p_gen, w0,
                       p_swap, t_coh, cap, rng)
        if tB < 0:
            return -1, 0.0
        d = abs(tA - tB)
        f = math.exp(-d / t_coh)
        u = wA * f if tA < tB else wA
        v = wB * f if tB < tA else wB
        t = max(tA, tB)
        s = strat[i]
        if s == 1:
            passed = d <= tau[i]
            t_fail = min(tA, tB) + tau[i]
        elif s == 2:
            passed = t <= tau[i]
            t_fail = tau[i]
        elif s == 3:
            passed = u >= w_cut[i] and v >= w_cut[i]
            t_fail = t
        else:
            passed = True
            t_fail = t
        if passed:
            if kind[i] == 1:
                p = p_swap
                w = u * v
            else:
                p = 0.5 * (1.0 + u * v)
                w = (u + v + 4.0 * u * v) / (6.0 * p)
            if rng.random() < p:
                return elapsed + t, w
            elapsed += t
        else:
            elapsed += t_fail
        if elapsed > cap:
            return -1, 0.0


@nb.njit
def _draw_many(size, root, table, p_swap, t_coh, cap, rng):
    kind, left, right, strat, tau, w_cut, p_gen, w0 = table
    ts = np.empty(size, dtype=np.int64)
    ws = np.empty(size)
    for k in range(size):
        t, w = _draw(root, kind, left, right, strat, tau, w_cut, p_gen, w0,
                     p_swap, t_coh, cap, rng)
        ts[k] = t
        ws[k] = w
    return ts, ws


def sample_batch(root, cfg, size, rng, step_cap=STEP_CAP):
    """Draw ``size`` independent deliveries; returns ``(t, w)`` arrays.

    Compiled counterpart of :func:`sample_protocol`, consuming ``rng`` in the
    same order.
    """
    hw = cfg.hardware
    i, table = _node_table(root, hw)
    ts, ws = _draw_many(int(size), i, table, float(hw.p_swap), float(hw.t_coh),
                        int(step_cap), rng)
    if size and ts.min() < 0:
        raise StepCapExceeded(f"sample exceeded {step_cap} time steps")
    return ts, np.clip(ws, 0.0, 1.0)


@dataclass(eq=False)
class McEstimate:
    """Histogram of sampled delivery times with per-time Werner statistics.

    ``counts[t]`` for t = 0..ttr (``counts[0]`` is always 0); samples with
    t > ttr go to ``overflow``. ``werner_sum``/``werner_sq_sum`` accumulate
    w and w**2 per time bin.
    """

    counts: np.ndarray
    werner_sum: np.ndarray
    werner_sq_sum: np.ndarray
    overflow: int
    n: int
    seed: int | None
    ttr: int

    @classmethod
    def empty(cls, ttr, seed=None):
        return cls(np.zeros(ttr + 1, dtype=np.int64), np.zeros(ttr + 1), np.zeros(ttr + 1),
                   0, 0, seed, int(ttr))

    def add(self, t, w):
        t = np.asarray(t, dtype=np.int64)
        w = np.asarray(w, dtype=np.float64)
        inside = t <= self.ttr
        self.counts += np.bincount(t[inside], minlength=self.ttr + 1)
        self.werner_sum += np.bincount(t[inside], weights=w[inside], minlength=self.ttr + 1)
        self.werner_sq_sum += np.bincount(t[inside], weights=w[inside] ** 2,
                                          minlength=self.ttr + 1)
        self.overflow += int((~inside).sum())
        self.n += int(t.size)
        return self

    def merge(self, other):
        if other.ttr != self.ttr:
            raise ValueError("cannot merge estimates with different ttr")
        self.counts += other.counts
        self.werner_sum += other.werner_sum
        self.werner_sq_sum += other.werner_sq_sum
        self.overflow += other.overflow
        self.n += other.n
        return self

    @property
    def pmf(self):
        return self.counts / self.n

    @property
    def cdf(self):
        return np.cumsum(self.counts) / self.n

    @property
    def werner_mean(self):
        """Average sampled Werner parameter per time bin (NaN for empty bins)."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.counts > 0, self.werner_sum / self.counts, np.nan)

    def to_dict(self):
        return {
            "n": self.n,
            "seed": self.seed,
            "ttr": self.ttr,
            "overflow": self.overflow,
            "counts": self.counts.tolist(),
            "werner_sum": self.werner_sum.tolist(),
            "werner_sq_sum": self.werner_sq_sum.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        try:
            est = cls(np.asarray(d["counts"], dtype=np.int64),
                      np.asarray(d["werner_sum"], dtype=np.float64),
                      np.asarray(d["werner_sq_sum"], dtype=np.float64),
                      int(d["overflow"]), int(d["n"]), d.get("seed"), int(d["ttr"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed Monte Carlo estimate: {exc}") from None
        if est.counts.size != est.ttr + 1 or int(est.counts.sum()) + est.overflow != est.n:
            raise ConfigError("inconsistent Monte Carlo estimate: counts do not add up to n")
        return est


def estimate_distribution(root, cfg, n, seed, workers=1, step_cap=STEP_CAP):
    """Histogram ``n`` samples of ``root`` into an :class:`McEstimate`.

    Samples are split in fixed chunks of :data:`CHUNK_SIZE`, each with its own
    Philox substream spawned from ``seed``, so the result only depends on
    ``(seed, n)`` and not on ``workers``.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    problems = validate_protocol(root) + cfg.violations()
    if problems:
        raise ConfigError(problems[0])
    sizes = [CHUNK_SIZE] * (n // CHUNK_SIZE)
    if n % CHUNK_SIZE:
        sizes.append(n % CHUNK_SIZE)
    streams = np.random.SeedSequence(seed).spawn(len(sizes))

    def run(job):
        size, ss = job
        t, w = sample_batch(root, cfg, size, make_rng(ss), step_cap)
        return McEstimate.empty(cfg.ttr).add(t, w)

    total = McEstimate.empty(cfg.ttr, seed)
    jobs = list(zip(sizes, streams))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = map(run, jobs)
    for part in parts:
        total.merge(part)
    return total


def compare_to_exact(est, exact, z_limit=4.0):
    """Check a Monte Carlo histogram against an exact (truncated) LinkState.

    The CDF is compared at the deciles of the exact distribution by binomial
    z-scores; the run passes when all of them lie within ``z_limit``. Also
    reported: the largest CDF gap and the count-weighted fraction of
    per-time Werner means within three standard errors of ``exact.werner``.
    """
    if exact.ttr != est.ttr:
        raise ValueError(f"ttr differs: exact {exact.ttr}, samples {est.ttr}")
    F = exact.cdf
    Fh = est.cdf
    deciles = []
    for q in np.arange(1, 10) / 10.0:
        idx = int(np.searchsorted(F, q - 1e-12))
        if idx > est.ttr:
            continue
        f, fh = float(F[idx]), float(Fh[idx])
        sigma = math.sqrt(max(f * (1.0 - f), 0.0) / est.n)
        if sigma > 0.0:
            z = (fh - f) / sigma
        else:
            z = 0.0 if abs(fh - f) <= 1e-12 else math.copysign(math.inf, fh - f)
        deciles.append({"q": round(float(q), 1), "t": idx, "exact": f, "empirical": fh, "z": z})

    c = est.counts
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = est.werner_sum / c
        var = np.maximum(est.werner_sq_sum / c - mean**2, 0.0) / np.maximum(c - 1, 1)
    bins = (c > 0) & (exact.pmf > 0)
    close = np.abs(mean - exact.werner) <= 3.0 * np.sqrt(var) + 1e-9
    weight = c[bins].sum()
    werner_fraction = float(c[bins & close].sum() / weight) if weight else 1.0

    passed = all(abs(d["z"]) <= z_limit for d in deciles)
    return {
        "pass": bool(passed),
        "n": est.n,
        "seed": est.seed,
        "z_limit": z_limit,
        "deciles": deciles,
        "max_abs_z": max((abs(d["z"]) for d in deciles), default=0.0),
        "max_cdf_gap": float(np.abs(Fh - F).max()),
        "werner_within_3sigma": werner_fraction,
        "overflow_fraction": est.overflow / est.n,
        "exact_tail_mass": 1.0 - exact.covered_mass,
    }
