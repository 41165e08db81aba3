import numpy as np
from hypothesis import HealthCheck, settings

from repeater_cutoff import LinkState

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def geometric_link(p, ttr, w=1.0):
    t = np.arange(ttr + 1)
    pmf = np.where(t > 0, p * (1.0 - p) ** (t - 1.0), 0.0)
    return LinkState(pmf, np.where(pmf > 0, w, 0.0))


def delta_link(t, ttr, w=1.0):
    pmf = np.zeros(ttr + 1)
    werner = np.zeros(ttr + 1)
    pmf[t] = 1.0
    werner[t] = w
    return LinkState(pmf, werner)


def random_link(rng, ttr, mass=None):
    """Sub-normalized random pmf with a random Werner curve."""
    pmf = rng.random(ttr + 1) * (rng.random(ttr + 1) < 0.7)
    pmf[0] = 0.0
    pmf[rng.integers(1, ttr + 1)] += 0.1
    total = mass if mass is not None else rng.uniform(0.3, 1.0)
    pmf *= total / pmf.sum()
    werner = np.where(pmf > 0, rng.uniform(0.5, 1.0, ttr + 1), 0.0)
    return LinkState(pmf, werner)


# Acceptance results, printed one line per criterion at the end of the run.
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[1:])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key}: {'PASS' if ok else 'FAIL'}  {detail}")

