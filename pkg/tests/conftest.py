import math

import numpy as np
import pytest

from rblab import catalog
from rblab import jets as jm
from rblab.chartcalc import ChartMetric, Interval


def half_plane() -> ChartMetric:
    def comps(x, t):
        w = 1.0 / (x[1] * x[1])
        return [[w, 0.0], [0.0, w]]
    return ChartMetric(2, comps, (Interval(), Interval(0.0, math.inf)), name="half-plane")


def skew3() -> ChartMetric:
    """A 3-D metric with every component non-constant and nonzero off-diagonals."""
    def comps(x, t):
        a = jm.sin(x[0]) * 0.3
        b = x[0] * x[2] * 0.1
        c = jm.cos(x[1]) * 0.2
        return [[1.0 + x[1] * x[1] * 0.2, a, b],
                [a, 2.0 + jm.cos(x[2]) * 0.5, c],
                [b, c, 1.5 + x[0] * x[1] * 0.1]]
    return ChartMetric(3, comps, name="skew3")


# name -> (metric, sampling box)
CORPUS = {
    "hamilton-cigar": (lambda: catalog.hamilton_cigar().metric, [(-2, 2), (-2, 2)]),
    "sphere": (lambda: catalog.sphere_chart(1.0, 2), [(0.3, 2.8), (0, 2 * math.pi)]),
    "sphere3": (lambda: catalog.sphere_chart(2.0, 3), [(0.4, 2.7), (0.4, 2.7), (0, 2 * math.pi)]),
    "half-plane": (half_plane, [(-1, 1), (0.5, 2)]),
    "perturbed-sphere": (lambda: catalog.perturbed_sphere_metric(0.1), [(0.3, 2.8), (0, 2 * math.pi)]),
    "torus-field": (lambda: catalog.torus_field().metric, [(0, 2 * math.pi), (0, 2 * math.pi)]),
    "warped": (lambda: catalog.warped_product_2d().metric, [(0.3, 1.9), (0, 2 * math.pi)]),
    "skew3": (skew3, [(-1, 1), (-1, 1), (-1, 1)]),
}


def sample(box, n, seed=0):
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in box], dtype=float)
    hi = np.array([b[1] for b in box], dtype=float)
    return lo + (hi - lo) * rng.random((n, len(box)))


@pytest.fixture(params=sorted(CORPUS))
def corpus_metric(request):
    make, box = CORPUS[request.param]
    return request.param, make(), sample(box, 20, seed=sum(map(ord, request.param)))


# criterion id -> printed PASS/FAIL line, filled by test_acceptance
ACCEPTANCE_LINES: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES, key=lambda k: (int(k.rstrip("abc")), k)):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
