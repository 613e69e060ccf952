import math

import numpy as np
import pytest

from kreinsl import EntireSolutionSpec, Hydrogen, Laguerre, Legendre, make_problem

# (spec, problem, interval where random bumps may live)
FAMILIES = {
    "hydrogen": (Hydrogen(a_coul=0.0, nu=1.0), None, (0.2, 3.0)),
    "legendre": (Legendre(m=1.0), None, (-0.8, 0.8)),
    "laguerre": (Laguerre(alpha=1.5), None, (0.5, 6.0)),
}


def family(name):
    fam, b, box = FAMILIES[name]
    spec = EntireSolutionSpec(fam)
    return spec, make_problem(spec, b), box


@pytest.fixture(params=sorted(FAMILIES))
def fam(request):
    return family(request.param)


def random_bumps(box, n, rng):
    from kreinsl import Bump

    lo, hi = box
    out = []
    for _ in range(n):
        width = rng.uniform(0.15, 0.45) * (hi - lo)
        center = rng.uniform(lo + width, hi - width)
        out.append(Bump(center, width, rng.uniform(0.5, 2.0)))
    return out


HALF_PI = 0.5 * math.pi


def rel(a, b):
    return np.abs(np.asarray(a) - np.asarray(b)) / np.maximum(np.abs(np.asarray(b)), 1e-300)


# verdict lines of the acceptance suite, repeated in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
