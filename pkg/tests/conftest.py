import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from smoothmax.field_model import BasisTerm, CoefficientLaw, Domain, FieldSpec

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def trig_spec(sd=1.0, ks=(1, 2, 3), seed=7, d=1):
    """cos + sin pairs at the given frequencies with iid N(0, sd^2) coefficients."""
    terms = []
    for k in ks:
        freq = (k,) + (0,) * (d - 1)
        terms += [BasisTerm.cos(freq, CoefficientLaw.gaussian(sd)),
                  BasisTerm.sin(freq, CoefficientLaw.gaussian(sd))]
    return FieldSpec(Domain.unit(d), {}, tuple(terms), seed=seed)


def quadratic_spec():
    return FieldSpec(Domain((-1.0,), (1.0,)), {(2,): -0.5}, ())


@pytest.fixture
def trig():
    return trig_spec()


# one PASS/FAIL line per acceptance criterion, printed after the test run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: (int(s.split()[2].rstrip(":abc")), s.split()[2])):
            terminalreporter.write_line(line)
