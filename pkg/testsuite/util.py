"""
Testing utilities
"""
import contextlib
import io
import sys

import numpy as np

from mvlab import EmpiricalMeasure, SimConfig

#: Small particle systems that keep the suite fast
SMALL_SIM = SimConfig(n_particles=400, step=1e-2, horizon=8.0, record_every=10)


@contextlib.contextmanager
def captured_output():
    _orig_stdout = sys.stdout
    _orig_stderr = sys.stderr

    try:
        sys.stdout = io.StringIO()
        sys.stderr = io.StringIO()

        yield (sys.stdout, sys.stderr)

    finally:
        sys.stdout = _orig_stdout
        sys.stderr = _orig_stderr


def cloud(*values):
    """
    A uniform one dimensional measure on *values*.
    """
    return EmpiricalMeasure(np.array(values, dtype=float))


def random_cloud(n, dim, seed=0, loc=0.0, scale=1.0):
    rng = np.random.default_rng(seed)
    return EmpiricalMeasure(rng.normal(loc, scale, size=(n, dim)))


class TestMixin:
    def assert_within(self, value, expected, tolerance, msg=None):
        if not abs(value - expected) <= tolerance:
            self.fail(
                msg
                or f"{value!r} differs from {expected!r} by more than {tolerance!r}"
            )

    def assert_same_measure(self, first, second):
        np.testing.assert_array_equal(first.points, second.points)
        np.testing.assert_array_equal(first.weights, second.weights)
