import numpy as np
import pytest

from dasa import vi
from dasa.stepsize import recursion_sequence


@pytest.fixture(scope="session", autouse=True)
def warm_jit_kernels():
    """Compile the numba kernels once so timed tests measure the algorithms."""
    recursion_sequence(0.1, 1.0, 4)
    poly = vi.Polyhedron(np.array([[1.0, 1.0]]), np.array([1.0]))
    vi.project(poly, np.array([2.0, 2.0]))
