import math

import numpy as np
import pytest

from nldirac.massless import closed_form_profile

SQRT2 = math.sqrt(2.0)
MATRIX_BETAS = [(1.0, 1.0), (1.0, 0.7), (1.0, 0.5), (2.0, 1.0)]
MATRIX_LAMBDAS = [0.5, 1.0, 2.0]


@pytest.fixture(scope="session")
def closed_form():
    """Closed-form profile at lambda = sqrt(2) on [0, 50]."""
    grid = np.concatenate([[0.0], np.geomspace(1e-4, 50.0, 2000)])
    return closed_form_profile(SQRT2, grid)
