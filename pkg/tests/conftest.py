from __future__ import annotations

import numpy as np
import pytest

from cylres import CrossSection, ScalingProfile, build_grid, product_metric


@pytest.fixture(scope="session")
def dirichlet_strip():
    return CrossSection("interval", np.pi, "dirichlet")


@pytest.fixture(scope="session")
def neumann_strip():
    return CrossSection("interval", np.pi, "neumann")


@pytest.fixture(scope="session")
def flat_cylinder_small(dirichlet_strip):
    """Separable [0,10] x [0,pi] Dirichlet test bed, ~650 dofs."""
    grid = build_grid(dirichlet_strip, 10.0, 60, 12, "dirichlet")
    return product_metric(), ScalingProfile(R=2.0, w=2.0), grid


def separable_exact(X=10.0, jmax=4, kmax=20, count=10):
    vals = sorted(j * j + (k * np.pi / X) ** 2
                  for j in range(1, jmax) for k in range(1, kmax))
    return np.array(vals[:count])
