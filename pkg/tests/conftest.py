import numpy as np
import pytest

from layerlab import (BumpFunction, ConstantProfile, CosineProfile,
                      assemble_approx, assemble_hierarchy, assemble_outlet,
                      build_shear, make_grid, solve_blasius)


@pytest.fixture(scope="session")
def blasius():
    return solve_blasius(1e-10)


@pytest.fixture(scope="session")
def unit_shear():
    return build_shear(ConstantProfile(1.0))


@pytest.fixture(scope="session")
def cosine_shear():
    return build_shear(CosineProfile(2.0, 0.5))


@pytest.fixture(scope="session")
def bump():
    return BumpFunction(amplitude=0.04, center=0.0, width=0.4)


@pytest.fixture(scope="session")
def hier_k0(unit_shear):
    return assemble_hierarchy(unit_shear, 0, 4e-3, L=1.0, s0=2.0)


@pytest.fixture(scope="session")
def hier_k1(unit_shear):
    return assemble_hierarchy(unit_shear, 1, 4e-3, L=1.0, s0=2.0)


@pytest.fixture(scope="session")
def approx_k0(unit_shear, hier_k0, bump):
    out = assemble_outlet(unit_shear, bump, 4e-3, 1, L=1.0, hierarchy=hier_k0)
    grid = make_grid(1.0, 4e-3, 40)
    return assemble_approx(unit_shear, hier_k0, out, grid)
