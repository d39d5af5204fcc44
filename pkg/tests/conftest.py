import numpy as np
import pytest

from cryoground.mesh import BoxMeshSpec, Mesh, generate_box
from cryoground.physics import Material, MaterialTable, PhaseModel


@pytest.fixture
def reference_tet() -> Mesh:
    """Unit right tetrahedron (0,0,0),(1,0,0),(0,1,0),(0,0,1), region 1."""
    nodes = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    cells = np.array([[0, 1, 2, 3]])
    facets = np.array([[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]])
    return Mesh(nodes, cells, np.array([1]), facets, np.array([1, 2, 3, 4]))


@pytest.fixture
def unit_box() -> Mesh:
    return generate_box(BoxMeshSpec((1.0, 1.0, 1.0), (4, 4, 4)))


@pytest.fixture
def plain_table() -> MaterialTable:
    """Single-phase unit material with no latent heat."""
    return MaterialTable(
        {1: Material.single_phase(crho=1.0, lam=1.0)},
        PhaseModel(t_star=0.0, delta=1.0, latent_volumetric=0.0),
    )


@pytest.fixture
def soil_table() -> MaterialTable:
    """Freezing porous soil with the published latent heat."""
    soil = Material.freezing_porous(
        porosity=0.35,
        crho_sc=2.17e6,
        crho_w=2.42e6,
        crho_i=1.9e6,
        lambda_sc=2.43,
        lambda_w=2.22,
        lambda_i=2.2,
    )
    return MaterialTable({1: soil}, PhaseModel(t_star=0.0, delta=1.0, latent_volumetric=1.04e8))
