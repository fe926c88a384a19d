import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from calderon.geometry import (
    ConfigurationError,
    DiskDomain,
    build_disk_mesh,
    boundary_integral,
    interior_integral,
    normal_derivative_trace,
)
from calderon.geometry import ScalarField


def test_domain_rejects_empty_gamma():
    with pytest.raises(ConfigurationError):
        DiskDomain(gamma0=(0.0, 2.0 * np.pi))


def test_mesh_cells_positively_oriented(mesh_mid):
    v = mesh_mid.vertices[mesh_mid.cells]
    cross = np.imag(np.conj(v[:, 1] - v[:, 0]) * (v[:, 2] - v[:, 0]))
    assert np.all(cross > 0)


def test_boundary_ordered_by_angle(mesh_mid):
    theta = np.angle(mesh_mid.vertices[mesh_mid.boundary]) % (2.0 * np.pi)
    assert np.all(np.diff(theta) > 0)


def test_gamma0_snapped_to_vertices(quarter_mesh_mid, quarter_domain):
    theta = quarter_mesh_mid.boundary_theta()
    labelled = quarter_mesh_mid.boundary_is_gamma0
    assert np.array_equal(labelled, quarter_domain.on_gamma0(theta))
    assert labelled.any() and (~labelled).any()


def test_interior_integral_disk_area(mesh_mid):
    assert abs(interior_integral(1.0, mesh_mid) - np.pi) <= 1e-3


def test_interior_integral_zero_exact(mesh_mid):
    assert interior_integral(0.0, mesh_mid) == 0.0


def test_interior_integral_odd_function(mesh_mid):
    assert abs(interior_integral(lambda z: np.real(z), mesh_mid)) <= 1e-3


def test_interior_integral_conformal_weight():
    dom = DiskDomain(conformal_log_factor=lambda z: np.full(np.shape(z), 0.5))
    mesh = build_disk_mesh(0.04, dom)
    # measure e^{2 rho} dA = e * pi
    assert abs(interior_integral(1.0, mesh) - np.e * np.pi) <= 5e-3


def test_boundary_integral_circumference(mesh_mid):
    val, warned = boundary_integral(np.ones(len(mesh_mid.boundary)), mesh_mid, "full")
    assert abs(val - 2.0 * np.pi) <= 1e-3
    assert not warned


def test_boundary_integral_empty_arc_warns(mesh_mid):
    # full-data domain: gamma0 is empty
    val, warned = boundary_integral(np.ones(len(mesh_mid.boundary)), mesh_mid, "gamma0")
    assert val == 0.0
    assert warned


def test_boundary_integral_cos_theta(mesh_mid):
    theta = mesh_mid.boundary_theta()
    val, _ = boundary_integral(np.cos(theta), mesh_mid, "full")
    assert abs(val) <= 1e-3


def test_normal_derivative_radial(mesh_mid):
    u = (1.0 - np.abs(mesh_mid.vertices) ** 2) / 4.0
    tr = normal_derivative_trace(u, mesh_mid)
    assert np.max(np.abs(tr - (-0.5))) <= 2e-2


def test_normal_derivative_constant(mesh_mid):
    tr = normal_derivative_trace(np.ones(mesh_mid.n_vertices), mesh_mid)
    assert np.max(np.abs(tr)) <= 1e-10


def test_normal_derivative_linear(mesh_mid):
    tr = normal_derivative_trace(np.real(mesh_mid.vertices), mesh_mid)
    assert np.max(np.abs(tr - np.cos(mesh_mid.boundary_theta()))) <= 2e-2


@pytest.mark.parametrize("field", [lambda z: np.real(z), lambda z: np.real(z**2)])
def test_divergence_theorem_consistency(mesh_mid, field):
    """Harmonic u: boundary integral of the normal derivative vanishes."""
    u = field(mesh_mid.vertices)
    tr = normal_derivative_trace(u, mesh_mid)
    val, _ = boundary_integral(tr, mesh_mid, "full")
    assert abs(val) <= 5e-2 * max(np.max(np.abs(u)), 1.0)


def test_refinement_reduces_quadrature_error(full_domain):
    errs = []
    for res in (0.08, 0.04):
        mesh = build_disk_mesh(res, full_domain)
        errs.append(abs(interior_integral(lambda z: np.real(z) ** 2, mesh) - np.pi / 4))
    assert 3.0 <= errs[0] / errs[1] <= 5.0


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-10, 10), b=st.floats(-10, 10))
def test_interior_integral_linear_in_integrand(a, b):
    mesh = _linearity_mesh()
    f = np.real(mesh.vertices)
    g = np.abs(mesh.vertices) ** 2
    lhs = interior_integral(a * f + b * g, mesh)
    rhs = a * interior_integral(f, mesh) + b * interior_integral(g, mesh)
    assert abs(lhs - rhs) <= 1e-10 * (1.0 + abs(a) + abs(b))


_MESH_CACHE = {}


def _linearity_mesh():
    if "m" not in _MESH_CACHE:
        _MESH_CACHE["m"] = build_disk_mesh(0.1, DiskDomain())
    return _MESH_CACHE["m"]


def test_scalar_field_wraps_values(mesh_mid):
    f = ScalarField(mesh_mid, np.real(mesh_mid.vertices))
    assert len(f.values) == mesh_mid.n_vertices
