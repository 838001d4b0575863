from fractions import Fraction

import numpy as np
import pytest

from fatcurve.arc import DomainError
from fatcurve.jordan import sample_jet_field
from fatcurve.surface import (
    StencilError,
    SurfaceMesh,
    build_sphere,
    check_contact,
    contact_pairing,
    contact_scale,
    face_normal_check,
    far_vertex_residuals,
    records_csv,
    smoothstep,
)
from fatcurve.whitney import ExtensionFn


@pytest.fixture(scope="module")
def field():
    return sample_jet_field(2, connector_step=Fraction(1, 64))


@pytest.fixture(scope="module")
def mesh(field):
    ext = ExtensionFn.from_jets(field, h_min=2.0**-14)
    return build_sphere(ext, field.arrays()[0], step=0.06)


def test_smoothstep():
    s = np.array([-1.0, 0.0, 0.5, 1.0, 2.0])
    v = smoothstep(s)
    assert v[0] == v[1] == 0.0 and v[3] == v[4] == 1.0
    assert v[2] == pytest.approx(0.5)


def test_topology(mesh, field):
    assert mesh.euler() == 2
    assert mesh.is_watertight()
    assert len(mesh.curve) == len(field)


def test_curve_vertices_on_graph(mesh, field):
    P, f, _, _ = field.arrays()
    V = mesh.vertices[mesh.curve]
    assert np.array_equal(V[:, :2], P)
    assert np.max(np.abs(V[:, 2] - f)) < 1e-12
    assert np.all(mesh.graph[mesh.curve])


def test_contact_residual_small(mesh):
    records, summary = check_contact(mesh)
    assert summary["count"] == len(mesh.curve)
    assert summary["max"] < 1e-6
    r = records[0]
    assert r.residual == max(abs(r.omega_t1), abs(r.omega_t2))


def test_exact_jet_pairing_vanishes():
    assert contact_pairing(0.3, 0.3, 0.0) == (0.0, 0.0)


def test_scale_identity(mesh):
    same = contact_scale(mesh, 1.0)
    assert np.array_equal(same.vertices, mesh.vertices)


def test_scale_formula(field):
    tiny = SurfaceMesh(
        np.array([[1.0, 0.0, 1.0]]), np.zeros((0, 3), np.int64), np.zeros(0, np.int64), np.zeros(1, bool), None
    )
    assert contact_scale(tiny, 0.5).vertices.tolist() == [[0.5, 0.0, 0.25]]
    with pytest.raises(DomainError):
        contact_scale(tiny, 0.0)
    with pytest.raises(DomainError):
        contact_scale(tiny, -2.0)


@pytest.mark.parametrize("c", [0.5, 2.0, 0.1])
def test_scale_covariance(mesh, c):
    _, before = check_contact(mesh)
    _, after = check_contact(contact_scale(mesh, c))
    assert abs(after["max"] - c * before["max"]) <= 1e-12
    scaled = contact_scale(mesh, c)
    assert scaled.euler() == 2 and scaled.is_watertight()


def test_stencil_error(mesh):
    rim = np.argmax(np.hypot(mesh.vertices[:, 0] - 0.5, mesh.vertices[:, 1] - 0.5) * mesh.graph)
    with pytest.raises(StencilError):
        check_contact(mesh, vertices=[rim], h=0.2)


def test_curve_outside_disc(mesh):
    with pytest.raises(DomainError):
        build_sphere(mesh.ext, [[3.0, 0.5]], radius=1.75)


def test_far_vertices_reported(mesh):
    res = far_vertex_residuals(mesh, count=200, seed=1)
    assert len(res) == 200
    assert np.all(np.isfinite(res))
    assert np.median(res) > 0


def test_exports(mesh):
    obj = mesh.to_obj()
    assert obj.count("\nf ") + obj.startswith("f ") == len(mesh.triangles)
    ply = mesh.to_ply()
    assert f"element vertex {len(mesh.vertices)}" in ply
    assert '"curve_vertices"' in mesh.sidecar()
    records, _ = check_contact(mesh)
    assert records_csv(records[:3]).count("\n") == 4
    normals = face_normal_check(mesh)
    assert 0 <= normals["median_deg"] <= normals["max_deg"] <= 90
