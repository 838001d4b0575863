"""A closed surface containing the graph of the extension, and contact checks.

The upper sheet is the graph of the extension over the inner disc, blended
in an annulus into the top half of an ellipsoid; the lower sheet is the
bottom half of the same ellipsoid. Both sheets share the rim, where the
ellipsoid is smooth, so the union is a smooth topological sphere.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from .arc import DomainError
from .whitney import ExtensionFn

DEFAULT_RADIUS = 1.75
DEFAULT_STEP = 0.02
CENTER = (0.5, 0.5)
DEFAULT_FD_STEP = 2.0**-15


class ConstructionError(RuntimeError):
    pass


class StencilError(DomainError):
    pass


def _psi(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def smoothstep(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1."""
    a, b = _psi(s), _psi(1 - np.asarray(s, dtype=float))
    return a / (a + b)


@dataclass
class SurfaceMesh:
    vertices: np.ndarray  # (V, 3)
    triangles: np.ndarray  # (T, 3), outward orientation
    curve: np.ndarray  # indices of vertices over curve samples
    graph: np.ndarray  # bool mask: vertex lies on the graph of the extension
    ext: ExtensionFn = field(repr=False)
    scale: float = 1.0
    meta: dict = field(default_factory=dict)

    def height(self, pts) -> np.ndarray:
        """Height of the graph portion over planar points (scaled frame)."""
        c = self.scale
        return c * c * self.ext.evaluate(np.asarray(pts, dtype=float) / c)

    def edges(self) -> np.ndarray:
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return e

    def euler(self) -> int:
        e = np.sort(self.edges(), axis=1)
        E = len(np.unique(e, axis=0))
        return len(self.vertices) - E + len(self.triangles)

    def is_watertight(self) -> bool:
        """Every edge in exactly two faces, with opposite directions."""
        e = self.edges()
        directed = np.unique(e, axis=0)
        if len(directed) != len(e):
            return False
        und, counts = np.unique(np.sort(e, axis=1), axis=0, return_counts=True)
        return bool(np.all(counts == 2))

    def to_obj(self) -> str:
        lines = [f"v {x!r} {y!r} {z!r}" for x, y, z in self.vertices]
        lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in self.triangles]
        return "\n".join(lines) + "\n"

    def to_ply(self) -> str:
        head = [
            "ply",
            "format ascii 1.0",
            f"element vertex {len(self.vertices)}",
            "property double x",
            "property double y",
            "property double z",
            f"element face {len(self.triangles)}",
            "property list uchar int vertex_indices",
            "end_header",
        ]
        body = [f"{x!r} {y!r} {z!r}" for x, y, z in self.vertices]
        body += [f"3 {a} {b} {c}" for a, b, c in self.triangles]
        return "\n".join(head + body) + "\n"

    def sidecar(self) -> str:
        return json.dumps(
            {"curve_vertices": self.curve.tolist(), "scale": self.scale, **self.meta}, indent=1
        )


def _ring(radius: float, step: float):
    k = max(8, int(math.ceil(2 * math.pi * radius / step)))
    a = 2 * math.pi * np.arange(k) / k
    return np.stack([CENTER[0] + radius * np.cos(a), CENTER[1] + radius * np.sin(a)], axis=1), k


def _disc_grid(radius: float, step: float):
    xs = np.arange(CENTER[0] - radius, CENTER[0] + radius + step / 2, step)
    X, Y = np.meshgrid(xs, xs - CENTER[0] + CENTER[1])
    P = np.stack([X.ravel(), Y.ravel()], axis=1)
    r = np.hypot(P[:, 0] - CENTER[0], P[:, 1] - CENTER[1])
    return P[r <= radius]


def _orient(tri, pts, up: bool):
    a, b, c = pts[tri[:, 0]], pts[tri[:, 1]], pts[tri[:, 2]]
    cross = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    flip = cross < 0 if up else cross > 0
    tri = tri.copy()
    tri[flip] = tri[flip][:, [0, 2, 1]]
    return tri


def build_sphere(
    ext: ExtensionFn,
    curve_points,
    radius: float = DEFAULT_RADIUS,
    step: float = DEFAULT_STEP,
    inner: float | None = None,
    blend: float = 0.05,
    height: float = 0.5,
) -> SurfaceMesh:
    """Closed mesh whose upper sheet is the graph over the disc of ``inner`` radius.

    ``curve_points`` become vertices of the graph (the marked curve
    vertices). The disc must contain them with room for the blend annulus.
    """
    if radius <= 0 or step <= 0:
        raise DomainError("radius and step must be positive")
    inner = radius - 3 * blend if inner is None else inner
    mid = inner + blend
    if not inner < mid < radius:
        raise DomainError("need inner < inner + blend < radius")
    cp = np.asarray(curve_points, dtype=float).reshape(-1, 2)
    rc = np.hypot(cp[:, 0] - CENTER[0], cp[:, 1] - CENTER[1])
    if len(cp) and rc.max() >= inner:
        raise DomainError(f"curve reaches radius {rc.max():.4f}, outside the graph disc {inner}")
    ring, k = _ring(radius, step)
    apothem = radius * math.cos(math.pi / k)
    grid = _disc_grid(apothem - step / 2, step)
    if len(cp):
        d, _ = cKDTree(cp).query(grid)
        grid = grid[d > step / 4]
    upper_xy = np.concatenate([ring, cp, grid])
    lower_xy = np.concatenate([ring, _disc_grid(apothem - step / 2, 2 * step)])

    r_up = np.hypot(upper_xy[:, 0] - CENTER[0], upper_xy[:, 1] - CENTER[1])
    f = ext.evaluate(upper_xy)
    f_in = f[r_up <= inner]
    z0 = float(f_in.min()) - height
    K = height / radius
    chi = smoothstep((r_up - inner) / blend)
    dome = z0 + K * np.sqrt(np.clip(radius**2 - r_up**2, 0, None))
    z_up = (1 - chi) * f + chi * dome
    z_up[:k] = z0  # the rim itself
    r_lo = np.hypot(lower_xy[:, 0] - CENTER[0], lower_xy[:, 1] - CENTER[1])
    z_lo = z0 - K * np.sqrt(np.clip(radius**2 - r_lo**2, 0, None))
    z_lo[:k] = z0

    t_up = _orient(Delaunay(upper_xy).simplices, upper_xy, up=True)
    t_lo = _orient(Delaunay(lower_xy).simplices, lower_xy, up=False)
    n_up = len(upper_xy)
    # lower sheet shares the rim vertices (indices 0..k-1)
    lo_index = np.concatenate([np.arange(k), n_up + np.arange(len(lower_xy) - k)])
    t_lo = lo_index[t_lo]
    V = np.concatenate(
        [
            np.column_stack([upper_xy, z_up]),
            np.column_stack([lower_xy[k:], z_lo[k:]]),
        ]
    )
    graph = np.zeros(len(V), bool)
    graph[:n_up] = r_up <= inner
    mesh = SurfaceMesh(
        V,
        np.concatenate([t_up, t_lo]),
        np.arange(k, k + len(cp)),
        graph,
        ext,
        1.0,
        {"radius": radius, "step": step, "inner": inner, "blend": blend, "z0": z0},
    )
    if not mesh.is_watertight():
        raise ConstructionError("mesh is not watertight")
    return mesh


@dataclass(frozen=True)
class ContactCheckRecord:
    point: tuple
    t1: tuple
    t2: tuple
    omega_t1: float
    omega_t2: float

    @property
    def residual(self) -> float:
        return max(abs(self.omega_t1), abs(self.omega_t2))


def contact_pairing(y, dx, dy):
    """omega = dz - y dx on t1 = (1, 0, dx) and t2 = (0, 1, dy)."""
    return dx - y, dy


def check_contact(mesh: SurfaceMesh, h: float = DEFAULT_FD_STEP, vertices=None):
    """Contact pairings at graph vertices (curve vertices by default).

    Derivatives are central differences of the height function with step
    ``h`` in the unscaled frame (``h * scale`` in the mesh's own frame).
    """
    idx = mesh.curve if vertices is None else np.asarray(vertices)
    P = mesh.vertices[idx, :2]
    c = mesh.scale
    hh = h * c
    r = np.hypot(P[:, 0] / c - CENTER[0], P[:, 1] / c - CENTER[1])
    if len(r) and r.max() + h > mesh.meta["inner"]:
        raise StencilError("vertex too close to the disc boundary for the stencil")
    ex, ey = np.array([hh, 0.0]), np.array([0.0, hh])
    v = mesh.height(np.concatenate([P + ex, P - ex, P + ey, P - ey])).reshape(4, len(P))
    dx = (v[0] - v[1]) / (2 * hh)
    dy = (v[2] - v[3]) / (2 * hh)
    w1, w2 = contact_pairing(P[:, 1], dx, dy)
    records = [
        ContactCheckRecord((float(p[0]), float(p[1])), (1.0, 0.0, float(a)), (0.0, 1.0, float(b)), float(o1), float(o2))
        for p, a, b, o1, o2 in zip(P, dx, dy, w1, w2)
    ]
    res = np.maximum(np.abs(w1), np.abs(w2))
    summary = {
        "count": len(res),
        "max": float(res.max()) if len(res) else 0.0,
        "rms": float(np.sqrt(np.mean(res**2))) if len(res) else 0.0,
        "h": h,
        "scale": c,
    }
    return records, summary


def face_normal_check(mesh: SurfaceMesh) -> dict:
    """Angle between mesh vertex normals and the contact plane normal at curve vertices."""
    V, T = mesh.vertices, mesh.triangles
    n = np.cross(V[T[:, 1]] - V[T[:, 0]], V[T[:, 2]] - V[T[:, 0]])
    vn = np.zeros_like(V)
    for j in range(3):
        np.add.at(vn, T[:, j], n)
    vn = vn[mesh.curve]
    vn /= np.linalg.norm(vn, axis=1)[:, None]
    y = V[mesh.curve, 1]
    cn = np.column_stack([-y, np.zeros_like(y), np.ones_like(y)])  # normal of dz - y dx = 0
    cn /= np.linalg.norm(cn, axis=1)[:, None]
    ang = np.degrees(np.arccos(np.clip(np.abs(np.sum(vn * cn, axis=1)), 0, 1)))
    return {"max_deg": float(ang.max()), "median_deg": float(np.median(ang))}


def far_vertex_residuals(mesh: SurfaceMesh, min_distance: float = 0.1, count: int = 1000, seed: int = 0, h: float = DEFAULT_FD_STEP):
    """Contact residuals at sampled graph vertices at least ``min_distance`` from the curve."""
    curve_xy = mesh.vertices[mesh.curve, :2]
    cand = np.nonzero(mesh.graph)[0]
    d, _ = cKDTree(curve_xy).query(mesh.vertices[cand, :2])
    cand = cand[d >= min_distance * mesh.scale]
    rng = np.random.default_rng(seed)
    pick = np.sort(rng.choice(cand, size=min(count, len(cand)), replace=False))
    recs, _ = check_contact(mesh, h, pick)
    return np.array([r.residual for r in recs])


def contact_scale(mesh: SurfaceMesh, c: float) -> SurfaceMesh:
    """(x, y, z) -> (c x, c y, c^2 z), which preserves ker(dz - y dx)."""
    if not c > 0:
        raise DomainError(f"scale must be positive, got {c}")
    V = mesh.vertices * np.array([c, c, c * c])
    return SurfaceMesh(V, mesh.triangles.copy(), mesh.curve.copy(), mesh.graph.copy(), mesh.ext, mesh.scale * c, dict(mesh.meta))


def records_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["x", "y", "dx", "dy", "omega_t1", "omega_t2"])
    for r in records:
        w.writerow([repr(r.point[0]), repr(r.point[1]), repr(r.t1[2]), repr(r.t2[2]), repr(r.omega_t1), repr(r.omega_t2)])
    return buf.getvalue()
