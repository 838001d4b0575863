"""Whitney-type extension of a sampled 1-jet field to the plane.

The complement of the samples is covered by dyadic squares whose size is
a fixed fraction of their distance to the sample set; each square carries
the first-order Taylor polynomial of its nearest jet, and a smooth
partition of unity subordinate to the slightly inflated squares blends them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .arc import DomainError

BBOX = (-1.5, -1.5, 2.5, 2.5)  # square, so every level has square cells
RASTER_BOX = (-1.0, -1.0, 2.0, 2.0)
THETA = 0.25
INFLATE = 9 / 8
DEFAULT_H_MIN = 2.0**-16


def bump(t: np.ndarray) -> np.ndarray:
    """exp(1 - 1/(1 - t^2)) on (-1, 1), zero outside; smooth, bump(0) = 1."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
    return out


def _nearest(tree: cKDTree, pts: np.ndarray, k: int = 4):
    """Nearest sample to each point, ties going to the smallest index."""
    k = min(k, tree.n)
    d, i = tree.query(pts, k=k)
    if k == 1:
        return d, i
    d0 = d[:, :1]
    tied = np.isclose(d, d0, rtol=0, atol=1e-15)
    i = np.where(tied, i, np.iinfo(np.int64).max)
    return d[:, 0], i.min(axis=1)


class WhitneyCover:
    """Dyadic Whitney cover of a square box relative to a finite sample.

    A cell is a leaf when its diameter is at most ``theta`` times a lower
    bound for its distance to the samples, or its side is at most ``h_min``,
    and its parent is not. The rule is inherited by children, so leaves can
    be found lazily by descent; ``leaves()`` enumerates them all.
    """

    def __init__(self, points, h_min: float = DEFAULT_H_MIN, theta: float = THETA, bbox=BBOX):
        if not h_min > 0:
            raise DomainError(f"h_min must be positive, got {h_min}")
        if not theta > 0:
            raise DomainError(f"theta must be positive, got {theta}")
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        if len(points) == 0:
            raise DomainError("empty jet field")
        x0, y0, x1, y1 = bbox
        self.size = float(x1 - x0)
        if abs((y1 - y0) - self.size) > 1e-12:
            raise DomainError("bounding box must be square")
        self.origin = np.array([x0, y0], dtype=float)
        self.theta = theta
        self.h_min = h_min
        self.points = points
        self.tree = cKDTree(points)
        self.floor_level = max(0, math.ceil(math.log2(self.size / h_min) - 1e-12))
        self._leaves = None

    def cell_size(self, level) -> np.ndarray:
        return self.size / 2.0 ** np.asarray(level, dtype=float)

    def centers(self, level, ij) -> np.ndarray:
        return self.origin + (np.asarray(ij) + 0.5) * self.cell_size(level)[..., None]

    def _rule(self, level, ij):
        """(rule holds, distance, nearest sample) for cells given by level and index."""
        level = np.asarray(level)
        s = self.cell_size(level)
        d, nn = _nearest(self.tree, self.centers(level, ij))
        diam = s * math.sqrt(2)
        whitney = diam <= self.theta * (d - diam / 2)
        return whitney | (level >= self.floor_level), whitney, d, nn

    def is_leaf(self, level, ij):
        level = np.asarray(level)
        ij = np.asarray(ij)
        ok, _, _, nn = self._rule(level, ij)
        inside = np.all((ij >= 0) & (ij < (1 << level)[:, None]), axis=1)
        parent = level > 0
        if np.any(parent & ok & inside):
            sel = np.nonzero(parent & ok & inside)[0]
            pok = self._rule(level[sel] - 1, ij[sel] // 2)[0]
            ok[sel] &= ~pok
        return ok & inside, nn

    def leaf_level(self, pts) -> np.ndarray:
        """Level of the leaf containing each point."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        out = np.full(len(pts), -1, np.int64)
        active = np.arange(len(pts))
        for lv in range(self.floor_level + 1):
            s = self.size / 2.0**lv
            ij = np.floor((pts[active] - self.origin) / s).astype(np.int64)
            ij = np.clip(ij, 0, (1 << lv) - 1)
            ok = self._rule(np.full(len(active), lv), ij)[0]
            out[active[ok]] = lv
            active = active[~ok]
            if not len(active):
                break
        return out

    def candidates(self, pts, spread: int = 2):
        """(point index, leaf level, leaf index, nearest sample) for leaves near each point.

        Every leaf whose inflated square can contain the point is among them:
        such leaves touch the point's own leaf, and touching leaves differ by
        at most ``spread`` levels.
        """
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        L = self.leaf_level(pts)
        rows, lvls, ijs, nns = [], [], [], []
        idx = np.arange(len(pts))
        for dl in range(-spread, spread + 1):
            lv = L + dl
            ok = (lv >= 0) & (lv <= self.floor_level)
            if not np.any(ok):
                continue
            r = idx[ok]
            lv = lv[ok]
            s = self.cell_size(lv)
            base = np.floor((pts[r] - self.origin) / s[:, None]).astype(np.int64)
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    ij = base + np.array([di, dj])
                    leaf, nn = self.is_leaf(lv, ij)
                    rows.append(r[leaf])
                    lvls.append(lv[leaf])
                    ijs.append(ij[leaf])
                    nns.append(nn[leaf])
        return (
            np.concatenate(rows),
            np.concatenate(lvls),
            np.concatenate(ijs).reshape(-1, 2),
            np.concatenate(nns),
        )

    def leaves(self, max_cells: int = 5_000_000):
        """All leaves as arrays (level, ij, dist, nearest, floor)."""
        if self._leaves is not None:
            return self._leaves
        level = np.zeros(1, np.int64)
        ij = np.zeros((1, 2), np.int64)
        out = {k: [] for k in ("level", "ij", "dist", "nearest", "floor")}
        count = 0
        while len(level):
            ok, whitney, d, nn = self._rule(level, ij)
            for k, v in (("level", level), ("ij", ij), ("dist", d), ("nearest", nn), ("floor", ~whitney)):
                out[k].append(v[ok])
            count += int(ok.sum())
            split = ~ok
            if count + 4 * int(split.sum()) > max_cells:
                raise DomainError("cover too large to enumerate; raise h_min")
            lv, base = level[split], 2 * ij[split]
            level = np.repeat(lv + 1, 4)
            ij = np.repeat(base, 4, axis=0) + np.tile([[0, 0], [0, 1], [1, 0], [1, 1]], (len(lv), 1))
        self._leaves = {k: np.concatenate(v) for k, v in out.items()}
        return self._leaves

    def __len__(self) -> int:
        return len(self.leaves()["level"])

    def leaf_area(self, include_floor: bool = True) -> float:
        lv = self.leaves()
        s = self.cell_size(lv["level"])
        keep = np.ones(len(s), bool) if include_floor else ~lv["floor"]
        return float(np.sum(s[keep] ** 2))

    def to_json(self) -> str:
        lv = self.leaves()
        return json.dumps(
            {
                "origin": self.origin.tolist(),
                "size": self.size,
                "theta": self.theta,
                "h_min": self.h_min,
                "cells": [
                    {"level": int(a), "i": int(i), "j": int(j), "dist": float(d), "nearest": int(n), "floor": bool(f)}
                    for a, (i, j), d, n, f in zip(lv["level"], lv["ij"], lv["dist"], lv["nearest"], lv["floor"])
                ],
            }
        )


def build_cover(points, h_min: float = DEFAULT_H_MIN, theta: float = THETA, bbox=BBOX) -> WhitneyCover:
    return WhitneyCover(points, h_min, theta, bbox)


class ExtensionFn:
    """Partition-of-unity blend of nearest-jet Taylor polynomials."""

    def __init__(self, cover: WhitneyCover, values, fx, fy):
        self.cover = cover
        self.points = cover.points
        self.values = np.asarray(values, dtype=float)
        self.fx = np.asarray(fx, dtype=float)
        self.fy = np.asarray(fy, dtype=float)

    @classmethod
    def from_jets(cls, jets, h_min: float = DEFAULT_H_MIN, theta: float = THETA):
        pts, f, fx, fy = jets.arrays()
        return cls(build_cover(pts, h_min, theta), f, fx, fy)

    def _check_box(self, pts):
        o = self.cover.origin
        if np.any(pts < o) or np.any(pts > o + self.cover.size):
            raise DomainError("point outside the extension's bounding box")

    def taylor(self, sample: np.ndarray, pts: np.ndarray) -> np.ndarray:
        q = self.points[sample]
        return self.values[sample] + self.fx[sample] * (pts[:, 0] - q[:, 0]) + self.fy[sample] * (pts[:, 1] - q[:, 1])

    def evaluate(self, pts, exclude=None) -> np.ndarray:
        """Values at ``pts``; samples return their own value exactly.

        ``exclude`` (boolean mask over samples) zeroes the weight of cells
        whose jet is excluded, for locality tests.
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        self._check_box(pts)
        out = np.empty(len(pts))
        d, nn = self.cover.tree.query(pts)
        exact = d == 0
        if exclude is not None:
            exact &= ~np.asarray(exclude)[nn]
        out[exact] = self.values[nn[exact]]
        rest = np.nonzero(~exact)[0]
        if len(rest):
            out[rest] = self._blend(pts[rest], exclude)
        return out

    def _blend(self, pts, exclude=None):
        rows, lv, ij, sample = self.cover.candidates(pts)
        c = self.cover.centers(lv, ij)
        radius = self.cover.cell_size(lv) / 2 * INFLATE
        t = (pts[rows] - c) / radius[:, None]
        w = bump(t[:, 0]) * bump(t[:, 1])
        if exclude is not None:
            w = np.where(np.asarray(exclude)[sample], 0.0, w)
        p = self.taylor(sample, pts[rows])
        num = np.bincount(rows, weights=w * p, minlength=len(pts))
        den = np.bincount(rows, weights=w, minlength=len(pts))
        if np.any(den <= 0):
            raise DomainError("point not covered by any cell")
        return num / den

    def gradient(self, pts, h: float = 1e-3) -> np.ndarray:
        """Central-difference gradient with step ``h``."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        ex, ey = np.array([h, 0.0]), np.array([0.0, h])
        stacked = np.concatenate([pts + ex, pts - ex, pts + ey, pts - ey])
        v = self.evaluate(stacked).reshape(4, len(pts))
        return np.stack([(v[0] - v[1]) / (2 * h), (v[2] - v[3]) / (2 * h)], axis=1)

    def raster(self, h: float, box=RASTER_BOX):
        x0, y0, x1, y1 = box
        xs = np.arange(x0, x1 + h / 2, h)
        ys = np.arange(y0, y1 + h / 2, h)
        X, Y = np.meshgrid(xs, ys)
        Z = self.evaluate(np.stack([X.ravel(), Y.ravel()], axis=1)).reshape(X.shape)
        return xs, ys, Z


def raster_csv(xs, ys, Z) -> str:
    lines = ["x,y,value"]
    for j, y in enumerate(ys):
        for i, x in enumerate(xs):
            lines.append(f"{x:.9g},{y:.9g},{Z[j, i]!r}")
    return "\n".join(lines) + "\n"


def raster_binary(xs, ys, Z, h: float) -> tuple[bytes, str]:
    header = {
        "dims": [len(ys), len(xs)],
        "bbox": [float(xs[0]), float(ys[0]), float(xs[-1]), float(ys[-1])],
        "h": h,
        "dtype": "float32",
        "order": "row-major, rows are y",
    }
    return Z.astype("<f4").tobytes(), json.dumps(header)


@dataclass
class ResidualReport:
    value_max: float
    value_rms: float
    grad_max: float
    grad_rms: float
    value_count: int
    grad_count: int
    h: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def residual_report(ext: ExtensionFn, held_out, curve_points=None, h: float = 1e-3) -> ResidualReport:
    """Value residual on held-out jets and gradient residual against (y, 0).

    ``held_out`` is (points, values); ``curve_points`` defaults to the
    held-out points.
    """
    pts, vals = held_out
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    vals = np.asarray(vals, dtype=float)
    v = np.abs(ext.evaluate(pts) - vals) if len(pts) else np.zeros(0)
    cp = pts if curve_points is None else np.asarray(curve_points, dtype=float).reshape(-1, 2)
    g = ext.gradient(cp, h)
    gres = np.maximum(np.abs(g[:, 0] - cp[:, 1]), np.abs(g[:, 1]))

    def stats(a):
        return (float(a.max()), float(np.sqrt(np.mean(a**2)))) if len(a) else (0.0, 0.0)

    vm, vr = stats(v)
    gm, gr = stats(gres)
    return ResidualReport(vm, vr, gm, gr, len(v), len(gres), h)
