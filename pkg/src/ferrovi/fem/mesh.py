"""Triangular meshes with globally oriented edges and tagged boundary facets.

Each edge carries one global orientation: its tangent runs from the lower
to the higher vertex index and its unit normal is that tangent rotated by
-90 degrees. Elements are stored counter-clockwise; local edge k is the
edge opposite local vertex k.

Boundary tags:
    fix, fix_x, fix_y   displacement fixed (all / one component)
    trac                scheduled surface traction
    el                  electrode carrying the scheduled potential
    ins                 insulated, D·n = 0
Boundary facets without an electric tag are grounded electrodes (zero
potential); facets without a mechanical tag are traction free. A facet may
appear once per tag.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

TAGS = ("fix", "fix_x", "fix_y", "trac", "el", "ins")


@dataclass
class Mesh:
    vertices: np.ndarray
    elements: np.ndarray
    boundary: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.elements = np.asarray(self.elements, dtype=np.int64).copy()
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise ValueError("only 2-D triangular meshes are supported")
        if self.elements.ndim != 2 or self.elements.shape[1] != 3:
            raise ValueError("elements must be vertex triples")
        if self.elements.min(initial=0) < 0 or self.elements.max(initial=0) >= len(self.vertices):
            raise ValueError("element connectivity refers to missing vertices")
        area = self._signed_area()
        if np.any(np.abs(area) <= 1e-14 * max(np.ptp(self.vertices, axis=0).max(), 1.0) ** 2):
            raise ValueError("degenerate element")
        flip = area < 0
        self.elements[flip] = self.elements[flip][:, [0, 2, 1]]
        for tag, facets in list(self.boundary.items()):
            if tag not in TAGS:
                raise ValueError(f"unknown boundary tag {tag!r}")
            self.boundary[tag] = np.sort(np.asarray(facets, dtype=np.int64).reshape(-1, 2), axis=1)
        self._build_edges()

    def _signed_area(self):
        x = self.vertices[self.elements]
        a = x[:, 1] - x[:, 0]
        b = x[:, 2] - x[:, 0]
        return 0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])

    def _build_edges(self):
        local = np.stack([self.elements[:, [1, 2]], self.elements[:, [2, 0]], self.elements[:, [0, 1]]], axis=1)
        flat = np.sort(local.reshape(-1, 2), axis=1)
        self.edges, inverse = np.unique(flat, axis=0, return_inverse=True)
        self.element_edges = inverse.reshape(-1, 3)
        # +1 where the counter-clockwise traversal agrees with the global orientation
        self.edge_signs = np.where(local[:, :, 0] < local[:, :, 1], 1.0, -1.0)
        counts = np.bincount(inverse.ravel(), minlength=len(self.edges))
        if counts.max() > 2:
            raise ValueError("non-manifold mesh: an edge is shared by more than two elements")
        self.boundary_edges = np.flatnonzero(counts == 1)
        self.areas = self._signed_area()
        t = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        self.edge_lengths = np.linalg.norm(t, axis=1)
        self.edge_normals = np.stack([t[:, 1], -t[:, 0]], axis=1) / self.edge_lengths[:, None]
        lookup = {tuple(e): i for i, e in enumerate(self.edges)}
        self.tagged_edges = {}
        bset = set(self.boundary_edges.tolist())
        for tag, facets in self.boundary.items():
            idx = []
            for f in facets:
                i = lookup.get(tuple(f))
                if i is None or i not in bset:
                    raise ValueError(f"facet {tuple(f)} tagged {tag!r} is not a boundary edge")
                idx.append(i)
            self.tagged_edges[tag] = np.asarray(sorted(set(idx)), dtype=np.int64)
        # owner element and outward sign of every boundary edge
        owner = np.full(len(self.edges), -1)
        outward = np.zeros(len(self.edges))
        owner[self.element_edges.ravel()] = np.repeat(np.arange(len(self.elements)), 3)
        outward[self.element_edges.ravel()] = self.edge_signs.ravel()
        self.edge_owner = owner
        self.edge_outward_sign = outward

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def edges_with(self, tag: str) -> np.ndarray:
        return self.tagged_edges.get(tag, np.zeros(0, dtype=np.int64))

    def centroids(self) -> np.ndarray:
        return self.vertices[self.elements].mean(axis=1)


# --- generators -------------------------------------------------------------


def rectangle(lx: float, ly: float, nx: int, ny: int, side_tags: dict[str, tuple[str, ...]] | None = None,
              origin=(0.0, 0.0)) -> Mesh:
    """Structured triangulation of [x0, x0+lx] x [y0, y0+ly]; each cell is split along its rising diagonal.

    ``side_tags`` maps "left", "right", "bottom", "top" to boundary tags.
    """
    x0, y0 = origin
    xs = x0 + np.linspace(0.0, lx, nx + 1)
    ys = y0 + np.linspace(0.0, ly, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.stack([X.ravel(), Y.ravel()], axis=1)

    def vid(i, j):
        return j * (nx + 1) + i

    elements = []
    for j in range(ny):
        for i in range(nx):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            elements.append((a, b, c))
            elements.append((a, c, d))
    sides = {
        "bottom": [(vid(i, 0), vid(i + 1, 0)) for i in range(nx)],
        "top": [(vid(i, ny), vid(i + 1, ny)) for i in range(nx)],
        "left": [(vid(0, j), vid(0, j + 1)) for j in range(ny)],
        "right": [(vid(nx, j), vid(nx, j + 1)) for j in range(ny)],
    }
    boundary: dict[str, list] = {}
    for side, tags in (side_tags or {}).items():
        for tag in tags:
            boundary.setdefault(tag, []).extend(sides[side])
    return Mesh(vertices, np.asarray(elements), {k: np.asarray(v) for k, v in boundary.items()})


def patch_square(side: float = 2e-3, n: int = 1) -> Mesh:
    """Square specimen: rollers on left/bottom, electrode + traction on top, grounded bottom, insulated sides."""
    return rectangle(side, side, n, n, {
        "left": ("fix_x", "ins"),
        "right": ("ins",),
        "bottom": ("fix_y",),
        "top": ("el", "trac"),
    })


def cantilever_beam(length: float = 20e-3, height: float = 2e-3, nx: int = 50, ny: int = 5) -> Mesh:
    """Beam clamped and grounded at x = 0, electroded and loaded at the tip, insulated top and bottom."""
    return rectangle(length, height, nx, ny, {
        "left": ("fix",),
        "right": ("el", "trac"),
        "top": ("ins",),
        "bottom": ("ins",),
    }, origin=(0.0, -0.5 * height))


# --- text format ------------------------------------------------------------


def read_mesh(path) -> Mesh:
    """Read the plain text mesh format.

    Line 1 ``dim nv ne nbf``, then nv coordinate lines, ne connectivity
    lines (0-based) and nbf lines ``v0 v1 tag``.
    """
    lines = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    try:
        dim, nv, ne, nbf = (int(v) for v in lines[0])
    except (ValueError, IndexError):
        raise ValueError(f"{path}: bad header, expected 'dim nv ne nbf'") from None
    if dim != 2:
        raise ValueError(f"{path}: only dim = 2 is supported")
    if len(lines) < 1 + nv + ne + nbf:
        raise ValueError(f"{path}: file ends early")
    body = lines[1:]
    vertices = np.array([[float(v) for v in ln[:2]] for ln in body[:nv]])
    elements = np.array([[int(v) for v in ln[:3]] for ln in body[nv:nv + ne]])
    boundary: dict[str, list] = {}
    for ln in body[nv + ne:nv + ne + nbf]:
        if len(ln) != 3:
            raise ValueError(f"{path}: boundary line must be 'v0 v1 tag', got {' '.join(ln)!r}")
        boundary.setdefault(ln[2], []).append((int(ln[0]), int(ln[1])))
    return Mesh(vertices, elements, {k: np.asarray(v) for k, v in boundary.items()})


def write_mesh(path, mesh: Mesh) -> None:
    facets = [(f, tag) for tag, fs in mesh.boundary.items() for f in fs]
    with open(path, "w") as fh:
        fh.write(f"2 {mesh.n_vertices} {mesh.n_elements} {len(facets)}\n")
        for x, y in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        for a, b, c in mesh.elements:
            fh.write(f"{a} {b} {c}\n")
        for (a, b), tag in facets:
            fh.write(f"{a} {b} {tag}\n")
