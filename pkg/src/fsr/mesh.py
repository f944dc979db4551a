"""Node-centered grids and their median-dual metrics.

Every mesh stores node coordinates as 2-vectors (1D grids carry ``y = 0``),
an edge list with scaled dual-face normals oriented from the first to the
second node, the dual control volumes, and per-node boundary closure
normals so that each dual cell, boundary cells included, is closed.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import InvalidParameterError, StencilTooSmallError

FAMILIES = ("uniform-1d", "quad", "right-tri", "equilateral-tri", "irregular-tri")
TRI_VARIANTS = {"right": "right-tri", "equilateral": "equilateral-tri", "irregular": "irregular-tri"}

MAX_DEPTH = 3


class Node(NamedTuple):
    position: np.ndarray
    boundary_depth: int


class Edge(NamedTuple):
    node_a: int
    node_b: int
    midpoint: np.ndarray
    normal: np.ndarray


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable node-centered mesh.

    Attributes
    ----------
    coords : (N, 2) node positions.
    edges : (E, 2) node index pairs ``(a, b)`` with ``a < b``.
    normals : (E, 2) scaled dual-face normals directed from ``a`` to ``b``.
    midpoints : (E, 2) edge midpoints.
    volumes : (N,) dual control volumes (lengths in 1D).
    boundary_normals : (N, 2) outward normal of the boundary part of each dual
        cell; zero for interior nodes.
    boundary_depth : (N,) graph distance to the boundary, capped at 3.
    dim : 1 or 2.
    family : grid family tag.
    cells : element connectivity (2D only), kept for plotting and dumps.
    """

    coords: np.ndarray
    edges: np.ndarray
    normals: np.ndarray
    midpoints: np.ndarray
    volumes: np.ndarray
    boundary_normals: np.ndarray
    boundary_depth: np.ndarray
    dim: int
    family: str
    cells: np.ndarray | None = None
    extent: tuple = field(default=(0.0, 1.0, 0.0, 0.0))

    def __post_init__(self):
        for name in ("coords", "edges", "normals", "midpoints", "volumes",
                     "boundary_normals", "boundary_depth"):
            getattr(self, name).setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return self.coords.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def nodes(self) -> list[Node]:
        return [Node(self.coords[i], int(self.boundary_depth[i])) for i in range(self.n_nodes)]

    def edge(self, e: int) -> Edge:
        a, b = self.edges[e]
        return Edge(int(a), int(b), self.midpoints[e], self.normals[e])

    @property
    def adjacency(self) -> list[set[int]]:
        adj: list[set[int]] = [set() for _ in range(self.n_nodes)]
        for a, b in self.edges:
            adj[a].add(int(b))
            adj[b].add(int(a))
        return adj

    @property
    def dual_volumes(self) -> np.ndarray:
        return self.volumes

    @property
    def face_areas(self) -> np.ndarray:
        return np.linalg.norm(self.normals, axis=1)

    @property
    def unit_normals(self) -> np.ndarray:
        return self.normals / self.face_areas[:, None]

    @property
    def boundary_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_depth == 0)

    def closure_defect(self) -> np.ndarray:
        """Per-node vector sum of outward dual-face normals (zero if closed)."""
        acc = self.boundary_normals.copy()
        np.add.at(acc, self.edges[:, 0], self.normals)
        np.add.at(acc, self.edges[:, 1], -self.normals)
        return acc

    def scaled(self, factor: float) -> "Mesh":
        """Copy with all coordinates multiplied by ``factor``."""
        s = float(factor)
        vol_scale = s if self.dim == 1 else s * s
        nrm_scale = 1.0 if self.dim == 1 else s
        lo_x, hi_x, lo_y, hi_y = self.extent
        return Mesh(self.coords * s, self.edges.copy(), self.normals * nrm_scale,
                    self.midpoints * s, self.volumes * vol_scale,
                    self.boundary_normals * nrm_scale, self.boundary_depth.copy(),
                    self.dim, self.family,
                    None if self.cells is None else self.cells.copy(),
                    (lo_x * s, hi_x * s, lo_y * s, hi_y * s))

    def translated(self, shift) -> "Mesh":
        shift = np.asarray(shift, dtype=float)
        lo_x, hi_x, lo_y, hi_y = self.extent
        return Mesh(self.coords + shift, self.edges.copy(), self.normals.copy(),
                    self.midpoints + shift, self.volumes.copy(),
                    self.boundary_normals.copy(), self.boundary_depth.copy(),
                    self.dim, self.family,
                    None if self.cells is None else self.cells.copy(),
                    (lo_x + shift[0], hi_x + shift[0], lo_y + shift[1], hi_y + shift[1]))


def _boundary_depth(n_nodes: int, edges: np.ndarray, boundary: np.ndarray) -> np.ndarray:
    adj: list[list[int]] = [[] for _ in range(n_nodes)]
    for a, b in edges:
        adj[a].append(int(b))
        adj[b].append(int(a))
    depth = np.full(n_nodes, MAX_DEPTH, dtype=np.int64)
    queue = deque()
    for b in boundary:
        depth[b] = 0
        queue.append(int(b))
    while queue:
        j = queue.popleft()
        if depth[j] + 1 >= MAX_DEPTH:
            continue
        for k in adj[j]:
            if depth[k] > depth[j] + 1:
                depth[k] = depth[j] + 1
                queue.append(k)
    return depth


def build_uniform_1d(n: int, x_lo: float = 0.0, x_hi: float = 1.0) -> Mesh:
    """Uniform 1D grid of ``n`` nodes on ``[x_lo, x_hi]``."""
    if n < 7:
        raise StencilTooSmallError(f"uniform 1D grid needs at least 7 nodes, got {n}")
    if not x_hi > x_lo:
        raise InvalidParameterError("x_hi must exceed x_lo")
    x = np.linspace(x_lo, x_hi, n)
    h = (x_hi - x_lo) / (n - 1)
    coords = np.column_stack([x, np.zeros(n)])
    edges = np.column_stack([np.arange(n - 1), np.arange(1, n)])
    normals = np.tile([1.0, 0.0], (n - 1, 1))
    midpoints = 0.5 * (coords[:-1] + coords[1:])
    volumes = np.full(n, h)
    volumes[[0, -1]] = 0.5 * h
    bn = np.zeros((n, 2))
    bn[0, 0] = -1.0
    bn[-1, 0] = 1.0
    idx = np.arange(n)
    depth = np.minimum(np.minimum(idx, n - 1 - idx), MAX_DEPTH)
    return Mesh(coords, edges, normals, midpoints, volumes, bn, depth, 1,
                "uniform-1d", None, (float(x_lo), float(x_hi), 0.0, 0.0))


def _shoelace(poly: np.ndarray) -> np.ndarray:
    """Signed area of polygons given as (C, k, 2)."""
    x, y = poly[..., 0], poly[..., 1]
    return 0.5 * np.sum(x * np.roll(y, -1, axis=-1) - np.roll(x, -1, axis=-1) * y, axis=-1)


def mesh_from_cells(coords: np.ndarray, cells: np.ndarray, family: str,
                    extent: tuple | None = None) -> Mesh:
    """Median-dual metrics for a conforming mesh of CCW triangles or quads."""
    coords = np.asarray(coords, dtype=float)
    cells = np.asarray(cells, dtype=np.int64)
    n_nodes = coords.shape[0]
    n_cells, k = cells.shape
    xc = coords[cells]                                   # (C, k, 2)
    if np.any(_shoelace(xc) <= 0.0):
        raise InvalidParameterError("cells must be non-degenerate and counter-clockwise")
    centroid = xc.mean(axis=1)

    a = cells
    b = np.roll(cells, -1, axis=1)
    xm = 0.5 * (xc + np.roll(xc, -1, axis=1))            # midpoint of local edge i -> i+1
    seg = centroid[:, None, :] - xm                      # dual face: midpoint -> centroid
    # rotate clockwise; for a CCW cell this points from local node i toward i+1
    face = np.stack([seg[..., 1], -seg[..., 0]], axis=-1)

    lo = np.minimum(a, b).ravel()
    hi = np.maximum(a, b).ravel()
    sign = np.where(a.ravel() == lo, 1.0, -1.0)
    keys = lo * n_nodes + hi
    uniq, inv, counts = np.unique(keys, return_inverse=True, return_counts=True)
    n_edges = uniq.size
    edges = np.column_stack([uniq // n_nodes, uniq % n_nodes])
    normals = np.zeros((n_edges, 2))
    np.add.at(normals, inv, face.reshape(-1, 2) * sign[:, None])
    midpoints = 0.5 * (coords[edges[:, 0]] + coords[edges[:, 1]])

    # dual volume share of each vertex: polygon (x_v, m_next, c, m_prev)
    m_prev = np.roll(xm, 1, axis=1)
    sub = np.stack([xc, xm, np.broadcast_to(centroid[:, None, :], xc.shape), m_prev], axis=2)
    share = _shoelace(sub)                               # (C, k)
    volumes = np.zeros(n_nodes)
    np.add.at(volumes, cells.ravel(), share.ravel())

    # boundary edges belong to exactly one cell; split the outward normal in half
    on_boundary = counts[inv] == 1
    ea = a.ravel()[on_boundary]
    eb = b.ravel()[on_boundary]
    t = coords[eb] - coords[ea]
    outward = 0.5 * np.column_stack([t[:, 1], -t[:, 0]])
    bn = np.zeros((n_nodes, 2))
    np.add.at(bn, ea, outward)
    np.add.at(bn, eb, outward)
    boundary = np.unique(np.concatenate([ea, eb]))

    depth = _boundary_depth(n_nodes, edges, boundary)
    if extent is None:
        extent = (coords[:, 0].min(), coords[:, 0].max(), coords[:, 1].min(), coords[:, 1].max())
    return Mesh(coords, edges, normals, midpoints, volumes, bn, depth, 2, family, cells,
                tuple(float(v) for v in extent))


def _lattice(n: int, aspect: float) -> np.ndarray:
    s = np.linspace(0.0, 1.0, n)
    x, y = np.meshgrid(s, s * aspect, indexing="xy")
    return np.column_stack([x.ravel(), y.ravel()])


def _quad_cells(n: int) -> np.ndarray:
    i, j = np.meshgrid(np.arange(n - 1), np.arange(n - 1), indexing="xy")
    p = (i + n * j).ravel()
    return np.column_stack([p, p + 1, p + 1 + n, p + n])


def _check_2d(n: int, aspect: float) -> None:
    if n < 2:
        raise StencilTooSmallError(f"2D grid needs at least 2 nodes per side, got {n}")
    if not aspect > 0:
        raise InvalidParameterError(f"aspect must be positive, got {aspect}")


def build_quad_grid(n: int, aspect: float = 1.0) -> Mesh:
    """``n`` x ``n`` regular quadrilateral grid on ``[0,1] x [0,aspect]``."""
    _check_2d(n, aspect)
    return mesh_from_cells(_lattice(n, aspect), _quad_cells(n), "quad",
                           (0.0, 1.0, 0.0, float(aspect)))


def build_tri_grid(n: int, variant: str = "right", seed: int = 0, aspect: float = 1.0) -> Mesh:
    """Triangular grids derived from the ``n`` x ``n`` quadrilateral lattice.

    ``right`` splits each quad along the same diagonal, ``equilateral`` shifts
    every odd row left by half a spacing and picks the short diagonal, and
    ``irregular`` draws the diagonal of each quad at random and perturbs
    interior nodes by at most a quarter spacing.
    """
    if variant not in TRI_VARIANTS:
        raise InvalidParameterError(
            f"unknown triangle variant {variant!r}; expected one of {sorted(TRI_VARIANTS)}")
    _check_2d(n, aspect)
    coords = _lattice(n, aspect)
    quads = _quad_cells(n)
    p0, p1, p2, p3 = quads.T                             # bl, br, tr, tl
    hx = 1.0 / (n - 1)

    if variant == "right":
        diag = np.zeros(len(quads), dtype=bool)
    elif variant == "equilateral":
        row = np.arange(n)
        coords[:, 0] -= 0.5 * hx * np.repeat(row % 2, n)
        # even bottom row leans left above it: use bl-tr; odd bottom row: br-tl
        diag = np.repeat(np.arange(n - 1) % 2 == 1, n - 1)
    else:
        rng = np.random.default_rng(seed)
        diag = rng.random(len(quads)) < 0.5
        interior = np.ones(n * n, dtype=bool)
        interior[_lattice_boundary(n)] = False
        m = int(interior.sum())
        radius = 0.25 * min(hx, hx * aspect) * rng.random(m)
        angle = 2.0 * np.pi * rng.random(m)
        coords[interior] += np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])

    tri_a = np.where(diag[:, None],
                     np.column_stack([p0, p1, p3]), np.column_stack([p0, p1, p2]))
    tri_b = np.where(diag[:, None],
                     np.column_stack([p1, p2, p3]), np.column_stack([p0, p2, p3]))
    cells = np.vstack([tri_a, tri_b])
    return mesh_from_cells(coords, cells, TRI_VARIANTS[variant])


def _lattice_boundary(n: int) -> np.ndarray:
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    on = (i == 0) | (j == 0) | (i == n - 1) | (j == n - 1)
    return np.flatnonzero(on.ravel())


def build_mesh(family: str, n: int, *, x_lo: float = 0.0, x_hi: float = 1.0,
               aspect: float = 1.0, seed: int = 1) -> Mesh:
    """Dispatch on the family tag."""
    if family == "uniform-1d":
        return build_uniform_1d(n, x_lo, x_hi)
    if family == "quad":
        return build_quad_grid(n, aspect)
    for variant, tag in TRI_VARIANTS.items():
        if family in (tag, variant):
            return build_tri_grid(n, variant, seed=seed, aspect=aspect)
    raise InvalidParameterError(f"unknown grid family {family!r}; expected one of {FAMILIES}")


def disjoint_union(meshes) -> tuple[Mesh, np.ndarray]:
    """One mesh holding unconnected copies of ``meshes``, plus node offsets.

    Nodes and edges keep their order inside each part, so per-node
    quantities computed on the union match those of the separate meshes.
    """
    meshes = list(meshes)
    if not meshes:
        raise InvalidParameterError("need at least one mesh")
    dim = meshes[0].dim
    if any(m.dim != dim for m in meshes):
        raise InvalidParameterError("cannot join meshes of different dimension")
    offsets = np.concatenate([[0], np.cumsum([m.n_nodes for m in meshes])])
    cat = lambda name: np.concatenate([getattr(m, name) for m in meshes])
    edges = np.concatenate([m.edges + o for m, o in zip(meshes, offsets)])
    cells = None
    if all(m.cells is not None for m in meshes) and len({m.cells.shape[1] for m in meshes}) == 1:
        cells = np.concatenate([m.cells + o for m, o in zip(meshes, offsets)])
    ext = np.array([m.extent for m in meshes])
    extent = (ext[:, 0].min(), ext[:, 1].max(), ext[:, 2].min(), ext[:, 3].max())
    fam = meshes[0].family if len({m.family for m in meshes}) == 1 else "mixed"
    union = Mesh(cat("coords"), edges, cat("normals"), cat("midpoints"), cat("volumes"),
                 cat("boundary_normals"), cat("boundary_depth"), dim, fam, cells,
                 tuple(float(v) for v in extent))
    return union, offsets


def effective_spacing(mesh: Mesh) -> float:
    """Mean of sqrt(V_j) in 2D, mean of V_j in 1D."""
    if mesh.dim == 1:
        return float(np.mean(mesh.volumes))
    return float(np.mean(np.sqrt(mesh.volumes)))


def dump_mesh(mesh: Mesh, path) -> None:
    """Plain-text listing, see README for the record layout."""
    with open(path, "w") as fh:
        fh.write(f"# family {mesh.family} dim {mesh.dim} nodes {mesh.n_nodes} edges {mesh.n_edges}\n")
        for i, (x, y) in enumerate(mesh.coords):
            fh.write(f"N {i} {x!r} {y!r} {mesh.volumes[i]!r} {int(mesh.boundary_depth[i])}\n")
        for e, (a, b) in enumerate(mesh.edges):
            nx, ny = mesh.normals[e]
            fh.write(f"E {e} {a} {b} {nx!r} {ny!r}\n")
