"""Triangulations of the periodicity cell and the macroscopic domain.

All meshes are flat lists of vertices and positively oriented triangles with
per-triangle subdomain labels and tagged boundary edges.  The cell mesher
resolves the inclusion boundary exactly by an inscribed polygon whose edges
are mesh edges, and keeps the square-edge vertex layout mirror-identical on
opposite sides so that periodic pairing succeeds by coordinate matching.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.spatial import Delaunay

from .errors import GeometryError, MeshFormatError, PeriodicityError

# subdomain labels
OMEGA = 0
Y1 = 1
Y2 = 2
SUBDOMAIN_NAMES = {OMEGA: "Omega", Y1: "Y1", Y2: "Y2"}
SUBDOMAIN_CODES = {v: k for k, v in SUBDOMAIN_NAMES.items()}

# boundary edge tags
OUTER = 1
INCLUSION = 2
BOUNDARY_NAMES = {OUTER: "outer", INCLUSION: "inclusion"}
BOUNDARY_CODES = {v: k for k, v in BOUNDARY_NAMES.items()}

PAIRING_TOL = 1e-9

MESH_FORMAT_NAME = "homogmem-mesh"
MESH_FORMAT_VERSION = 1


def _signed_areas(p: np.ndarray) -> np.ndarray:
    """Signed areas from an (nt, 3, 2) array of triangle corners."""
    u = p[:, 1] - p[:, 0]
    v = p[:, 2] - p[:, 0]
    return 0.5 * (u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])


@dataclass(frozen=True)
class TriMesh:
    """Conforming triangulation; treated as immutable after construction.

    Attributes
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array, positively oriented
    subdomain : (nt,) int array of labels (OMEGA, Y1, Y2)
    boundary_edges : (ne, 2) int array (includes material interfaces)
    boundary_tags : (ne,) int array of tags (OUTER, INCLUSION)
    periodic_pairs : dict mapping slave vertex -> master vertex
    """

    vertices: np.ndarray
    triangles: np.ndarray
    subdomain: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    periodic_pairs: dict[int, int] = field(default_factory=dict)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @cached_property
    def areas(self) -> np.ndarray:
        """Signed triangle areas (positive for valid meshes)."""
        return _signed_areas(self.vertices[self.triangles])

    def subdomain_measure(self, label: int) -> float:
        return float(self.areas[self.subdomain == label].sum())


@dataclass(frozen=True)
class CellGeometry:
    """Elliptic inclusion in the unit periodicity cell.

    Semi-axes ``a >= b > 0`` and piecewise-constant diffusion ``d1``
    (matrix) and ``d2`` (inclusion).  At ``angle_deg = 0`` the major
    semi-axis ``a`` points along the x2-axis; positive angles rotate the
    inclusion counterclockwise, so a 30-degree tilt puts the major axis at
    120 degrees from the x1-axis.  The ellipse must stay strictly inside
    the cell.
    """

    a: float
    b: float
    angle_deg: float = 0.0
    d1: float = 1.0
    d2: float = 1.0
    center: tuple[float, float] = (0.5, 0.5)

    def __post_init__(self):
        if not (0.0 < self.b <= self.a):
            raise GeometryError(
                f"semi-axes must satisfy 0 < b <= a, got a={self.a}, b={self.b}"
            )
        if self.d1 <= 0.0 or self.d2 <= 0.0:
            raise GeometryError("diffusion coefficients must be positive")
        cx, cy = self.center
        ex, ey = self.extents()
        if cx - ex <= 0.0 or cx + ex >= 1.0 or cy - ey <= 0.0 or cy + ey >= 1.0:
            raise GeometryError("ellipse is not strictly inside the unit cell")

    def local_frame(self) -> np.ndarray:
        """Rotation matrix mapping local (minor, major) coordinates to global.

        Local coordinates put semi-axis ``b`` along the first component and
        ``a`` along the second; the columns of the returned matrix are the
        global directions of the two ellipse axes.
        """
        w = math.radians(self.angle_deg)
        return np.array([[math.cos(w), -math.sin(w)],
                         [math.sin(w), math.cos(w)]])

    def extents(self) -> tuple[float, float]:
        """Half-widths of the axis-aligned bounding box of the ellipse."""
        t = math.radians(self.angle_deg)
        ex = math.hypot(self.b * math.cos(t), self.a * math.sin(t))
        ey = math.hypot(self.b * math.sin(t), self.a * math.cos(t))
        return ex, ey

    @property
    def inclusion_measure(self) -> float:
        """Exact ellipse area pi*a*b."""
        return math.pi * self.a * self.b

    def boundary_polygon(self, n_arc: int) -> np.ndarray:
        """Inscribed n_arc-gon of the ellipse, counterclockwise."""
        if n_arc < 8:
            raise GeometryError("n_arc must be at least 8")
        t = 2.0 * np.pi * np.arange(n_arc) / n_arc
        q = np.column_stack([self.b * np.cos(t), self.a * np.sin(t)])
        return q @ self.local_frame().T + np.asarray(self.center)


def _sorted_edges(triangles: np.ndarray) -> np.ndarray:
    e = np.vstack([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    return np.sort(e, axis=1)


def _edge_incidence(triangles: np.ndarray):
    """Unique sorted edges, their multiplicities, and per-slot inverse map."""
    edges = _sorted_edges(triangles)
    uniq, inverse, counts = np.unique(
        edges, axis=0, return_inverse=True, return_counts=True
    )
    return uniq, inverse, counts


def _fix_orientation(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    flip = _signed_areas(vertices[triangles]) < 0.0
    out = triangles.copy()
    out[flip] = out[flip][:, [0, 2, 1]]
    return out


def build_unit_square_mesh(n: int, label: int = OMEGA) -> TriMesh:
    """Structured mesh of the unit square with 2*n^2 right triangles.

    Every cell is split along the bottom-left to top-right diagonal; all
    triangles carry ``label`` (default OMEGA; pass Y1 for an inclusion-free
    periodicity cell) and the boundary is tagged OUTER.
    """
    if n < 1:
        raise ValueError(f"subdivision count must be >= 1, got {n}")
    coords = np.linspace(0.0, 1.0, n + 1)
    xg, yg = np.meshgrid(coords, coords, indexing="xy")
    vertices = np.column_stack([xg.ravel(), yg.ravel()])

    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    v00 = (j * (n + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + (n + 1)
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.vstack([lower, upper])

    side = np.arange(n)
    bottom = np.column_stack([side, side + 1])
    top = bottom + n * (n + 1)
    left = np.column_stack([side * (n + 1), (side + 1) * (n + 1)])
    right = left + n
    boundary_edges = np.sort(np.vstack([bottom, right, top, left]), axis=1)
    boundary_tags = np.full(boundary_edges.shape[0], OUTER)

    return TriMesh(
        vertices=vertices,
        triangles=triangles,
        subdomain=np.full(triangles.shape[0], label, dtype=int),
        boundary_edges=boundary_edges,
        boundary_tags=boundary_tags,
    )


def _point_segment_distance(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Distance from each point to the closed polygonal line through poly."""
    a = poly
    b = np.roll(poly, -1, axis=0)
    d = b - a
    len2 = (d * d).sum(axis=1)
    rel = points[:, None, :] - a[None, :, :]
    t = np.clip((rel * d[None]).sum(axis=2) / len2[None], 0.0, 1.0)
    proj = a[None] + t[:, :, None] * d[None]
    gap = points[:, None, :] - proj
    return np.sqrt((gap * gap).sum(axis=2)).min(axis=1)


def _inside_convex_polygon(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Strict inside test for a counterclockwise convex polygon."""
    a = poly
    d = np.roll(poly, -1, axis=0) - poly
    rel = points[:, None, :] - a[None, :, :]
    cross = d[None, :, 0] * rel[:, :, 1] - d[None, :, 1] * rel[:, :, 0]
    return (cross > 0.0).all(axis=1)


def build_cell_mesh(geom: CellGeometry, h: float, n_arc: int = 128) -> TriMesh:
    """Mesh the unit cell with the inclusion boundary resolved exactly.

    A structured grid of spacing ~h is combined with the inscribed
    ``n_arc``-gon of the ellipse; grid points inside a clearance band around
    the polygon are removed so that every polygon edge is guaranteed to be a
    Delaunay edge (empty diametral circles).  Square-edge vertices are never
    moved, which keeps opposite sides mirror-identical for periodic pairing.
    Triangles are labeled Y2 inside the polygon and Y1 outside; polygon edges
    are tagged INCLUSION, the square frame OUTER.
    """
    if h <= 0.0:
        raise ValueError(f"target edge length must be positive, got {h}")
    poly = geom.boundary_polygon(n_arc)

    edge_len = np.linalg.norm(np.roll(poly, -1, axis=0) - poly, axis=1)
    clear = max(0.35 * h, 0.55 * float(edge_len.max()))
    frame_gap = np.minimum(poly, 1.0 - poly).min()
    if frame_gap <= clear + 0.25 * h:
        raise GeometryError(
            "inclusion too close to the cell boundary for mesh spacing "
            f"h={h} (gap {frame_gap:.3e}, required > {clear + 0.25 * h:.3e})"
        )

    n = max(2, int(round(1.0 / h)))
    coords = np.linspace(0.0, 1.0, n + 1)
    xg, yg = np.meshgrid(coords, coords, indexing="xy")
    grid = np.column_stack([xg.ravel(), yg.ravel()])
    dist = _point_segment_distance(grid, poly)
    grid = grid[dist >= clear]

    points = np.vstack([grid, poly])
    tri = Delaunay(points)
    triangles = _fix_orientation(points, np.asarray(tri.simplices, dtype=np.int64))
    p = points[triangles]
    areas = _signed_areas(p)
    if areas.min() <= 1e-14:
        raise GeometryError("triangulation produced a degenerate triangle")

    first_poly = grid.shape[0]
    ring = first_poly + np.arange(n_arc)
    wanted = np.sort(np.column_stack([ring, np.roll(ring, -1)]), axis=1)
    uniq, inverse, counts = _edge_incidence(triangles)
    present = {tuple(e) for e in uniq}
    for e in wanted:
        if (int(e[0]), int(e[1])) not in present:
            raise GeometryError(
                "inclusion polygon edge missing from triangulation; "
                "decrease n_arc or refine h"
            )

    centroids = p.mean(axis=1)
    subdomain = np.where(_inside_convex_polygon(centroids, poly), Y2, Y1)

    # frame edges have one incident triangle; interface edges separate labels
    nt = triangles.shape[0]
    outer_mask = counts == 1
    tri_of_slot = np.tile(np.arange(nt), 3)
    label_sum = np.zeros(uniq.shape[0])
    np.add.at(label_sum, inverse, subdomain[tri_of_slot].astype(float))
    interface_mask = (counts == 2) & (label_sum == Y1 + Y2)
    wanted_set = {(int(e[0]), int(e[1])) for e in wanted}
    got = {(int(e[0]), int(e[1])) for e in uniq[interface_mask]}
    if got != wanted_set:
        raise GeometryError("material interface does not match the polygon")

    boundary_edges = np.vstack([uniq[outer_mask], uniq[interface_mask]])
    boundary_tags = np.concatenate(
        [
            np.full(int(outer_mask.sum()), OUTER),
            np.full(int(interface_mask.sum()), INCLUSION),
        ]
    )
    on_frame = (
        np.isclose(points[:, 0], 0.0)
        | np.isclose(points[:, 0], 1.0)
        | np.isclose(points[:, 1], 0.0)
        | np.isclose(points[:, 1], 1.0)
    )
    if not on_frame[np.unique(uniq[outer_mask])].all():
        raise GeometryError("open boundary edge off the unit square frame")

    return TriMesh(
        vertices=points,
        triangles=triangles,
        subdomain=subdomain,
        boundary_edges=boundary_edges,
        boundary_tags=boundary_tags,
    )


def build_inclusion_mesh(geom: CellGeometry, h: float, n_arc: int = 256) -> TriMesh:
    """Mesh the inclusion alone, symmetric under both ellipse-axis reflections.

    A quarter unit disk is meshed with concentric rings (radial spacing set by
    ``h`` along the major semi-axis, angular resolution by ``n_arc``), mirrored
    exactly across both axes, scaled to the semi-axes, and rotated into place.
    The exact mirror symmetry makes the assembled operators commute with the
    ellipse reflections to rounding error, so eigenvector means of odd symmetry
    classes vanish instead of picking up mesh noise.  The boundary vertices
    coincide with ``geom.boundary_polygon(n_arc)``, hence the discrete
    inclusion measure matches a cell mesh built with the same ``n_arc``.
    """
    if h <= 0.0:
        raise ValueError(f"target edge length must be positive, got {h}")
    if n_arc < 8 or n_arc % 4:
        raise GeometryError("n_arc must be a multiple of 4 and at least 8")
    quarter_arc = n_arc // 4
    nr = max(2, math.ceil(geom.a / h))

    # quarter unit disk: center plus concentric rings, axis points exact
    pts = [(0.0, 0.0)]
    for j in range(1, nr + 1):
        rho = j / nr
        segs = max(1, round(quarter_arc * rho))
        t = 0.5 * np.pi * np.arange(segs + 1) / segs
        x = rho * np.cos(t)
        y = rho * np.sin(t)
        x[-1] = 0.0
        pts.extend(zip(x, y))
    quarter = np.array(pts)
    tri = Delaunay(quarter)
    if np.asarray(tri.coplanar).size:
        raise GeometryError("quarter-disk triangulation dropped input points")
    qtri = _fix_orientation(quarter, np.asarray(tri.simplices, dtype=np.int64))

    # mirror into the full disk; axis points are shared, so dedupe with a key
    # that ignores the sign of an exactly-zero coordinate
    index: dict[tuple[int, int, int], int] = {}
    verts: list[tuple[float, float]] = []

    def global_index(i: int, s1: int, s2: int) -> int:
        key = (i, s1 if quarter[i, 0] != 0.0 else 1,
               s2 if quarter[i, 1] != 0.0 else 1)
        g = index.get(key)
        if g is None:
            g = len(verts)
            index[key] = g
            verts.append((key[1] * quarter[i, 0], key[2] * quarter[i, 1]))
        return g

    tris = []
    for s1, s2 in ((1, 1), (-1, 1), (1, -1), (-1, -1)):
        for tri_v in qtri:
            mapped = [global_index(int(v), s1, s2) for v in tri_v]
            if s1 * s2 < 0:
                mapped[1], mapped[2] = mapped[2], mapped[1]
            tris.append(mapped)
    local = np.array(verts)
    triangles = np.array(tris, dtype=np.int64)

    points = (local * np.array([geom.b, geom.a])) @ geom.local_frame().T
    points += np.asarray(geom.center)
    areas = _signed_areas(points[triangles])
    if areas.min() <= 1e-14:
        raise GeometryError("triangulation produced a degenerate triangle")

    uniq, _, counts = _edge_incidence(triangles)
    boundary_edges = uniq[counts == 1]
    if boundary_edges.shape[0] != n_arc:
        raise GeometryError("inclusion mesh boundary does not close the ellipse")
    poly_area = 0.5 * n_arc * math.sin(2.0 * np.pi / n_arc) * geom.a * geom.b
    if abs(float(areas.sum()) - poly_area) > 1e-10 * poly_area:
        raise GeometryError("inclusion mesh area mismatch")

    return TriMesh(
        vertices=points,
        triangles=triangles,
        subdomain=np.full(triangles.shape[0], Y2, dtype=np.int64),
        boundary_edges=boundary_edges,
        boundary_tags=np.full(boundary_edges.shape[0], INCLUSION, dtype=np.int64),
    )


def _match_sides(slave_v, slave_key, master_v, master_key, tol, axis_name):
    if slave_v.size != master_v.size:
        raise PeriodicityError(
            f"{axis_name}: {slave_v.size} vertices face {master_v.size}"
        )
    so = np.argsort(slave_key)
    mo = np.argsort(master_key)
    gap = np.abs(slave_key[so] - master_key[mo])
    if slave_v.size and gap.max() > tol:
        raise PeriodicityError(
            f"{axis_name}: opposite-edge vertex mismatch {gap.max():.3e} > {tol:.1e}"
        )
    return dict(zip(slave_v[so].tolist(), master_v[mo].tolist()))


def periodic_pairs(mesh: TriMesh, tol: float = PAIRING_TOL) -> TriMesh:
    """Return a copy of the mesh with slave->master periodic pairs filled.

    Right and top edges are slaves of left and bottom; the three non-origin
    corners all map to the corner at the origin.  Any outer vertex without a
    partner within ``tol`` raises PeriodicityError.
    """
    outer_vertices = np.unique(mesh.boundary_edges[mesh.boundary_tags == OUTER])
    if outer_vertices.size == 0:
        raise PeriodicityError("mesh has no outer boundary to pair")
    x = mesh.vertices[outer_vertices, 0]
    y = mesh.vertices[outer_vertices, 1]
    on_l = np.abs(x) <= tol
    on_r = np.abs(x - 1.0) <= tol
    on_b = np.abs(y) <= tol
    on_t = np.abs(y - 1.0) <= tol
    if not (on_l | on_r | on_b | on_t).all():
        raise PeriodicityError("outer boundary vertex off the unit square frame")

    corners = {}
    for name, mask in (("00", on_l & on_b), ("10", on_r & on_b),
                       ("01", on_l & on_t), ("11", on_r & on_t)):
        idx = outer_vertices[mask]
        if idx.size != 1:
            raise PeriodicityError(f"expected exactly one corner vertex at {name}")
        corners[name] = int(idx[0])

    pairs: dict[int, int] = {
        corners["10"]: corners["00"],
        corners["01"]: corners["00"],
        corners["11"]: corners["00"],
    }
    interior_r = on_r & ~on_b & ~on_t
    interior_l = on_l & ~on_b & ~on_t
    interior_t = on_t & ~on_l & ~on_r
    interior_b = on_b & ~on_l & ~on_r
    pairs.update(
        _match_sides(
            outer_vertices[interior_r], y[interior_r],
            outer_vertices[interior_l], y[interior_l], tol, "right/left",
        )
    )
    pairs.update(
        _match_sides(
            outer_vertices[interior_t], x[interior_t],
            outer_vertices[interior_b], x[interior_b], tol, "top/bottom",
        )
    )
    return replace(mesh, periodic_pairs=pairs)


def submesh(mesh: TriMesh, labels) -> tuple[TriMesh, np.ndarray]:
    """Restrict the mesh to triangles with the given subdomain labels.

    Returns the renumbered submesh and the map from its vertex indices back
    to the parent mesh.  Parent boundary tags are kept where they apply;
    periodic pairs whose vertices survive are carried over.
    """
    labels = {labels} if np.isscalar(labels) else set(labels)
    keep = np.isin(mesh.subdomain, list(labels))
    if not keep.any():
        raise ValueError(f"no triangles with labels {sorted(labels)}")
    tris = mesh.triangles[keep]
    vmap = np.unique(tris)
    renum = -np.ones(mesh.n_vertices, dtype=np.int64)
    renum[vmap] = np.arange(vmap.size)
    new_tris = renum[tris]

    parent_tags = {
        (int(a), int(b)): int(t)
        for (a, b), t in zip(np.sort(mesh.boundary_edges, axis=1), mesh.boundary_tags)
    }
    uniq, _, counts = _edge_incidence(new_tris)
    open_edges = uniq[counts == 1]
    tags = []
    for a, b in open_edges:
        key = (int(vmap[a]), int(vmap[b]))
        tags.append(parent_tags.get(tuple(sorted(key)), OUTER))
    pairs = {
        int(renum[s]): int(renum[m])
        for s, m in mesh.periodic_pairs.items()
        if renum[s] >= 0 and renum[m] >= 0
    }
    sub = TriMesh(
        vertices=mesh.vertices[vmap],
        triangles=new_tris,
        subdomain=mesh.subdomain[keep],
        boundary_edges=open_edges,
        boundary_tags=np.asarray(tags, dtype=int),
        periodic_pairs=pairs,
    )
    return sub, vmap


def validate_mesh(mesh: TriMesh, expected_measure: float | None = None,
                  pair_tol: float = 1e-10) -> None:
    """Check orientation, conformity, tags, and periodic-pair geometry."""
    if mesh.areas.min() <= 0.0:
        raise ValueError("mesh has a non-positively-oriented triangle")
    uniq, _, counts = _edge_incidence(mesh.triangles)
    if counts.max() > 2:
        raise ValueError("non-conforming mesh: edge shared by >2 triangles")
    listed = {(int(a), int(b)) for a, b in np.sort(mesh.boundary_edges, axis=1)}
    all_edges = {(int(u[0]), int(u[1])) for u in uniq}
    for e, c in zip(uniq, counts):
        if c == 1 and (int(e[0]), int(e[1])) not in listed:
            raise ValueError(f"open edge {tuple(e)} missing from boundary_edges")
    for key in listed:
        if key not in all_edges:
            raise ValueError(f"boundary edge {key} not present in the mesh")
    if not np.isin(mesh.subdomain, [OMEGA, Y1, Y2]).all():
        raise ValueError("unknown subdomain label")
    if expected_measure is not None:
        total = float(mesh.areas.sum())
        if abs(total - expected_measure) > 1e-12 * max(1.0, expected_measure):
            raise ValueError(
                f"triangle areas sum to {total!r}, expected {expected_measure!r}"
            )
    for s, m in mesh.periodic_pairs.items():
        delta = mesh.vertices[s] - mesh.vertices[m]
        snapped = np.round(delta)
        if np.abs(delta - snapped).max() > pair_tol or not snapped.any():
            raise ValueError(f"pair {s}->{m} offset {delta} is not a unit translation")
        if not np.isin(snapped, [-1.0, 0.0, 1.0]).all():
            raise ValueError(f"pair {s}->{m} offset {delta} exceeds one cell")


def mesh_to_json(mesh: TriMesh) -> dict:
    """Native JSON-serializable mesh representation."""
    return {
        "format": MESH_FORMAT_NAME,
        "version": MESH_FORMAT_VERSION,
        "vertices": mesh.vertices.tolist(),
        "triangles": mesh.triangles.tolist(),
        "subdomain": [SUBDOMAIN_NAMES[int(s)] for s in mesh.subdomain],
        "boundary_edges": mesh.boundary_edges.tolist(),
        "boundary_tags": [BOUNDARY_NAMES[int(t)] for t in mesh.boundary_tags],
        "periodic_pairs": {str(s): int(m) for s, m in mesh.periodic_pairs.items()},
    }


def mesh_from_json(data: dict) -> TriMesh:
    if data.get("format") != MESH_FORMAT_NAME:
        raise MeshFormatError("not a native mesh document")
    if data.get("version") != MESH_FORMAT_VERSION:
        raise MeshFormatError(f"unsupported mesh document version {data.get('version')}")
    try:
        return TriMesh(
            vertices=np.asarray(data["vertices"], dtype=float),
            triangles=np.asarray(data["triangles"], dtype=np.int64),
            subdomain=np.asarray(
                [SUBDOMAIN_CODES[s] for s in data["subdomain"]], dtype=int
            ),
            boundary_edges=np.asarray(data["boundary_edges"], dtype=np.int64),
            boundary_tags=np.asarray(
                [BOUNDARY_CODES[t] for t in data["boundary_tags"]], dtype=int
            ),
            periodic_pairs={int(s): int(m) for s, m in data["periodic_pairs"].items()},
        )
    except KeyError as err:
        raise MeshFormatError(f"mesh document missing field {err}") from err


def save_mesh_json(mesh: TriMesh, path) -> None:
    with open(path, "w") as fh:
        json.dump(mesh_to_json(mesh), fh)


def load_mesh_json(path) -> TriMesh:
    with open(path) as fh:
        return mesh_from_json(json.load(fh))


_MSH_LINE = 1
_MSH_TRIANGLE = 2
_MSH_POINT = 15


def read_msh(path, subdomain_map: dict[int, str] | None = None,
             boundary_map: dict[int, str] | None = None) -> TriMesh:
    """Read the ASCII MSH 2.2 subset: nodes, 2-node lines, 3-node triangles.

    Physical-group integers select subdomain labels for triangles and tags
    for boundary lines through the two maps (defaults mirror write_msh).
    Point elements are ignored; anything else raises MeshFormatError.
    """
    sub_map = {0: "Omega", 1: "Y1", 2: "Y2"} if subdomain_map is None else subdomain_map
    bnd_map = {1: "outer", 2: "inclusion"} if boundary_map is None else boundary_map

    with open(path) as fh:
        lines = [ln.strip() for ln in fh]
    sections: dict[str, list[str]] = {}
    i = 0
    while i < len(lines):
        ln = lines[i]
        if ln.startswith("$") and not ln.startswith("$End"):
            name = ln[1:]
            j = i + 1
            body = []
            while j < len(lines) and lines[j] != f"$End{name}":
                body.append(lines[j])
                j += 1
            if j == len(lines):
                raise MeshFormatError(f"unterminated section ${name}")
            sections[name] = body
            i = j + 1
        else:
            i += 1

    if "MeshFormat" not in sections:
        raise MeshFormatError("missing $MeshFormat section")
    fmt = sections["MeshFormat"][0].split()
    if fmt[0] != "2.2":
        raise MeshFormatError(f"unsupported MSH version {fmt[0]} (need 2.2)")
    if fmt[1] != "0":
        raise MeshFormatError("binary MSH files are not supported")
    if "Nodes" not in sections or "Elements" not in sections:
        raise MeshFormatError("missing $Nodes or $Elements section")

    node_lines = sections["Nodes"]
    n_nodes = int(node_lines[0])
    if len(node_lines) - 1 != n_nodes:
        raise MeshFormatError("node count does not match $Nodes header")
    ids = np.empty(n_nodes, dtype=np.int64)
    coords = np.empty((n_nodes, 2))
    for k, ln in enumerate(node_lines[1:]):
        parts = ln.split()
        ids[k] = int(parts[0])
        coords[k] = (float(parts[1]), float(parts[2]))
    renum = {int(v): k for k, v in enumerate(ids)}

    tris, sub, edges, tags = [], [], [], []
    elem_lines = sections["Elements"]
    if len(elem_lines) - 1 != int(elem_lines[0]):
        raise MeshFormatError("element count does not match $Elements header")
    for ln in elem_lines[1:]:
        parts = [int(p) for p in ln.split()]
        etype, ntags = parts[1], parts[2]
        phys = parts[3] if ntags >= 1 else 0
        nodes = parts[3 + ntags:]
        if etype == _MSH_POINT:
            continue
        if etype == _MSH_TRIANGLE:
            if phys not in sub_map:
                raise MeshFormatError(f"unmapped physical group {phys} for a triangle")
            tris.append([renum[v] for v in nodes])
            sub.append(SUBDOMAIN_CODES[sub_map[phys]])
        elif etype == _MSH_LINE:
            if phys not in bnd_map:
                raise MeshFormatError(f"unmapped physical group {phys} for a line")
            edges.append(sorted(renum[v] for v in nodes))
            tags.append(BOUNDARY_CODES[bnd_map[phys]])
        else:
            raise MeshFormatError(f"unsupported element type {etype}")
    if not tris:
        raise MeshFormatError("file contains no triangles")

    triangles = _fix_orientation(coords, np.asarray(tris, dtype=np.int64))
    if edges:
        boundary_edges = np.asarray(edges, dtype=np.int64)
        boundary_tags = np.asarray(tags, dtype=int)
    else:
        uniq, _, counts = _edge_incidence(triangles)
        boundary_edges = uniq[counts == 1]
        boundary_tags = np.full(boundary_edges.shape[0], OUTER)
    return TriMesh(
        vertices=coords,
        triangles=triangles,
        subdomain=np.asarray(sub, dtype=int),
        boundary_edges=boundary_edges,
        boundary_tags=boundary_tags,
    )


def write_msh(mesh: TriMesh, path) -> None:
    """Write the mesh as ASCII MSH 2.2 with physical = subdomain/tag codes."""
    with open(path, "w") as fh:
        fh.write("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n")
        fh.write(f"$Nodes\n{mesh.n_vertices}\n")
        for k, (x, y) in enumerate(mesh.vertices, start=1):
            fh.write(f"{k} {float(x)!r} {float(y)!r} 0\n")
        fh.write("$EndNodes\n")
        n_elem = mesh.n_triangles + mesh.boundary_edges.shape[0]
        fh.write(f"$Elements\n{n_elem}\n")
        eid = 1
        for (va, vb), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
            fh.write(f"{eid} 1 2 {int(tag)} {int(tag)} {va + 1} {vb + 1}\n")
            eid += 1
        for tri, lab in zip(mesh.triangles, mesh.subdomain):
            fh.write(
                f"{eid} 2 2 {int(lab)} {int(lab)} "
                f"{tri[0] + 1} {tri[1] + 1} {tri[2] + 1}\n"
            )
            eid += 1
        fh.write("$EndElements\n")
