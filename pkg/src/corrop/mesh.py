"""Meshes for the two model domains.

Two builders cover the geometries used throughout: a structured quadrilateral
grid on the unit square, and a structured triangulation of the unit square
with circular voids cut out (elements whose centroid falls inside a void are
dropped, then the ragged hole boundary is snapped radially onto the circle).
An ASCII Gmsh (MSH 2.2) importer handles externally generated triangulations.

Boundary facets are the mesh edges owned by exactly one element; they are
tagged geometrically, never via mesh-format metadata.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np


class BoundaryTag(enum.IntEnum):
    BOTTOM = 0  # y = 0 edge of the unit square
    INNER = 1   # circular void boundaries
    OUTER = 2   # outer square perimeter of the voided domain
    OTHER = 3   # remaining (or not yet classified) boundary


@dataclass(frozen=True)
class Mesh:
    """Immutable 2D mesh: nodes, uniform elements, tagged boundary facets."""

    nodes: np.ndarray            # (n, 2) float64
    elements: np.ndarray         # (E, 3) tri3 or (E, 4) quad4, int64
    kind: str                    # "tri3" | "quad4"
    boundary_facets: np.ndarray  # (F, 2) int64 node pairs
    facet_tags: np.ndarray       # (F,) int64, BoundaryTag values

    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def num_elements(self) -> int:
        return self.elements.shape[0]

    def facets_with_tag(self, tag: BoundaryTag) -> np.ndarray:
        return self.boundary_facets[self.facet_tags == int(tag)]

    def facet_lengths(self) -> np.ndarray:
        a = self.nodes[self.boundary_facets[:, 0]]
        b = self.nodes[self.boundary_facets[:, 1]]
        return np.linalg.norm(b - a, axis=1)


def _as_mesh(nodes, elements, kind, facets, tags) -> Mesh:
    return Mesh(
        nodes=np.ascontiguousarray(nodes, dtype=np.float64),
        elements=np.ascontiguousarray(elements, dtype=np.int64),
        kind=kind,
        boundary_facets=np.ascontiguousarray(facets, dtype=np.int64),
        facet_tags=np.ascontiguousarray(tags, dtype=np.int64),
    )


def element_edges(elements: np.ndarray) -> np.ndarray:
    """All directed edges of all elements, element by element, (E*nen, 2)."""
    return np.stack([elements, np.roll(elements, -1, axis=1)], axis=2).reshape(-1, 2)


def boundary_edges(elements: np.ndarray) -> np.ndarray:
    """Edges owned by exactly one element, in deterministic first-seen order."""
    edges = element_edges(elements)
    key = np.sort(edges, axis=1)
    _, first, counts = np.unique(
        key[:, 0] * (key.max() + 1) + key[:, 1], return_index=True, return_counts=True
    )
    once = np.sort(first[counts == 1])
    return edges[once]


def build_unit_square_quad(n: int) -> Mesh:
    """Structured n-by-n quadrilateral mesh of [0,1]^2.

    The y=0 facets carry BoundaryTag.BOTTOM, all other boundary facets
    BoundaryTag.OTHER.
    """
    if n < 1:
        raise ValueError(f"need at least one subdivision per side, got n={n}")
    xs = np.linspace(0.0, 1.0, n + 1)
    gx, gy = np.meshgrid(xs, xs, indexing="xy")
    nodes = np.column_stack([gx.ravel(), gy.ravel()])  # row-major, y-major rows

    idx = np.arange((n + 1) * (n + 1)).reshape(n + 1, n + 1)  # idx[j, i] at (x_i, y_j)
    i0 = idx[:-1, :-1].ravel()
    i1 = idx[:-1, 1:].ravel()
    i2 = idx[1:, 1:].ravel()
    i3 = idx[1:, :-1].ravel()
    elements = np.column_stack([i0, i1, i2, i3])  # counter-clockwise

    facets = boundary_edges(elements)
    mesh = _as_mesh(nodes, elements, "quad4", facets, np.full(len(facets), int(BoundaryTag.OTHER)))
    mesh = classify_boundary(mesh, "p1", tol=0.25 / n)
    validate_mesh(mesh)
    return mesh


def build_voided_square_tri(
    h: float,
    centers: tuple[tuple[float, float], tuple[float, float]] = ((0.2, 0.8), (0.7, 0.3)),
    radii: tuple[float, float] = (0.1, 0.2),
) -> Mesh:
    """Structured triangulation of the unit square with circular voids removed.

    Triangles whose centroid lies inside a void are dropped; nodes on the
    resulting hole boundaries are snapped radially onto their circle so each
    hole is a polygon inscribed in the circle (geometry error O(h^2)).
    Facets on a circle carry BoundaryTag.INNER, facets on the outer square
    BoundaryTag.OUTER.
    """
    centers_a = np.asarray(centers, dtype=float)
    radii_a = np.asarray(radii, dtype=float)
    if np.any(radii_a <= 0.0) or not h < radii_a.min():
        raise ValueError(f"mesh size h={h} must be smaller than every void radius {radii}")
    for c, r in zip(centers_a, radii_a):
        if not (r < c[0] < 1.0 - r and r < c[1] < 1.0 - r):
            raise ValueError(f"void at {tuple(c)} with radius {r} is not strictly inside the square")
    for i in range(len(radii_a)):
        for j in range(i + 1, len(radii_a)):
            if np.linalg.norm(centers_a[i] - centers_a[j]) <= radii_a[i] + radii_a[j]:
                raise ValueError("voids overlap")

    n = max(2, int(round(1.0 / h)))
    xs = np.linspace(0.0, 1.0, n + 1)
    gx, gy = np.meshgrid(xs, xs, indexing="xy")
    nodes = np.column_stack([gx.ravel(), gy.ravel()])
    idx = np.arange((n + 1) * (n + 1)).reshape(n + 1, n + 1)
    i0 = idx[:-1, :-1].ravel()
    i1 = idx[:-1, 1:].ravel()
    i2 = idx[1:, 1:].ravel()
    i3 = idx[1:, :-1].ravel()
    tris = np.concatenate(
        [np.column_stack([i0, i1, i2]), np.column_stack([i0, i2, i3])], axis=0
    )
    # interleave the two triangles of each cell so element order follows cells
    order = np.arange(len(tris)).reshape(2, -1).T.ravel()
    tris = tris[order]

    centroids = nodes[tris].mean(axis=1)
    inside = np.zeros(len(tris), dtype=bool)
    for c, r in zip(centers_a, radii_a):
        inside |= np.linalg.norm(centroids - c, axis=1) < r
    tris = tris[~inside]

    used = np.unique(tris)
    remap = -np.ones(len(nodes), dtype=np.int64)
    remap[used] = np.arange(len(used))
    nodes = nodes[used]
    tris = remap[tris]

    # snap hole-loop nodes onto their circle
    facets = boundary_edges(tris)
    mids = 0.5 * (nodes[facets[:, 0]] + nodes[facets[:, 1]])
    on_square = (
        (np.abs(mids[:, 0]) < 1e-12)
        | (np.abs(mids[:, 0] - 1.0) < 1e-12)
        | (np.abs(mids[:, 1]) < 1e-12)
        | (np.abs(mids[:, 1] - 1.0) < 1e-12)
    )
    hole_nodes = np.unique(facets[~on_square])
    cell = 1.0 / n
    for node in hole_nodes:
        x = nodes[node]
        dists = np.abs(np.linalg.norm(x - centers_a, axis=1) - radii_a)
        k = int(np.argmin(dists))
        if dists[k] > 2.0 * cell:
            raise ValueError(f"hole boundary node at {tuple(x)} is not near any void")
        direction = x - centers_a[k]
        nodes[node] = centers_a[k] + radii_a[k] * direction / np.linalg.norm(direction)

    # a triangle with all three vertices snapped onto one circle lies inside
    # the void (any chord triangle is contained in the disk), so drop it
    on_circle = np.zeros((len(nodes), len(radii_a)), dtype=bool)
    for k, (c, r) in enumerate(zip(centers_a, radii_a)):
        on_circle[:, k] = np.abs(np.linalg.norm(nodes - c, axis=1) - r) <= 1e-12
    cap = np.zeros(len(tris), dtype=bool)
    for k in range(len(radii_a)):
        cap |= on_circle[tris, k].all(axis=1)
    tris = tris[~cap]

    used = np.unique(tris)
    remap = -np.ones(len(nodes), dtype=np.int64)
    remap[used] = np.arange(len(used))
    nodes = nodes[used]
    tris = remap[tris]
    facets = boundary_edges(tris)

    _relax_pinched_triangles(nodes, tris, np.unique(facets), floor=1e-12)

    mesh = _as_mesh(nodes, tris, "tri3", facets, np.full(len(facets), int(BoundaryTag.OTHER)))
    mesh = classify_boundary(mesh, "p2", tol=cell / 4.0, circles=list(zip(map(tuple, centers_a), radii_a)))
    for k, r in enumerate(radii_a):
        on_circle = _facets_on_circle(mesh, centers_a[k], r, cell / 4.0)
        if on_circle.sum() < 8:
            raise ValueError(f"mesh size h={h} too coarse: void {k} resolved by {int(on_circle.sum())} facets")
    validate_mesh(mesh)
    return mesh


def _relax_pinched_triangles(nodes, tris, boundary_nodes, floor, max_passes=30) -> None:
    """Jacobi-relax interior vertices around snapped holes until no triangle
    is inverted or thinner than the area floor. Boundary nodes never move, so
    the snapped circles stay exact."""
    fixed = np.zeros(len(nodes), dtype=bool)
    fixed[boundary_nodes] = True
    edges = np.unique(np.sort(element_edges(tris), axis=1), axis=0)
    for _ in range(max_passes):
        d1 = nodes[tris[:, 1]] - nodes[tris[:, 0]]
        d2 = nodes[tris[:, 2]] - nodes[tris[:, 0]]
        areas = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        bad = areas < floor
        if not bad.any():
            return
        seed = np.zeros(len(nodes), dtype=bool)
        seed[np.unique(tris[bad])] = True
        ring = seed.copy()
        ring[edges[seed[edges[:, 0]], 1]] = True
        ring[edges[seed[edges[:, 1]], 0]] = True
        movable = ring & ~fixed
        if not movable.any():
            break
        sums = np.zeros_like(nodes)
        counts = np.zeros(len(nodes))
        np.add.at(sums, edges[:, 0], nodes[edges[:, 1]])
        np.add.at(sums, edges[:, 1], nodes[edges[:, 0]])
        np.add.at(counts, edges[:, 0], 1.0)
        np.add.at(counts, edges[:, 1], 1.0)
        nodes[movable] = sums[movable] / counts[movable, None]
    raise ValueError("could not untangle the snapped mesh; refine h or move the voids")


def _facets_on_circle(mesh: Mesh, center, radius, tol) -> np.ndarray:
    mids = 0.5 * (mesh.nodes[mesh.boundary_facets[:, 0]] + mesh.nodes[mesh.boundary_facets[:, 1]])
    return np.abs(np.linalg.norm(mids - np.asarray(center), axis=1) - radius) <= tol


def classify_boundary(
    mesh: Mesh,
    problem_id: str,
    tol: float | None = None,
    circles: list[tuple[tuple[float, float], float]] | None = None,
) -> Mesh:
    """Tag boundary facets geometrically; raises if any facet stays unclassified.

    problem "p1": facet midpoints with |y| <= tol are BOTTOM, the rest OTHER.
    problem "p2": midpoints within tol of a circle are INNER, within tol of
    the unit-square perimeter OUTER. Circles default to a fit of each
    non-perimeter boundary loop (centroid of the loop nodes, mean radius),
    so imported meshes need no geometry metadata. Idempotent.
    """
    if tol is None:
        tol = 0.25 * float(np.median(mesh.facet_lengths()))
    facets = mesh.boundary_facets
    mids = 0.5 * (mesh.nodes[facets[:, 0]] + mesh.nodes[facets[:, 1]])
    tags = np.full(len(facets), int(BoundaryTag.OTHER), dtype=np.int64)

    if problem_id == "p1":
        tags[np.abs(mids[:, 1]) <= tol] = int(BoundaryTag.BOTTOM)
        return replace(mesh, facet_tags=tags)
    if problem_id != "p2":
        raise ValueError(f"unknown problem id {problem_id!r}")

    on_square = (
        (np.abs(mids[:, 0]) <= tol)
        | (np.abs(mids[:, 0] - 1.0) <= tol)
        | (np.abs(mids[:, 1]) <= tol)
        | (np.abs(mids[:, 1] - 1.0) <= tol)
    )
    tags[on_square] = int(BoundaryTag.OUTER)
    if circles is None:
        circles = _fit_hole_circles(mesh, facets[~on_square])
    unresolved = ~on_square
    for center, radius in circles:
        hit = unresolved & (np.abs(np.linalg.norm(mids - np.asarray(center), axis=1) - radius) <= tol)
        tags[hit] = int(BoundaryTag.INNER)
        unresolved &= ~hit
    if unresolved.any():
        where = mids[unresolved][0]
        raise ValueError(f"boundary facet near {tuple(where)} matches neither the square nor a void")
    return replace(mesh, facet_tags=tags)


def _fit_hole_circles(mesh: Mesh, hole_facets: np.ndarray):
    """Group non-perimeter facets into loops and fit one circle per loop."""
    circles = []
    remaining = {tuple(sorted(f)) for f in hole_facets.tolist()}
    adjacency: dict[int, list[tuple[int, int]]] = {}
    for f in remaining:
        adjacency.setdefault(f[0], []).append(f)
        adjacency.setdefault(f[1], []).append(f)
    while remaining:
        start = min(remaining)
        loop_nodes = set()
        stack = [start]
        seen = {start}
        while stack:
            f = stack.pop()
            loop_nodes.update(f)
            for node in f:
                for g in adjacency[node]:
                    if g in remaining and g not in seen:
                        seen.add(g)
                        stack.append(g)
        remaining -= seen
        pts = mesh.nodes[sorted(loop_nodes)]
        center = pts.mean(axis=0)
        radius = float(np.linalg.norm(pts - center, axis=1).mean())
        circles.append(((float(center[0]), float(center[1])), radius))
    return circles


def import_gmsh_ascii(text: str) -> Mesh:
    """Parse an ASCII Gmsh MSH 2.2 document holding a triangulation.

    Nodes are renumbered contiguously (unreferenced nodes dropped), boundary
    facets are derived as edges owned by exactly one triangle, and all facet
    tags are left as OTHER: run classify_boundary afterwards. Line and point
    elements in the file are ignored; any non-triangle 2D/3D element is an
    error, as is a version other than 2.2 or a dangling node reference.
    """
    lines = text.splitlines()
    sections: dict[str, list[str]] = {}
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        if line.startswith("$") and not line.startswith("$End"):
            name = line[1:]
            j = i + 1
            body = []
            while j < len(lines) and lines[j].strip() != f"$End{name}":
                body.append(lines[j].strip())
                j += 1
            if j == len(lines):
                raise ValueError(f"unterminated section ${name}")
            sections[name] = body
            i = j + 1
        else:
            i += 1

    if "MeshFormat" not in sections or not sections["MeshFormat"]:
        raise ValueError("missing $MeshFormat section")
    version = sections["MeshFormat"][0].split()[0]
    if version != "2.2":
        raise ValueError(f"unsupported MSH version {version}, need 2.2")
    if "Nodes" not in sections or "Elements" not in sections:
        raise ValueError("missing $Nodes or $Elements section")

    node_lines = sections["Nodes"]
    n_nodes = int(node_lines[0])
    ids = np.empty(n_nodes, dtype=np.int64)
    coords = np.empty((n_nodes, 2), dtype=np.float64)
    for k, line in enumerate(node_lines[1 : 1 + n_nodes]):
        parts = line.split()
        ids[k] = int(parts[0])
        coords[k] = (float(parts[1]), float(parts[2]))
    id_to_index = {int(v): k for k, v in enumerate(ids)}

    elem_lines = sections["Elements"]
    n_elems = int(elem_lines[0])
    tris = []
    for line in elem_lines[1 : 1 + n_elems]:
        parts = line.split()
        etype = int(parts[1])
        ntags = int(parts[2])
        conn = parts[3 + ntags :]
        if etype in (1, 15):  # boundary lines and points: tagged geometrically instead
            continue
        if etype != 2:
            raise ValueError(f"element type {etype} is not a triangle")
        try:
            tris.append([id_to_index[int(c)] for c in conn])
        except KeyError as exc:
            raise ValueError(f"element references unknown node {exc}") from None
    if not tris:
        raise ValueError("no triangles in file")
    tris_a = np.asarray(tris, dtype=np.int64)

    used = np.unique(tris_a)
    remap = -np.ones(n_nodes, dtype=np.int64)
    remap[used] = np.arange(len(used))
    nodes = coords[used]
    tris_a = remap[tris_a]

    facets = boundary_edges(tris_a)
    mesh = _as_mesh(nodes, tris_a, "tri3", facets, np.full(len(facets), int(BoundaryTag.OTHER)))
    validate_mesh(mesh, require_tags=False)
    return mesh


def signed_areas(mesh: Mesh) -> np.ndarray:
    """Signed triangle areas, or the minimal corner Jacobian of each quad.

    The quad map has a bilinear Jacobian determinant, so positivity at the
    four corners implies positivity at every interior quadrature point.
    """
    pts = mesh.nodes[mesh.elements]
    if mesh.kind == "tri3":
        d1 = pts[:, 1] - pts[:, 0]
        d2 = pts[:, 2] - pts[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    cross = []
    for k in range(4):
        a = pts[:, (k + 1) % 4] - pts[:, k]
        b = pts[:, (k + 3) % 4] - pts[:, k]
        cross.append(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])
    return np.min(np.stack(cross, axis=1), axis=1) / 4.0


def validate_mesh(mesh: Mesh, require_tags: bool = True) -> None:
    """Check the structural invariants; raises ValueError on the first failure."""
    if mesh.kind not in ("tri3", "quad4"):
        raise ValueError(f"unknown element kind {mesh.kind!r}")
    nen = 3 if mesh.kind == "tri3" else 4
    if mesh.elements.shape[1] != nen:
        raise ValueError("element connectivity does not match the element kind")
    if mesh.elements.min() < 0 or mesh.elements.max() >= mesh.num_nodes:
        raise ValueError("element references a node outside the mesh")
    areas = signed_areas(mesh)
    if np.any(areas <= 0):
        bad = int(np.argmin(areas))
        raise ValueError(f"element {bad} is degenerate or inverted (area {areas[bad]:g})")

    derived = {tuple(sorted(e)) for e in boundary_edges(mesh.elements).tolist()}
    listed = {tuple(sorted(f)) for f in mesh.boundary_facets.tolist()}
    if derived != listed:
        raise ValueError("boundary facet list does not match the edges owned by one element")
    counts = np.bincount(mesh.boundary_facets.ravel(), minlength=mesh.num_nodes)
    touched = counts[counts > 0]
    if np.any(touched != 2):
        raise ValueError("boundary facets do not form closed loops")
    if require_tags and len(mesh.facet_tags) != len(mesh.boundary_facets):
        raise ValueError("facet tag list length mismatch")


def mesh_to_text(mesh: Mesh) -> str:
    """Plain-text serialization with bit-exact float round trip."""
    out = [f"nodes {mesh.num_nodes}"]
    out += [f"{float(x)!r} {float(y)!r}" for x, y in mesh.nodes]
    out.append(f"elements {mesh.num_elements} {mesh.kind}")
    out += [" ".join(str(i) for i in elem) for elem in mesh.elements]
    out.append(f"facets {len(mesh.boundary_facets)}")
    out += [
        f"{f[0]} {f[1]} {int(t)}"
        for f, t in zip(mesh.boundary_facets, mesh.facet_tags)
    ]
    return "\n".join(out) + "\n"


def mesh_from_text(text: str) -> Mesh:
    lines = text.splitlines()
    pos = 0

    def expect(keyword: str) -> list[str]:
        nonlocal pos
        parts = lines[pos].split()
        if parts[0] != keyword:
            raise ValueError(f"expected {keyword!r} at line {pos + 1}, got {lines[pos]!r}")
        pos += 1
        return parts

    head = expect("nodes")
    n = int(head[1])
    nodes = np.array([[float(v) for v in lines[pos + k].split()] for k in range(n)])
    pos += n
    head = expect("elements")
    ne, kind = int(head[1]), head[2]
    elements = np.array([[int(v) for v in lines[pos + k].split()] for k in range(ne)], dtype=np.int64)
    pos += ne
    head = expect("facets")
    nf = int(head[1])
    rows = np.array([[int(v) for v in lines[pos + k].split()] for k in range(nf)], dtype=np.int64)
    facets = rows[:, :2] if nf else np.empty((0, 2), dtype=np.int64)
    tags = rows[:, 2] if nf else np.empty((0,), dtype=np.int64)
    return _as_mesh(nodes, elements, kind, facets, tags)
