import numpy as np
import pytest

from corrop import mesh
from corrop.mesh import BoundaryTag

PAPER_CENTERS = ((0.2, 0.8), (0.7, 0.3))
PAPER_RADII = (0.1, 0.2)


@pytest.mark.parametrize(
    "n,nodes,quads,facets,bottom",
    [(1, 4, 1, 4, 1), (2, 9, 4, 8, 2), (64, 4225, 4096, 256, 64)],
)
def test_unit_square_counts(n, nodes, quads, facets, bottom):
    m = mesh.build_unit_square_quad(n)
    assert m.num_nodes == nodes
    assert m.num_elements == quads
    assert len(m.boundary_facets) == facets
    assert (m.facet_tags == BoundaryTag.BOTTOM).sum() == bottom


def test_unit_square_rejects_zero():
    with pytest.raises(ValueError):
        mesh.build_unit_square_quad(0)


def test_unit_square_positive_areas():
    m = mesh.build_unit_square_quad(5)
    assert np.all(mesh.signed_areas(m) > 0)


def test_voided_mesh_paper_geometry():
    m = mesh.build_voided_square_tri(0.05, PAPER_CENTERS, PAPER_RADII)
    mesh.validate_mesh(m)
    inner = m.facets_with_tag(BoundaryTag.INNER)
    # two separate loops: every inner facet endpoint sits on one of the circles
    dist = [
        np.abs(np.linalg.norm(m.nodes[inner.ravel()] - np.asarray(c), axis=1) - r)
        for c, r in zip(PAPER_CENTERS, PAPER_RADII)
    ]
    on_first = dist[0] <= 1e-12
    on_second = dist[1] <= 1e-12
    assert np.all(on_first | on_second)
    assert on_first.any() and on_second.any()


def test_voided_mesh_rejects_bad_geometry():
    with pytest.raises(ValueError):
        mesh.build_voided_square_tri(0.05, PAPER_CENTERS, (0.0, 0.0))
    with pytest.raises(ValueError):
        mesh.build_voided_square_tri(0.02, ((0.5, 0.5), (0.6, 0.5)), (0.2, 0.2))
    with pytest.raises(ValueError):
        mesh.build_voided_square_tri(0.02, ((0.05, 0.5), (0.7, 0.3)), (0.1, 0.2))


def test_voided_facet_length_sums():
    h = 0.03
    m = mesh.build_voided_square_tri(h, PAPER_CENTERS, PAPER_RADII)
    lengths = m.facet_lengths()
    outer = lengths[m.facet_tags == BoundaryTag.OUTER].sum()
    assert abs(outer - 4.0) <= 1e-6
    inner = lengths[m.facet_tags == BoundaryTag.INNER].sum()
    expected = 2.0 * np.pi * sum(PAPER_RADII)
    # inscribed polygons fall short of the circles by O(h^2)
    assert 0.0 < expected - inner < 8.0 * h**2 / min(PAPER_RADII)


def test_voided_too_coarse_rejected():
    # cells comparable to the radius cannot resolve the circle
    with pytest.raises(ValueError):
        mesh.build_voided_square_tri(0.03, ((0.31, 0.31), (0.7, 0.7)), (0.04, 0.04))


def test_classify_bottom_facet():
    m = mesh.build_unit_square_quad(2)
    mids = 0.5 * (m.nodes[m.boundary_facets[:, 0]] + m.nodes[m.boundary_facets[:, 1]])
    on_bottom = np.abs(mids[:, 1]) < 1e-12
    assert np.all(m.facet_tags[on_bottom] == BoundaryTag.BOTTOM)
    assert np.all(m.facet_tags[~on_bottom] == BoundaryTag.OTHER)


def test_classify_idempotent():
    m = mesh.build_voided_square_tri(0.05, PAPER_CENTERS, PAPER_RADII)
    again = mesh.classify_boundary(m, "p2")
    assert np.array_equal(m.facet_tags, again.facet_tags)


def test_interior_edges_not_in_boundary():
    m = mesh.build_unit_square_quad(3)
    edges = mesh.element_edges(m.elements)
    keys = {}
    for a, b in np.sort(edges, axis=1).tolist():
        keys[(a, b)] = keys.get((a, b), 0) + 1
    boundary = {tuple(sorted(f)) for f in m.boundary_facets.tolist()}
    for edge, count in keys.items():
        assert (count == 1) == (edge in boundary)


def test_boundary_loops_closed():
    m = mesh.build_voided_square_tri(0.04, PAPER_CENTERS, PAPER_RADII)
    counts = np.bincount(m.boundary_facets.ravel(), minlength=m.num_nodes)
    assert set(np.unique(counts[counts > 0])) == {2}


MINIMAL_MSH = """$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
3
1 0 0 0
2 1 0 0
3 0 1 0
$EndNodes
$Elements
1
1 2 2 0 1 1 2 3
$EndElements
"""


def test_gmsh_minimal_document():
    m = mesh.import_gmsh_ascii(MINIMAL_MSH)
    assert m.num_nodes == 3
    assert m.num_elements == 1
    assert len(m.boundary_facets) == 3


def test_gmsh_version_rejected():
    with pytest.raises(ValueError, match="version"):
        mesh.import_gmsh_ascii(MINIMAL_MSH.replace("2.2 0 8", "3.0 0 8"))


def test_gmsh_dangling_node_rejected():
    with pytest.raises(ValueError, match="unknown node"):
        mesh.import_gmsh_ascii(MINIMAL_MSH.replace("1 2 2 0 1 1 2 3", "1 2 2 0 1 1 2 9"))


def test_gmsh_non_triangle_rejected():
    doc = MINIMAL_MSH.replace("3\n1 0 0 0", "4\n1 0 0 0").replace(
        "3 0 1 0\n$EndNodes", "3 1 1 0\n4 0 1 0\n$EndNodes"
    ).replace("1 2 2 0 1 1 2 3", "1 3 2 0 1 1 2 3 4")
    with pytest.raises(ValueError, match="not a triangle"):
        mesh.import_gmsh_ascii(doc)


def _to_msh(m: mesh.Mesh) -> str:
    lines = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat", "$Nodes", str(m.num_nodes)]
    lines += [f"{i + 1} {float(x)!r} {float(y)!r} 0" for i, (x, y) in enumerate(m.nodes)]
    lines += ["$EndNodes", "$Elements", str(m.num_elements)]
    lines += [
        f"{k + 1} 2 2 0 1 {a + 1} {b + 1} {c + 1}"
        for k, (a, b, c) in enumerate(m.elements)
    ]
    lines += ["$EndElements"]
    return "\n".join(lines) + "\n"


def test_gmsh_import_at_scale():
    # a few thousand vertices, the scale of externally meshed voided domains
    src = mesh.build_voided_square_tri(0.015, PAPER_CENTERS, PAPER_RADII)
    imported = mesh.import_gmsh_ascii(_to_msh(src))
    assert imported.num_nodes == src.num_nodes
    assert imported.num_elements == src.num_elements
    tagged = mesh.classify_boundary(imported, "p2")
    for tag in (BoundaryTag.INNER, BoundaryTag.OUTER):
        assert (tagged.facet_tags == tag).sum() == (src.facet_tags == tag).sum()


def test_mesh_text_round_trip():
    src = mesh.build_voided_square_tri(0.04, PAPER_CENTERS, PAPER_RADII)
    text = mesh.mesh_to_text(src)
    back = mesh.mesh_from_text(text)
    assert np.array_equal(src.nodes, back.nodes)
    assert np.array_equal(src.elements, back.elements)
    assert np.array_equal(src.boundary_facets, back.boundary_facets)
    assert np.array_equal(src.facet_tags, back.facet_tags)
    assert mesh.mesh_to_text(back) == text
