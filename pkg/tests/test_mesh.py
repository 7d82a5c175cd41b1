import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from brinkman.config import data_path, fixture_manifest, load_fixture
from brinkman.mesh import (INFLOW, OUTFLOW, WALL, Mesh, MeshError, boundary_loops, check_euler,
                           euler_characteristic, extract_fluid_submesh, generate_channel_mesh)
from brinkman.msh import parse_msh, read_msh, write_msh

from conftest import SINGLE_TRIANGLE_MSH


def test_single_triangle_msh():
    mesh = parse_msh(SINGLE_TRIANGLE_MSH.encode())
    assert mesh.n_triangles == 1
    assert len(mesh.facets) == 3
    assert sorted(mesh.facet_tags.tolist()) == [INFLOW, WALL, WALL]
    check_euler(mesh, 0)


def test_quadrilateral_rejected():
    text = SINGLE_TRIANGLE_MSH.replace("4 2 2 100 100 1 2 3", "4 3 2 100 100 1 2 3 3")
    with pytest.raises(MeshError, match="unsupported element type"):
        parse_msh(text)


def test_malformed_header():
    with pytest.raises(MeshError, match="malformed section header"):
        parse_msh(SINGLE_TRIANGLE_MSH.replace("$EndNodes", "$EndNode"))
    with pytest.raises(MeshError):
        parse_msh(SINGLE_TRIANGLE_MSH.replace("2.2 0 8", "4.1 0 8"))


def test_unknown_physical_tag():
    with pytest.raises(MeshError, match="unknown physical tag"):
        parse_msh(SINGLE_TRIANGLE_MSH.replace("1 1 2 1 1 1 2", "1 1 2 500 500 1 2"))


def test_dangling_edge():
    text = SINGLE_TRIANGLE_MSH.replace("3 1 2 3 3 3 1\n", "")
    text = text.replace("$Elements\n4", "$Elements\n3")
    with pytest.raises(MeshError, match="untagged boundary edge"):
        parse_msh(text)


def test_zero_area_triangle():
    text = SINGLE_TRIANGLE_MSH.replace("3 0 1 0", "3 2 0 0")
    with pytest.raises(MeshError, match="zero-area"):
        parse_msh(text)


def test_clockwise_input_normalized():
    text = SINGLE_TRIANGLE_MSH.replace("4 2 2 100 100 1 2 3", "4 2 2 100 100 1 3 2")
    mesh = parse_msh(text)
    assert mesh.areas()[0] == pytest.approx(0.5)


def test_tag_map_from_caller():
    text = SINGLE_TRIANGLE_MSH.replace("1 1 2 1 1", "1 1 2 7 7").replace("2 2 100 100", "2 2 5 5")
    mesh = parse_msh(text, boundary_tags={7: INFLOW, 3: WALL}, region_tags={5: 0})
    assert INFLOW in mesh.facet_tags


def test_unit_square_grid(unit_grid):
    assert unit_grid.n_triangles == 8
    assert len(unit_grid.facets) == 8
    assert check_euler(unit_grid) == 0


def test_generated_channel_tags_obstacle_cells():
    mesh = generate_channel_mesh(-2, 2, -1, 1, [(-1.1, -0.9, 0.4, 1.0)], 0.05)
    c = mesh.centroids()
    inside = (c[:, 0] > -1.1) & (c[:, 0] < -0.9) & (c[:, 1] > 0.4) & (c[:, 1] < 1.0)
    assert np.array_equal(mesh.regions == 1, inside)
    assert inside.sum() == 4 * 12 * 2
    x = mesh.vertices[mesh.facets].mean(axis=1)[:, 0]
    assert np.all(mesh.facet_tags[x == -2] == INFLOW)
    assert np.all(mesh.facet_tags[x == 2] == OUTFLOW)
    assert np.all(mesh.facet_tags[(x > -2) & (x < 2)] == WALL)
    check_euler(mesh, 0)


@pytest.mark.parametrize("h", [0.0, -0.1])
def test_nonpositive_h(h):
    with pytest.raises(MeshError):
        generate_channel_mesh(0, 1, 0, 1, [], h)


def test_unsnappable_and_outside_rectangles():
    with pytest.raises(MeshError, match="not on a grid line"):
        generate_channel_mesh(0, 1, 0, 1, [(0.3, 0.5, 0.0, 0.5)], 0.25)
    with pytest.raises(MeshError, match="outside"):
        generate_channel_mesh(0, 1, 0, 1, [(0.5, 1.5, 0.0, 0.5)], 0.25)


def test_facets_oriented_outward(unit_grid):
    # triangle on the left of each facet: facet direction is counterclockwise along the boundary
    d = unit_grid.vertices[unit_grid.facets[:, 1]] - unit_grid.vertices[unit_grid.facets[:, 0]]
    mid = unit_grid.vertices[unit_grid.facets].mean(axis=1)
    outward = np.stack([d[:, 1], -d[:, 0]], 1)
    assert np.all(np.einsum("ij,ij->i", outward, mid - 0.5) > 0)


def test_submesh_identity_without_obstacles(unit_grid):
    sub, vmap = extract_fluid_submesh(unit_grid)
    assert sub.same_as(unit_grid)
    assert np.array_equal(vmap, np.arange(unit_grid.n_vertices))


def test_submesh_corner_cell(corner_obstacle_grid):
    sub, vmap = extract_fluid_submesh(corner_obstacle_grid)
    assert sub.n_triangles == 6
    assert np.count_nonzero(sub.facet_tags == -1) == 2
    assert np.array_equal(sub.vertices, corner_obstacle_grid.vertices[vmap])
    check_euler(sub, 0)


def test_submesh_partition_and_areas():
    mesh = generate_channel_mesh(-2, 2, -1, 1, [(-1.1, -0.9, 0.4, 1.0), (0.5, 1.0, -0.5, 0.0)], 0.05)
    sub, vmap = extract_fluid_submesh(mesh)
    assert sub.n_triangles == mesh.n_triangles - np.count_nonzero(mesh.regions)
    # interior obstacle 2 becomes a hole, obstacle 1 touches the wall
    assert check_euler(sub) == 1
    assert boundary_loops(sub) == 2
    parent_tris = mesh.triangles[mesh.regions == 0]
    assert np.array_equal(vmap[sub.triangles], parent_tris)
    assert np.array_equal(sub.areas(), mesh.areas()[mesh.regions == 0])


def test_round_trip_bit_exact():
    mesh = generate_channel_mesh(-2, 2, -1, 1, [(-1.1, -0.9, 0.4, 1.0)], 0.1)
    again = parse_msh(write_msh(mesh))
    assert again.same_as(mesh)
    sub, _ = extract_fluid_submesh(mesh)
    assert parse_msh(write_msh(sub)).same_as(sub)


@pytest.mark.parametrize("name", sorted(fixture_manifest()))
def test_fixture_counts(name):
    entry = fixture_manifest()[name]
    text = data_path(name).read_text()
    block = text.split("$Elements\n", 1)[1].split("$EndElements", 1)[0].splitlines()
    declared_tris = sum(1 for row in block[1:] if row.split()[1] == "2")
    assert int(block[0]) == len(block) - 1
    mesh = load_fixture(name)
    assert mesh.n_triangles == declared_tris == entry["triangles"]
    assert check_euler(mesh) == entry["holes"] == 0
    assert mesh.n_obstacles == 2
    sub, _ = extract_fluid_submesh(mesh)
    assert check_euler(sub) == 1  # the disk is a hole in the fluid region
    assert parse_msh(write_msh(mesh)).same_as(mesh)
    assert read_msh(data_path(name)).same_as(mesh)


def test_interior_obstacle_lines_dropped():
    mesh = generate_channel_mesh(0, 1, 0, 1, [(0.5, 1.0, 0.5, 1.0)], 0.5)
    text = write_msh(mesh)
    # add the two interface edges as tagged obstacle-boundary lines
    head, tail = text.split("$Elements\n", 1)
    count, rest = tail.split("\n", 1)
    center = int(np.flatnonzero(np.all(mesh.vertices == 0.5, axis=1))[0]) + 1
    right = int(np.flatnonzero(np.all(mesh.vertices == [1.0, 0.5], axis=1))[0]) + 1
    extra = f"900 1 2 11 11 {center} {right}\n"
    patched = head + "$Elements\n" + f"{int(count) + 1}\n" + extra + rest
    assert parse_msh(patched).same_as(mesh)


def test_mesh_is_read_only(unit_grid):
    with pytest.raises(ValueError):
        unit_grid.vertices[0, 0] = 3.0


@st.composite
def grids(draw):
    nx = draw(st.integers(2, 10))
    ny = draw(st.integers(2, 10))
    i0 = draw(st.integers(0, nx - 1))
    i1 = draw(st.integers(i0 + 1, nx))
    k0 = draw(st.integers(0, ny - 1))
    k1 = draw(st.integers(k0 + 1, ny))
    return nx, ny, (i0, i1, k0, k1)


@settings(max_examples=40, deadline=None)
@given(grids())
def test_generated_meshes_satisfy_invariants(g):
    nx, ny, (i0, i1, k0, k1) = g
    h = 1.0 / 4
    rect = (i0 * h, i1 * h, k0 * h, k1 * h)
    mesh = generate_channel_mesh(0, nx * h, 0, ny * h, [rect], h)
    assert np.all(mesh.areas() > 0)
    assert euler_characteristic(mesh) == 1
    assert np.count_nonzero(mesh.regions) == 2 * (i1 - i0) * (k1 - k0)
    if (i1 - i0) * (k1 - k0) < nx * ny:
        sub, vmap = extract_fluid_submesh(mesh)
        touches = i0 == 0 or k0 == 0 or i1 == nx or k1 == ny
        splits = (i0 == 0 and i1 == nx) or (k0 == 0 and k1 == ny)
        if not splits:
            assert check_euler(sub) == (0 if touches else 1)
        assert np.array_equal(sub.areas(), mesh.areas()[mesh.regions == 0])
        assert parse_msh(write_msh(sub)).same_as(sub)


def test_mesh_validation_rejects_bad_tags():
    v = [[0, 0], [1, 0], [0, 1]]
    t = [[0, 1, 2]]
    with pytest.raises(MeshError):
        Mesh(v, t, [[0, 1], [1, 2]], [WALL, WALL], [0])
    with pytest.raises(MeshError, match="contiguous"):
        Mesh(v, t, [[0, 1], [1, 2], [2, 0]], [WALL] * 3, [2])
