"""Unstructured tetrahedral meshes with region and boundary labeling.

Meshes are either read from Gmsh MSH 2.2 ASCII files or generated as
structured boxes (each hexahedral cell split into 6 tetrahedra).  A mesh is
immutable after construction; all arrays are flagged read-only so it can be
shared freely between assembly workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class MeshError(ValueError):
    """Invalid mesh data (bad indices, inconsistent array lengths)."""


class MshFormatError(MeshError):
    """Malformed or unsupported content in a Gmsh MSH file."""


class DegenerateCellError(MeshError):
    """A tetrahedron with (numerically) zero volume."""


# Boundary tags assigned by generate_box to the six box faces.
BOX_FACE_TAGS = {"-x": 1, "+x": 2, "-y": 3, "+y": 4, "-z": 5, "+z": 6}

# The six permutations of (x, y, z) that define the Kuhn subdivision of a
# hexahedron into tetrahedra sharing the main diagonal.
_KUHN_PATHS = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]


def _signed_volumes(nodes: np.ndarray, cells: np.ndarray) -> np.ndarray:
    """Signed volume det(edge matrix)/6 for every cell, vectorized."""
    p = nodes[cells]  # (m, 4, 3)
    e = p[:, 1:] - p[:, :1]  # (m, 3, 3)
    return np.linalg.det(e) / 6.0


@dataclass
class Mesh:
    """Tetrahedral mesh: node coordinates, tet4 cells with region tags and
    boundary triangles with boundary tags.

    Construction re-orients any cell with negative signed volume (two node
    swap) so that assembly can assume positive Jacobians.  Arrays are made
    read-only afterwards.
    """

    nodes: np.ndarray
    cells: np.ndarray
    cell_region: np.ndarray
    boundary_facets: np.ndarray
    facet_tag: np.ndarray

    def __post_init__(self):
        self.nodes = np.ascontiguousarray(np.asarray(self.nodes, dtype=np.float64))
        self.cells = np.ascontiguousarray(np.asarray(self.cells, dtype=np.int64))
        self.cell_region = np.ascontiguousarray(np.asarray(self.cell_region, dtype=np.int64))
        self.boundary_facets = np.ascontiguousarray(
            np.asarray(self.boundary_facets, dtype=np.int64).reshape(-1, 3)
        )
        self.facet_tag = np.ascontiguousarray(np.asarray(self.facet_tag, dtype=np.int64))

        if self.nodes.ndim != 2 or self.nodes.shape[1] != 3:
            raise MeshError(f"nodes must be (n, 3), got {self.nodes.shape}")
        self.cells = self.cells.reshape(-1, 4)
        n = len(self.nodes)
        if len(self.cell_region) != len(self.cells):
            raise MeshError(
                f"cell_region has {len(self.cell_region)} entries for {len(self.cells)} cells"
            )
        if len(self.facet_tag) != len(self.boundary_facets):
            raise MeshError(
                f"facet_tag has {len(self.facet_tag)} entries for "
                f"{len(self.boundary_facets)} facets"
            )
        for name, arr in (("cells", self.cells), ("boundary_facets", self.boundary_facets)):
            if arr.size and (arr.min() < 0 or arr.max() >= n):
                raise MeshError(f"{name} reference node indices outside [0, {n})")

        # Canonical orientation fix-up: swap the last two nodes of any cell
        # with negative signed volume.
        if len(self.cells):
            vols = _signed_volumes(self.nodes, self.cells)
            flip = vols < 0.0
            if flip.any():
                self.cells[flip, 2], self.cells[flip, 3] = (
                    self.cells[flip, 3].copy(),
                    self.cells[flip, 2].copy(),
                )

        for arr in (self.nodes, self.cells, self.cell_region, self.boundary_facets, self.facet_tag):
            arr.flags.writeable = False

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_facets(self) -> int:
        return len(self.boundary_facets)


@dataclass(frozen=True)
class BoxMeshSpec:
    """Axis-aligned box: per-axis extents (m) and cell counts."""

    extents: tuple[float, float, float]
    divisions: tuple[int, int, int]

    def __post_init__(self):
        if len(self.extents) != 3 or len(self.divisions) != 3:
            raise MeshError("extents and divisions must each have 3 entries")
        if any(e <= 0 for e in self.extents):
            raise MeshError(f"extents must be positive, got {self.extents}")
        if any(int(d) != d or d < 1 for d in self.divisions):
            raise MeshError(f"divisions must be integers >= 1, got {self.divisions}")


def tet_volume(mesh: Mesh, cell: int) -> float:
    """Volume of one tetrahedral cell.

    Raises DegenerateCellError when the four nodes are (numerically)
    coplanar; the threshold is relative to the longest edge.
    """
    if not 0 <= cell < mesh.n_cells:
        raise IndexError(f"cell index {cell} out of range [0, {mesh.n_cells})")
    p = mesh.nodes[mesh.cells[cell]]
    e = p[1:] - p[0]
    vol = float(np.linalg.det(e)) / 6.0
    edges = p[:, None, :] - p[None, :, :]
    longest = float(np.sqrt((edges**2).sum(axis=2)).max())
    if abs(vol) <= 1e-14 * longest**3:
        raise DegenerateCellError(f"cell {cell} is degenerate (volume {vol:.3e})")
    return abs(vol)


def cell_volumes(mesh: Mesh) -> np.ndarray:
    """Positive volumes of all cells; raises on any degenerate cell."""
    vols = _signed_volumes(mesh.nodes, mesh.cells)
    if len(vols):
        bad = np.flatnonzero(np.abs(vols) <= 0.0)
        if len(bad):
            raise DegenerateCellError(f"cell {bad[0]} is degenerate (volume 0)")
    return np.abs(vols)


def generate_box(spec: BoxMeshSpec, region: int = 1) -> Mesh:
    """Structured tet mesh of a box via Kuhn subdivision (6 tets per hex).

    Produces (nx+1)(ny+1)(nz+1) nodes and 6*nx*ny*nz cells, all tagged
    ``region``.  The six box faces carry facet tags 1..6 in the order
    -x, +x, -y, +y, -z, +z.
    """
    nx, ny, nz = (int(d) for d in spec.divisions)
    lx, ly, lz = (float(e) for e in spec.extents)

    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    zs = np.linspace(0.0, lz, nz + 1)
    gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
    # node id = i + (nx+1) * (j + (ny+1) * k), x fastest
    nodes = np.column_stack(
        [
            gx.transpose(2, 1, 0).ravel(),
            gy.transpose(2, 1, 0).ravel(),
            gz.transpose(2, 1, 0).ravel(),
        ]
    )

    def node_id(i, j, k):
        return i + (nx + 1) * (j + (ny + 1) * k)

    ii, jj, kk = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    ii = ii.transpose(2, 1, 0).ravel()
    jj = jj.transpose(2, 1, 0).ravel()
    kk = kk.transpose(2, 1, 0).ravel()

    # hex corner ids indexed by (dx, dy, dz)
    corner = {
        (dx, dy, dz): node_id(ii + dx, jj + dy, kk + dz)
        for dx in (0, 1)
        for dy in (0, 1)
        for dz in (0, 1)
    }

    nhex = len(ii)
    cells = np.empty((nhex, 6, 4), dtype=np.int64)
    for t, path in enumerate(_KUHN_PATHS):
        steps = [(0, 0, 0)]
        for axis in path:
            prev = steps[-1]
            nxt = list(prev)
            nxt[axis] += 1
            steps.append(tuple(nxt))
        for v, d in enumerate(steps):
            cells[:, t, v] = corner[d]
    cells = cells.reshape(-1, 4)
    cell_region = np.full(len(cells), int(region), dtype=np.int64)

    faces, counts = _all_faces(cells)
    bfaces = faces[counts == 1]

    # classify each boundary face by the grid plane all three nodes share
    fi = bfaces % (nx + 1)
    fj = (bfaces // (nx + 1)) % (ny + 1)
    fk = bfaces // ((nx + 1) * (ny + 1))
    tags = np.zeros(len(bfaces), dtype=np.int64)
    planes = [
        (fi, 0, BOX_FACE_TAGS["-x"]),
        (fi, nx, BOX_FACE_TAGS["+x"]),
        (fj, 0, BOX_FACE_TAGS["-y"]),
        (fj, ny, BOX_FACE_TAGS["+y"]),
        (fk, 0, BOX_FACE_TAGS["-z"]),
        (fk, nz, BOX_FACE_TAGS["+z"]),
    ]
    for coord, value, tag in planes:
        on = (coord == value).all(axis=1) & (tags == 0)
        tags[on] = tag
    if (tags == 0).any():
        raise MeshError("internal error: unclassified boundary facet in generate_box")

    return Mesh(nodes, cells, cell_region, bfaces, tags)


def _all_faces(cells: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unique sorted node triples over the 4 faces of every cell, with
    occurrence counts."""
    f = np.concatenate(
        [cells[:, [0, 1, 2]], cells[:, [0, 1, 3]], cells[:, [0, 2, 3]], cells[:, [1, 2, 3]]]
    )
    f = np.sort(f, axis=1)
    return np.unique(f, axis=0, return_counts=True)


def boundary_face_counts(mesh: Mesh) -> np.ndarray:
    """For each boundary facet, the number of cells it is a face of."""
    faces, counts = _all_faces(mesh.cells)
    lookup = {tuple(f): int(c) for f, c in zip(faces, counts)}
    key = np.sort(mesh.boundary_facets, axis=1)
    return np.array([lookup.get(tuple(f), 0) for f in key], dtype=np.int64)


# ---------------------------------------------------------------------------
# Gmsh MSH 2.2 ASCII
# ---------------------------------------------------------------------------

_MSH_TET = 4
_MSH_TRIANGLE = 2
_MSH_NODES_PER_TYPE = {_MSH_TRIANGLE: 3, _MSH_TET: 4}


def read_msh(path) -> Mesh:
    """Read a Gmsh MSH 2.2 ASCII file.

    Only element types 2 (3-node triangle, kept as boundary facet) and
    4 (4-node tetrahedron, kept as cell) are accepted; anything else is
    rejected naming the offending type id.  The first physical tag of each
    element becomes the region / facet tag.  Node ids are remapped to
    0-based contiguous indices in file order.
    """
    path = Path(path)
    lines = path.read_text().splitlines()
    pos = 0

    def next_line():
        nonlocal pos
        while pos < len(lines):
            s = lines[pos].strip()
            pos += 1
            if s:
                return s
        return None

    s = next_line()
    if s != "$MeshFormat":
        raise MshFormatError(f"{path}: expected $MeshFormat first, got {s!r}")
    fmt = next_line()
    parts = (fmt or "").split()
    if len(parts) != 3:
        raise MshFormatError(f"{path}: malformed $MeshFormat line {fmt!r}")
    version, file_type = parts[0], parts[1]
    if version != "2.2":
        raise MshFormatError(f"{path}: unsupported MSH version {version} (need 2.2)")
    if file_type != "0":
        raise MshFormatError(f"{path}: binary MSH not supported (file-type {file_type})")
    if next_line() != "$EndMeshFormat":
        raise MshFormatError(f"{path}: missing $EndMeshFormat")

    node_ids: list[int] = []
    coords: list[tuple[float, float, float]] = []
    elements: list[tuple[int, int, list[int]]] = []  # (type, tag, node ids)

    while True:
        s = next_line()
        if s is None:
            break
        if s == "$Nodes":
            count_line = next_line()
            try:
                n = int(count_line)
            except (TypeError, ValueError):
                raise MshFormatError(f"{path}: malformed $Nodes count {count_line!r}") from None
            for _ in range(n):
                row = (next_line() or "").split()
                if len(row) != 4:
                    raise MshFormatError(f"{path}: malformed node line {row}")
                node_ids.append(int(row[0]))
                coords.append((float(row[1]), float(row[2]), float(row[3])))
            if next_line() != "$EndNodes":
                raise MshFormatError(f"{path}: missing $EndNodes")
        elif s == "$Elements":
            count_line = next_line()
            try:
                n = int(count_line)
            except (TypeError, ValueError):
                raise MshFormatError(f"{path}: malformed $Elements count {count_line!r}") from None
            for _ in range(n):
                row = (next_line() or "").split()
                if len(row) < 3:
                    raise MshFormatError(f"{path}: malformed element line {row}")
                etype = int(row[1])
                if etype not in _MSH_NODES_PER_TYPE:
                    raise MshFormatError(
                        f"{path}: unsupported element type {etype} (only 2 and 4 accepted)"
                    )
                ntags = int(row[2])
                nn = _MSH_NODES_PER_TYPE[etype]
                if len(row) != 3 + ntags + nn:
                    raise MshFormatError(f"{path}: element line has wrong field count: {row}")
                tag = int(row[3]) if ntags >= 1 else 0
                elements.append((etype, tag, [int(v) for v in row[3 + ntags :]]))
            if next_line() != "$EndElements":
                raise MshFormatError(f"{path}: missing $EndElements")
        elif s.startswith("$End"):
            raise MshFormatError(f"{path}: unexpected {s}")
        elif s.startswith("$"):
            # skip unknown section (e.g. $PhysicalNames)
            name = s[1:]
            while True:
                t = next_line()
                if t is None:
                    raise MshFormatError(f"{path}: section ${name} not terminated")
                if t == f"$End{name}":
                    break
        else:
            raise MshFormatError(f"{path}: unexpected content {s!r}")

    if not node_ids:
        raise MshFormatError(f"{path}: no $Nodes section")
    id_map = {nid: i for i, nid in enumerate(node_ids)}
    if len(id_map) != len(node_ids):
        raise MshFormatError(f"{path}: duplicate node ids")

    cells, cregion, facets, ftag = [], [], [], []
    for etype, tag, nids in elements:
        try:
            mapped = [id_map[v] for v in nids]
        except KeyError as e:
            raise MshFormatError(f"{path}: element references unknown node id {e.args[0]}") from None
        if etype == _MSH_TET:
            cells.append(mapped)
            cregion.append(tag)
        else:
            facets.append(mapped)
            ftag.append(tag)

    return Mesh(
        np.array(coords, dtype=np.float64).reshape(-1, 3),
        np.array(cells, dtype=np.int64).reshape(-1, 4),
        np.array(cregion, dtype=np.int64),
        np.array(facets, dtype=np.int64).reshape(-1, 3),
        np.array(ftag, dtype=np.int64),
    )


# ---------------------------------------------------------------------------
# region painting and prism carving (desk-scale geometry stand-ins)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoxMeshPlan:
    """A box mesh plus axis-aligned region paints and prism cutouts.

    ``paint`` entries are (region_tag, (x0, x1, y0, y1, z0, z1)) applied in
    order to cells whose centroid falls inside the bounds; ``carve`` entries
    remove such cells and tag the newly exposed boundary triangles with the
    given facet tag.
    """

    box: BoxMeshSpec
    region: int = 1
    paint: tuple = ()
    carve: tuple = ()


def _centroid_mask(mesh: Mesh, bounds) -> np.ndarray:
    x0, x1, y0, y1, z0, z1 = (float(v) for v in bounds)
    c = mesh.nodes[mesh.cells].mean(axis=1)
    return (
        (c[:, 0] >= x0) & (c[:, 0] <= x1)
        & (c[:, 1] >= y0) & (c[:, 1] <= y1)
        & (c[:, 2] >= z0) & (c[:, 2] <= z1)
    )


def paint_region(mesh: Mesh, bounds, tag: int) -> Mesh:
    """Retag all cells whose centroid lies inside the axis-aligned bounds."""
    inside = _centroid_mask(mesh, bounds)
    region = mesh.cell_region.copy()
    region[inside] = int(tag)
    return Mesh(mesh.nodes, mesh.cells, region, mesh.boundary_facets, mesh.facet_tag)


def carve_box(mesh: Mesh, bounds, facet_tag: int) -> Mesh:
    """Remove all cells with centroid inside the bounds.

    Boundary triangles exposed by the removal receive ``facet_tag``;
    surviving pre-existing boundary facets keep their tags.  Nodes no longer
    referenced by any cell are dropped and indices compacted.
    """
    inside = _centroid_mask(mesh, bounds)
    if not inside.any():
        raise MeshError(f"carve bounds {tuple(bounds)} contain no cell centroid")
    keep = ~inside
    cells = mesh.cells[keep]
    region = mesh.cell_region[keep]

    faces, counts = _all_faces(cells)
    bfaces = faces[counts == 1]
    old_tags = {
        tuple(f): int(t)
        for f, t in zip(np.sort(mesh.boundary_facets, axis=1), mesh.facet_tag)
    }
    tags = np.array(
        [old_tags.get(tuple(f), int(facet_tag)) for f in bfaces], dtype=np.int64
    )

    used = np.unique(cells)
    remap = np.full(mesh.n_nodes, -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return Mesh(mesh.nodes[used], remap[cells], region, remap[bfaces], tags)


def build_planned_box(plan: BoxMeshPlan) -> Mesh:
    """Generate, paint and carve a box mesh according to the plan."""
    mesh = generate_box(plan.box, region=plan.region)
    for tag, bounds in plan.paint:
        mesh = paint_region(mesh, bounds, tag)
    for tag, bounds in plan.carve:
        mesh = carve_box(mesh, bounds, tag)
    return mesh


def write_msh(mesh: Mesh, path) -> None:
    """Write a mesh as Gmsh MSH 2.2 ASCII (inverse of read_msh).

    Coordinates are written with 17 significant digits so that a
    read_msh round trip reproduces them bit-exactly.
    """
    path = Path(path)
    out = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat", "$Nodes", str(mesh.n_nodes)]
    for i, (x, y, z) in enumerate(mesh.nodes, start=1):
        out.append(f"{i} {x:.17g} {y:.17g} {z:.17g}")
    out.append("$EndNodes")
    out.append("$Elements")
    out.append(str(mesh.n_facets + mesh.n_cells))
    eid = 1
    for f, tag in zip(mesh.boundary_facets, mesh.facet_tag):
        a, b, c = (int(v) + 1 for v in f)
        out.append(f"{eid} 2 2 {int(tag)} {int(tag)} {a} {b} {c}")
        eid += 1
    for cell, tag in zip(mesh.cells, mesh.cell_region):
        a, b, c, d = (int(v) + 1 for v in cell)
        out.append(f"{eid} 4 2 {int(tag)} {int(tag)} {a} {b} {c} {d}")
        eid += 1
    out.append("$EndElements")
    path.write_text("\n".join(out) + "\n")
