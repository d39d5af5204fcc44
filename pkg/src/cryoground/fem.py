"""P1 tetrahedral discretization of the implicit phase-change heat equation.

One backward-Euler step with coefficients frozen at the previous time level
produces the SPD system

    (M/tau + K) T_new = (M/tau) T_prev (+ lumped source),

where M is the row-sum lumped capacity matrix (effective capacity includes
the latent-heat spike) and K the stiffness matrix, both with piecewise
constant cell coefficients evaluated at the cell-mean previous temperature.
Mass lumping keeps M diagonal and prevents oscillations at the latent
spike; one-point coefficient quadrature matches the previous-level
linearization and cannot produce negative lumped entries.

The Assembler precomputes, per mesh, the element geometry factors and a
scatter plan that groups CSR slots by how many element entries land in
them; per step the work is pure vectorized arithmetic plus segment sums in
a fixed per-slot order, so assembled values are bit-identical for any
worker count.  Workers (forked processes writing disjoint slot ranges of
shared buffers) are managed by cryoground.parallel.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .linalg import CsrMatrix
from .mesh import Mesh, cell_volumes, tet_volume
from .parallel import ForkPool, fork_available
from .physics import FREEZING_POROUS, MaterialTable, frozen_thawed_coeffs


class FemError(ValueError):
    """Inconsistent sizes or invalid discretization inputs."""


class UnknownTagError(FemError):
    """A boundary tag that does not occur in the mesh."""


@dataclass
class TemperatureField:
    """Nodal temperatures (deg C) at one time level."""

    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise FemError(f"field values must be 1-d, got shape {self.values.shape}")
        if not np.isfinite(self.values).all():
            raise FemError("field contains non-finite values")

    @classmethod
    def uniform(cls, mesh: Mesh, value: float, time: float = 0.0) -> "TemperatureField":
        return cls(np.full(mesh.n_nodes, float(value)), time)

    def copy(self) -> "TemperatureField":
        return TemperatureField(self.values.copy(), self.time)


@dataclass
class DirichletSet:
    """Deduplicated (node, prescribed value) constraints, sorted by node."""

    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.nodes.shape != self.values.shape or self.nodes.ndim != 1:
            raise FemError("nodes and values must be 1-d arrays of equal length")
        if len(self.nodes) and (np.diff(self.nodes) <= 0).any():
            raise FemError("constraint nodes must be strictly increasing (unique)")

    def __len__(self) -> int:
        return len(self.nodes)


@dataclass
class LinearSystem:
    """Sparse matrix and right-hand side from one implicit step.

    The sparsity pattern arrays are shared with the assembler and read-only;
    values and rhs are owned by this system.
    """

    matrix: CsrMatrix
    rhs: np.ndarray


# ---------------------------------------------------------------------------
# single-cell operations
# ---------------------------------------------------------------------------


def _cell_gradients(mesh: Mesh, cell: int) -> tuple[np.ndarray, float]:
    """Constant P1 basis gradients (3, 4) and the cell volume."""
    vol = tet_volume(mesh, cell)  # raises on degenerate cells
    p = mesh.nodes[mesh.cells[cell]]
    e = p[1:] - p[0]  # rows: edge vectors
    inv = np.linalg.inv(e)
    g = np.empty((3, 4))
    g[:, 1:] = inv
    g[:, 0] = -inv.sum(axis=1)
    return g, vol


def element_stiffness(mesh: Mesh, cell: int, lam_cell: float) -> np.ndarray:
    """4x4 stiffness block lam * V * (grad phi_i . grad phi_j).

    Symmetric with zero row sums (gradients of the P1 partition of unity).
    """
    g, vol = _cell_gradients(mesh, cell)
    return lam_cell * vol * (g.T @ g)


def element_lumped_mass(mesh: Mesh, cell: int, c_cell: float) -> np.ndarray:
    """Row-sum lumped capacity: each of the 4 nodes receives c * V / 4."""
    vol = tet_volume(mesh, cell)
    return np.full(4, c_cell * vol / 4.0)


def cell_coefficients(
    mesh: Mesh, cell: int, field_prev: TemperatureField, table: MaterialTable
) -> tuple[float, float]:
    """(effective capacity, conductivity) of one cell, frozen at the
    previous time level.

    The cell temperature is the arithmetic mean of the four nodal values of
    field_prev; the region material supplies the frozen/thawed coefficients.
    """
    if len(field_prev.values) != mesh.n_nodes:
        raise FemError(
            f"field has {len(field_prev.values)} values for {mesh.n_nodes} nodes"
        )
    mat = table.for_region(mesh.cell_region[cell])
    model = table.phase
    t_cell = float(field_prev.values[mesh.cells[cell]].mean())
    crm, crp, lamm, lamp = frozen_thawed_coeffs(mat)
    phi = (t_cell - model.t_star + model.delta) / (2.0 * model.delta)
    phi = min(max(phi, 0.0), 1.0)
    lam_cell = lamm + phi * (lamp - lamm)
    c_cell = crm + phi * (crp - crm)
    if mat.kind == FREEZING_POROUS and (
        model.t_star - model.delta < t_cell < model.t_star + model.delta
    ):
        c_cell += model.latent_volumetric / (2.0 * model.delta)
    return c_cell, lam_cell


# ---------------------------------------------------------------------------
# global assembly
# ---------------------------------------------------------------------------


def _grouped_scatter_plan(slot_of_entry: np.ndarray):
    """Group entries by target-slot multiplicity.

    Returns (entry_perm, groups) where entry_perm reorders raw entries so
    that all slots receiving exactly k entries are contiguous, keeping the
    per-slot entry order fixed, and groups is a list of
    (k, entry_start, entry_end, slot_ids).
    """
    perm = np.argsort(slot_of_entry, kind="stable")
    sorted_slots = slot_of_entry[perm]
    counts = np.bincount(slot_of_entry)
    count_of_entry = counts[sorted_slots]
    regroup = np.argsort(count_of_entry, kind="stable")
    perm = perm[regroup]
    sorted_slots = sorted_slots[regroup]
    count_sorted = count_of_entry[regroup]

    groups = []
    start = 0
    total = len(perm)
    while start < total:
        k = int(count_sorted[start])
        # all entries of multiplicity k are contiguous after the stable sort
        end = int(np.searchsorted(count_sorted, k, side="right"))
        groups.append((k, start, end, sorted_slots[start:end:k].copy()))
        start = end
    return perm, groups


def _split_groups(groups, nworkers: int):
    """Partition each multiplicity group's slot rows into nworkers chunks.

    Returns per-worker lists of (k, entry_start, entry_end, slot_ids).
    Chunk boundaries are slot-aligned so writes never overlap.
    """
    per_worker = [[] for _ in range(nworkers)]
    for k, e0, _e1, slots in groups:
        nrows = len(slots)
        bounds = np.linspace(0, nrows, nworkers + 1).astype(np.int64)
        for w in range(nworkers):
            r0, r1 = int(bounds[w]), int(bounds[w + 1])
            if r1 > r0:
                per_worker[w].append((k, e0 + r0 * k, e0 + r1 * k, slots[r0:r1]))
    return per_worker


class Assembler:
    """Reusable global assembler for a fixed mesh and material table.

    Building the assembler computes element geometry, the CSR sparsity
    pattern and the deterministic scatter plan; each assemble() call then
    only evaluates coefficients at the previous temperature and fills a
    fresh value array.  With workers > 1 the per-step fill runs on forked
    worker processes writing disjoint slot ranges of shared buffers.
    """

    def __init__(self, mesh: Mesh, table: MaterialTable, workers: int = 1):
        self.mesh = mesh
        self.table = table
        self.workers = max(1, int(workers))

        m = mesh.n_cells
        n = mesh.n_nodes
        if m == 0:
            raise FemError("cannot assemble on a mesh with no cells")
        covered = np.zeros(n, dtype=bool)
        covered[mesh.cells.ravel()] = True
        if not covered.all():
            orphan = int(np.flatnonzero(~covered)[0])
            raise FemError(
                f"node {orphan} belongs to no cell; compact the mesh before assembly"
            )

        vols = cell_volumes(mesh)
        p = mesh.nodes[mesh.cells]
        e = p[:, 1:] - p[:, :1]
        inv = np.linalg.inv(e)  # (m, 3, 3)
        grads = np.empty((m, 3, 4))
        grads[:, :, 1:] = inv
        grads[:, :, 0] = -inv.sum(axis=2)
        kgeom = np.einsum("mki,mkj->mij", grads, grads) * vols[:, None, None]

        # per-cell material coefficient tables
        self._crm = np.empty(m)
        self._crp = np.empty(m)
        self._lamm = np.empty(m)
        self._lamp = np.empty(m)
        self._lat = np.empty(m)
        for tag in np.unique(mesh.cell_region):
            mat = table.for_region(tag)  # raises UnknownRegionError
            crm, crp, lamm, lamp = frozen_thawed_coeffs(mat)
            sel = mesh.cell_region == tag
            self._crm[sel] = crm
            self._crp[sel] = crp
            self._lamm[sel] = lamm
            self._lamp[sel] = lamp
            self._lat[sel] = table.latent_for(mat)

        # CSR pattern from the 16 entries of every element block
        rows16 = np.repeat(mesh.cells, 4, axis=1).ravel()
        cols16 = np.tile(mesh.cells, (1, 4)).ravel()
        key = rows16 * np.int64(n) + cols16
        uniq, slot_of_entry = np.unique(key, return_inverse=True)
        nnz = len(uniq)
        self.column_indices = (uniq % n).astype(np.int64)
        urows = (uniq // n).astype(np.int64)
        self.row_offsets = np.zeros(n + 1, dtype=np.int64)
        np.add.at(self.row_offsets, urows + 1, 1)
        np.cumsum(self.row_offsets, out=self.row_offsets)
        self.nnz = nnz
        for arr in (self.row_offsets, self.column_indices):
            arr.flags.writeable = False

        # diagonal slot of every row (always present for FEM patterns)
        diag_hit = self.column_indices == urows
        self._diag_slots = np.flatnonzero(diag_hit)
        if len(self._diag_slots) != n:
            raise FemError("internal error: missing diagonal slot in pattern")

        # stiffness scatter plan
        perm_k, groups_k = _grouped_scatter_plan(slot_of_entry.astype(np.int64))
        self._kgeom_entries = kgeom.reshape(m, 16).ravel()[perm_k]
        self._kcell_of_entry = (perm_k // 16).astype(np.int64)
        self._kgroups = groups_k

        # lumped-mass scatter plan (4 entries per cell onto node slots)
        nodes4 = mesh.cells.ravel()
        perm_m, groups_m = _grouped_scatter_plan(nodes4)
        self._mgeom_entries = np.repeat(vols / 4.0, 4)[perm_m]
        self._mcell_of_entry = (perm_m // 4).astype(np.int64)
        self._mgroups = groups_m

        # geometric lumped volumes, for source terms
        self.node_volumes = np.zeros(n)
        np.add.at(self.node_volumes, nodes4, np.repeat(vols / 4.0, 4))

        self._phase = table.phase
        self._pool: ForkPool | None = None
        self._pool_workers = 0
        self._shared: dict[str, np.ndarray] = {}
        self._worker_tasks: list[list] = []

        self._serial_plan = self._build_fill_plan(self._kgroups, self._mgroups)

    # -- coefficient evaluation -------------------------------------------

    def _cell_coeff_arrays(self, t_prev: np.ndarray, cells_sel):
        """Vectorized (c_cell, lam_cell) over a cell selection."""
        model = self._phase
        tm = t_prev[self.mesh.cells[cells_sel]].mean(axis=1)
        phi = np.clip((tm - model.t_star + model.delta) / (2.0 * model.delta), 0.0, 1.0)
        lam = self._lamm[cells_sel] + phi * (self._lamp[cells_sel] - self._lamm[cells_sel])
        c = self._crm[cells_sel] + phi * (self._crp[cells_sel] - self._crm[cells_sel])
        inside = (tm > model.t_star - model.delta) & (tm < model.t_star + model.delta)
        c = c + np.where(inside, self._lat[cells_sel] / (2.0 * model.delta), 0.0)
        return c, lam

    def _build_fill_plan(self, k_ranges, m_ranges):
        """Resolve the cells each range references into one evaluation set
        with per-entry local indices (precomputed; static per mesh)."""
        needed = [self._kcell_of_entry[e0:e1] for _, e0, e1, _ in k_ranges]
        needed += [self._mcell_of_entry[e0:e1] for _, e0, e1, _ in m_ranges]
        ucells = np.unique(np.concatenate(needed)) if needed else np.empty(0, np.int64)
        if len(ucells) == self.mesh.n_cells:
            # full coverage: evaluate all cells, entry ids index directly
            sel = slice(None)
            k_tasks = [
                (k, e0, e1, slots, self._kcell_of_entry[e0:e1]) for k, e0, e1, slots in k_ranges
            ]
            m_tasks = [
                (k, e0, e1, slots, self._mcell_of_entry[e0:e1]) for k, e0, e1, slots in m_ranges
            ]
        else:
            sel = ucells
            k_tasks = [
                (k, e0, e1, slots, np.searchsorted(ucells, self._kcell_of_entry[e0:e1]).astype(np.int64))
                for k, e0, e1, slots in k_ranges
            ]
            m_tasks = [
                (k, e0, e1, slots, np.searchsorted(ucells, self._mcell_of_entry[e0:e1]).astype(np.int64))
                for k, e0, e1, slots in m_ranges
            ]
        return (sel, k_tasks, m_tasks)

    def _fill_from_plan(self, t_prev, plan, k_out, m_out):
        """Evaluate coefficients once and scatter K and M values for the
        plan's slot-aligned entry ranges (the unit of work of one worker)."""
        sel, k_tasks, m_tasks = plan
        c, lam = self._cell_coeff_arrays(t_prev, sel)
        for k, e0, e1, slots, local in k_tasks:
            vals = self._kgeom_entries[e0:e1] * lam[local]
            k_out[slots] = vals.reshape(-1, k).sum(axis=1)
        for k, e0, e1, slots, local in m_tasks:
            vals = self._mgeom_entries[e0:e1] * c[local]
            m_out[slots] = vals.reshape(-1, k).sum(axis=1)

    # -- assembly ----------------------------------------------------------

    def stiffness_values(self, field_prev, workers: int | None = None) -> np.ndarray:
        """CSR value array of K alone (used by property tests)."""
        k_vals, _ = self._raw_values(self._field_array(field_prev), workers, False)
        return k_vals

    def capacity_diagonal(self, field_prev, workers: int | None = None) -> np.ndarray:
        """Lumped capacity diagonal M (J/K per node) at the previous level."""
        _, m_vals = self._raw_values(self._field_array(field_prev), workers, False)
        return m_vals

    def _field_array(self, field_prev) -> np.ndarray:
        vals = field_prev.values if isinstance(field_prev, TemperatureField) else field_prev
        vals = np.asarray(vals, dtype=np.float64)
        if vals.shape != (self.mesh.n_nodes,):
            raise FemError(
                f"field has shape {vals.shape}, mesh has {self.mesh.n_nodes} nodes"
            )
        return vals

    def _raw_values(self, t_prev: np.ndarray, workers: int | None, reuse_buffers: bool):
        nw = self.workers if workers is None else max(1, int(workers))
        # extra processes beyond the physical cores only add convoy overhead
        nw = min(nw, os.cpu_count() or 1)
        if nw > 1 and fork_available():
            self._ensure_pool(nw)
            self._shared["t_prev"][:] = t_prev
            self._pool.dispatch()
            if reuse_buffers:
                return self._shared["k_vals"], self._shared["m_vals"]
            return self._shared["k_vals"].copy(), self._shared["m_vals"].copy()
        k_vals = np.empty(self.nnz)
        m_vals = np.empty(self.mesh.n_nodes)
        self._fill_from_plan(t_prev, self._serial_plan, k_vals, m_vals)
        return k_vals, m_vals

    def assemble(
        self,
        field_prev,
        tau: float,
        source: np.ndarray | None = None,
        workers: int | None = None,
        reuse_buffers: bool = False,
    ) -> LinearSystem:
        """One implicit step system: A = M/tau + K, b = (M/tau) T_prev.

        ``source`` is an optional nodal volumetric heat source (W/m^3),
        integrated with the geometric lumped weights into the rhs.
        ``reuse_buffers`` lets a parallel assembler hand out its shared
        value buffer directly; the returned system is then only valid until
        the next assemble() call (the sequential time loop uses this).
        """
        if not tau > 0:
            raise FemError(f"tau must be > 0, got {tau}")
        t_prev = self._field_array(field_prev)
        k_vals, m_vals = self._raw_values(t_prev, workers, reuse_buffers)
        m_over_tau = m_vals / tau
        k_vals[self._diag_slots] += m_over_tau
        rhs = m_over_tau * t_prev
        if source is not None:
            source = np.asarray(source, dtype=np.float64)
            if source.shape != rhs.shape:
                raise FemError(f"source shape {source.shape} does not match node count")
            rhs += self.node_volumes * source
        return LinearSystem(CsrMatrix(self.row_offsets, self.column_indices, k_vals), rhs)

    # -- worker pool -------------------------------------------------------

    def _ensure_pool(self, nw: int):
        if self._pool is not None and self._pool_workers == nw and self._pool.alive():
            return
        self.close()
        self._shared = {
            "t_prev": ForkPool.shared_array(self.mesh.n_nodes),
            "k_vals": ForkPool.shared_array(self.nnz),
            "m_vals": ForkPool.shared_array(self.mesh.n_nodes),
        }
        k_split = _split_groups(self._kgroups, nw)
        m_split = _split_groups(self._mgroups, nw)
        self._worker_tasks = [
            self._build_fill_plan(k_split[w], m_split[w]) for w in range(nw)
        ]
        self._pool = ForkPool(nw, self._worker_task)
        self._pool_workers = nw

    def _worker_task(self, w: int):
        self._fill_from_plan(
            self._shared["t_prev"],
            self._worker_tasks[w],
            self._shared["k_vals"],
            self._shared["m_vals"],
        )

    def close(self):
        if self._pool is not None:
            self._pool.close()
            self._pool = None
            self._pool_workers = 0

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass


def assemble(
    mesh: Mesh,
    field_prev,
    table: MaterialTable,
    tau: float,
    source: np.ndarray | None = None,
    workers: int = 1,
) -> LinearSystem:
    """Assemble one implicit step on a mesh (builds a throwaway Assembler;
    reuse an Assembler for repeated stepping)."""
    return Assembler(mesh, table, workers=workers).assemble(field_prev, tau, source=source)


# ---------------------------------------------------------------------------
# Dirichlet boundary conditions
# ---------------------------------------------------------------------------


def nodes_for_tags(mesh: Mesh, tags) -> np.ndarray:
    """Sorted unique node indices on facets carrying any of the tags."""
    tags = [int(t) for t in tags]
    present = set(np.unique(mesh.facet_tag).tolist())
    for t in tags:
        if t not in present:
            raise UnknownTagError(f"boundary tag {t} does not occur in the mesh")
    mask = np.isin(mesh.facet_tag, tags)
    return np.unique(mesh.boundary_facets[mask])


def collect_dirichlet(mesh: Mesh, tag_values: Mapping[int, float]) -> DirichletSet:
    """Constraints for all nodes on facets whose tag appears in tag_values.

    Tags are processed in sorted order; where a node lies on facets of two
    active tags the value of the larger tag wins (a node shared by facets
    with equal values is simply deduplicated).
    """
    n = mesh.n_nodes
    sel = np.zeros(n, dtype=bool)
    val = np.zeros(n)
    for tag in sorted(int(t) for t in tag_values):
        nodes = nodes_for_tags(mesh, [tag])
        sel[nodes] = True
        val[nodes] = float(tag_values[tag])
    nodes = np.flatnonzero(sel)
    return DirichletSet(nodes, val[nodes])


class DirichletPlan:
    """Precomputed symmetric-elimination positions for a fixed sparsity
    pattern and constrained node set (values may change per step)."""

    def __init__(self, matrix: CsrMatrix, nodes: np.ndarray):
        n = matrix.n
        nodes = np.asarray(nodes, dtype=np.int64)
        if len(nodes) and (nodes.min() < 0 or nodes.max() >= n):
            raise FemError(f"constraint node outside [0, {n})")
        self.nodes = nodes
        offs = matrix.row_offsets
        cols = matrix.column_indices
        constrained = np.zeros(n, dtype=bool)
        constrained[nodes] = True

        rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(offs))
        self._row_positions = np.flatnonzero(constrained[rows])
        cross = self._row_positions[~constrained[cols[self._row_positions]]]
        self._cross_positions = cross  # entries (i constrained, j free)
        self._cross_cols = cols[cross]
        self._cross_owner = rows[cross]

        # symmetric counterparts (j free row, i constrained col), located by
        # binary search on the globally sorted (row, col) key
        key = rows * np.int64(n) + cols
        want = self._cross_cols * np.int64(n) + self._cross_owner
        pos = np.searchsorted(key, want)
        ok = (pos < len(key)) & (key[np.minimum(pos, len(key) - 1)] == want)
        if not ok.all():
            raise FemError("matrix sparsity is not structurally symmetric")
        self._sym_positions = pos

        # diagonal slots of the constrained rows
        dpos = np.searchsorted(key, nodes * np.int64(n) + nodes)
        ok = (dpos < len(key)) & (key[np.minimum(dpos, len(key) - 1)] == nodes * np.int64(n) + nodes)
        if not ok.all():
            raise FemError("constrained row lacks a stored diagonal entry")
        self._diag_positions = dpos

        # map constrained node id -> index into self.nodes
        self._owner_slot = np.searchsorted(nodes, self._cross_owner)

    def apply(self, system: LinearSystem, values: np.ndarray) -> LinearSystem:
        """Eliminate the constraints in place (matrix values and rhs)."""
        g = np.asarray(values, dtype=np.float64)
        if g.shape != self.nodes.shape:
            raise FemError("constraint value array does not match plan nodes")
        a = system.matrix.values
        b = system.rhs
        np.add.at(b, self._cross_cols, -a[self._cross_positions] * g[self._owner_slot])
        a[self._row_positions] = 0.0
        a[self._sym_positions] = 0.0
        a[self._diag_positions] = 1.0
        b[self.nodes] = g
        return system


def apply_dirichlet(system: LinearSystem, dirichlet: DirichletSet) -> LinearSystem:
    """Symmetric elimination of Dirichlet constraints.

    For each constrained node i with value g_i the rhs of every free row j
    loses A_ji g_i, then row i and column i are zeroed, A_ii = 1 and
    b_i = g_i.  Symmetry (hence SPD-ness for CG) is preserved.  The system
    is modified in place and returned.
    """
    if len(dirichlet) == 0:
        return system
    return DirichletPlan(system.matrix, dirichlet.nodes).apply(system, dirichlet.values)
