"""P1 finite elements on uniform simplicial meshes of the box.

Each 2-D cell is split into 2 triangles with the diagonal alternating
by cell parity (criss-cross pattern, so the mesh has no preferred
direction and corner nodes are never starved of elements); each 3-D
cell is split into 6 Kuhn tetrahedra sharing a consistent main
diagonal. All elements are congruent up to the per-cell pattern, so
element gradients reduce to a handful of per-shape templates.

The steady conduction problem is

    -div(kappa grad T) = q   in the box,
    T = 0                    on the Dirichlet node set,
    zero flux                elsewhere,

assembled with element conductivity equal to the arithmetic mean of the
nodal kappa over the element, a row-sum lumped load vector, and symmetric
row/column elimination (unit diagonal) for Dirichlet nodes. Solves run
through CG with a selectable preconditioner, or a sparse direct
factorization for small systems.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from .fields import GridSpec, ScalarField, node_index

__all__ = [
    "Triangulation",
    "BoundarySpec",
    "SolverSettings",
    "SolverError",
    "boundary_nodes",
    "assemble_stiffness",
    "solve_state",
    "solve_adjoint",
    "gradient_product_field",
]

PRECONDITIONERS = ("jacobi", "ichol-like", "amg", "direct")


class SolverError(RuntimeError):
    """Linear solve failed to reach the requested residual."""


def _ichol0(A: sparse.csr_matrix, shift: float = 0.0) -> sparse.csr_matrix:
    """Zero-fill incomplete Cholesky factor L (A ~ L L^T on A's lower pattern).

    shift scales the diagonal by (1 + shift) before factoring; raises
    FloatingPointError on breakdown (non-positive pivot).
    """
    L = sparse.tril(A, format="csr")
    L.sort_indices()
    indptr, indices, data = L.indptr, L.indices, L.data.copy()
    if shift:
        data[indptr[1:] - 1] *= 1.0 + shift
    for i in range(A.shape[0]):
        s0, s1 = indptr[i], indptr[i + 1]
        cols_i = indices[s0:s1]
        for t in range(s1 - s0):
            j = cols_i[t]
            pj0, pj1 = indptr[j], indptr[j + 1]
            ci = cols_i[:t]
            acc = 0.0
            if ci.size and pj1 - 1 > pj0:
                common, ia, ib = np.intersect1d(
                    ci, indices[pj0: pj1 - 1], assume_unique=True, return_indices=True
                )
                if common.size:
                    acc = data[s0: s0 + t][ia] @ data[pj0: pj1 - 1][ib]
            if j < i:
                data[s0 + t] = (data[s0 + t] - acc) / data[pj1 - 1]
            else:
                v = data[s0 + t] - acc
                if v <= 0.0:
                    raise FloatingPointError(f"incomplete Cholesky breakdown in row {i}")
                data[s0 + t] = np.sqrt(v)
    return sparse.csr_matrix((data, indices, indptr), shape=A.shape)


def _ichol_operator(A: sparse.csr_matrix) -> spla.LinearOperator:
    """SPD preconditioner M = (L L^T)^-1 from _ichol0, with a shift ladder."""
    last_exc = None
    for shift in (0.0, 1e-3, 1e-2, 1e-1):
        try:
            L = _ichol0(A, shift=shift)
            break
        except FloatingPointError as exc:
            last_exc = exc
    else:
        raise SolverError(f"incomplete Cholesky failed even with diagonal shifts: {last_exc}")
    lu = spla.splu(
        L.tocsc(), permc_spec="NATURAL", options=dict(DiagPivotThresh=0.0)
    )

    def apply(z):
        return lu.solve(lu.solve(z), trans="T")

    return spla.LinearOperator(A.shape, matvec=apply)


def boundary_nodes(grid: GridSpec) -> np.ndarray:
    """Sorted flat indices of all nodes on the box boundary."""
    shape = grid.shape
    axes = [np.arange(s) for s in shape]
    mesh = np.meshgrid(*axes, indexing="ij")
    on_bd = np.zeros(shape, dtype=bool)
    for ax, ix in enumerate(mesh):
        on_bd |= (ix == 0) | (ix == shape[ax] - 1)
    flats = node_index(grid, mesh)
    return np.sort(flats[on_bd].reshape(-1))


@dataclass(frozen=True, eq=False)
class BoundarySpec:
    """Homogeneous Dirichlet node set; all remaining boundary is zero-flux."""

    grid: GridSpec
    dirichlet_nodes: np.ndarray

    def __post_init__(self):
        nodes = np.unique(np.asarray(self.dirichlet_nodes, dtype=np.int64))
        if nodes.size == 0:
            raise ValueError("Dirichlet node set must be non-empty")
        if nodes[0] < 0 or nodes[-1] >= self.grid.n_nodes:
            raise ValueError("Dirichlet node index out of range")
        bd = boundary_nodes(self.grid)
        if not np.all(np.isin(nodes, bd)):
            raise ValueError("every Dirichlet node must lie on the box boundary")
        nodes.flags.writeable = False
        object.__setattr__(self, "dirichlet_nodes", nodes)

    def cache_key(self) -> bytes:
        return self.dirichlet_nodes.tobytes()


@dataclass(frozen=True)
class SolverSettings:
    """Linear solver controls.

    max_cg_iters = None means the default cap 20 * n_nodes^(1/dim).
    'direct' factors the matrix instead of iterating; it is intended for
    small systems and oracle checks.
    """

    rel_tol: float = 1e-10
    max_cg_iters: int | None = None
    preconditioner: str = "jacobi"

    def __post_init__(self):
        if not (np.isfinite(self.rel_tol) and 0.0 < self.rel_tol < 1.0):
            raise ValueError(f"rel_tol must be in (0, 1), got {self.rel_tol}")
        if self.max_cg_iters is not None and self.max_cg_iters < 1:
            raise ValueError("max_cg_iters must be positive")
        if self.preconditioner not in PRECONDITIONERS:
            raise ValueError(
                f"preconditioner must be one of {PRECONDITIONERS}, got {self.preconditioner!r}"
            )

    def iter_cap(self, grid: GridSpec) -> int:
        if self.max_cg_iters is not None:
            return int(self.max_cg_iters)
        return int(20 * grid.n_nodes ** (1.0 / grid.dim))


def _shape_offsets(dim: int):
    """Corner offsets (unit cell) of the element shapes, grouped by cell parity.

    2-D: group 0 splits along (0,0)-(1,1), group 1 along (1,0)-(0,1);
    cells use group (i+j) % 2. 3-D: one group of 6 Kuhn tetrahedra
    sharing the (0,0,0)-(1,1,1) diagonal.
    """
    if dim == 2:
        return [
            [
                [(0, 0), (1, 0), (1, 1)],
                [(0, 0), (1, 1), (0, 1)],
            ],
            [
                [(0, 0), (1, 0), (0, 1)],
                [(1, 0), (1, 1), (0, 1)],
            ],
        ]
    shapes = []
    eye = np.eye(3, dtype=int)
    for perm in sorted(permutations(range(3))):
        v1 = eye[perm[0]]
        v2 = eye[perm[0]] + eye[perm[1]]
        shapes.append([(0, 0, 0), tuple(v1), tuple(v2), (1, 1, 1)])
    return [shapes]


class Triangulation:
    """Simplicial mesh over a GridSpec with per-shape element templates.

    elements has shape (n_elements, dim+1) with cell-major ordering:
    element = cell * shapes_per_cell + local_shape. All elements share one
    volume, and element_shape indexes the gradient/stiffness templates.
    """

    def __init__(self, grid: GridSpec):
        self.grid = grid
        dim = grid.dim
        h = grid.spacing
        groups = _shape_offsets(dim)
        per_cell = len(groups[0])
        flat_shapes = [corners for grp in groups for corners in grp]
        self.n_templates = len(flat_shapes)
        self.element_volume = grid.cell_volume / per_cell

        # per-shape gradient templates via the affine map [1, x] -> barycentric;
        # det check guards against a mis-ordered corner list
        grads = np.empty((self.n_templates, dim + 1, dim))
        for s, corners in enumerate(flat_shapes):
            coords = np.array(corners, dtype=float) * np.array(h)
            M = np.hstack([np.ones((dim + 1, 1)), coords])
            grads[s] = np.linalg.inv(M)[1:, :].T
            det_vol = abs(np.linalg.det(M)) / (2.0 if dim == 2 else 6.0)
            if not np.isclose(det_vol, self.element_volume, rtol=1e-12):
                raise AssertionError("inconsistent element volume")
        self.shape_grads = grads
        self.local_stiffness = np.einsum("sad,sbd->sab", grads, grads) * self.element_volume

        # flat node-offset per template corner
        shp = grid.shape
        stride = (1, shp[0]) if dim == 2 else (1, shp[0], shp[0] * shp[1])
        flat_off = np.array(
            [
                [sum(o[ax] * stride[ax] for ax in range(dim)) for o in corners]
                for corners in flat_shapes
            ],
            dtype=np.int64,
        ).reshape(len(groups), per_cell, dim + 1)

        cell_ranges = [np.arange(m) for m in grid.cells]
        mesh = np.meshgrid(*cell_ranges, indexing="ij")
        base = np.zeros(mesh[0].shape, dtype=np.int64)
        for ax in range(dim):
            base += mesh[ax] * stride[ax]
        base = base.transpose().reshape(-1)  # x-fastest cell order
        self.n_cells = base.size
        if len(groups) == 1:
            parity = np.zeros(self.n_cells, dtype=np.int64)
        else:
            parity = ((mesh[0] + mesh[1]) % 2).transpose().reshape(-1).astype(np.int64)
        elements = base[:, None, None] + flat_off[parity]
        self.elements = np.ascontiguousarray(elements.reshape(-1, dim + 1), dtype=np.int32)
        self.element_shape = (
            parity[:, None] * per_cell + np.arange(per_cell, dtype=np.int64)[None, :]
        ).reshape(-1).astype(np.int8)
        self._template_rows = [
            np.flatnonzero(self.element_shape == s) for s in range(self.n_templates)
        ]

        counts = np.bincount(self.elements.reshape(-1), minlength=grid.n_nodes)
        self.lumped_node_volume = counts * (self.element_volume / (dim + 1))

        self._assemblers = {}

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    def assembler(self, bc: BoundarySpec) -> "StiffnessAssembler":
        if bc.grid != self.grid:
            raise ValueError("boundary spec grid does not match triangulation grid")
        key = bc.cache_key()
        asm = self._assemblers.get(key)
        if asm is None:
            asm = StiffnessAssembler(self, bc)
            self._assemblers[key] = asm
        return asm

    def element_gradients(self, values: np.ndarray) -> np.ndarray:
        """(n_elements, dim) gradient of the P1 interpolant per element."""
        out = np.empty((self.n_elements, self.grid.dim))
        for s, rows in enumerate(self._template_rows):
            out[rows] = values[self.elements[rows]] @ self.shape_grads[s]
        return out


class StiffnessAssembler:
    """Precomputed sparsity structure for fast repeated assembly.

    Dirichlet rows and columns are eliminated symmetrically with a unit
    diagonal, so assembled matrices stay SPD for positive kappa.
    """

    def __init__(self, tri: Triangulation, bc: BoundarySpec):
        self.tri = tri
        self.bc = bc
        grid = tri.grid
        n = grid.n_nodes
        d1 = grid.dim + 1
        n_el = tri.n_elements

        self.is_dirichlet = np.zeros(n, dtype=bool)
        self.is_dirichlet[bc.dirichlet_nodes] = True

        rows = np.repeat(tri.elements, d1, axis=1).reshape(-1)
        cols = np.tile(tri.elements, (1, d1)).reshape(-1)
        tmpl = tri.local_stiffness[tri.element_shape].reshape(-1)
        ent_el = np.repeat(np.arange(n_el, dtype=np.int64), d1 * d1)

        keep = ~(self.is_dirichlet[rows] | self.is_dirichlet[cols])
        rows, cols, tmpl, ent_el = rows[keep], cols[keep], tmpl[keep], ent_el[keep]

        # unit diagonal for eliminated nodes, carried by a dummy kappa slot
        dn = bc.dirichlet_nodes.astype(np.int64)
        rows = np.concatenate([rows, dn])
        cols = np.concatenate([cols, dn])
        tmpl = np.concatenate([tmpl, np.ones(dn.size)])
        ent_el = np.concatenate([ent_el, np.full(dn.size, n_el, dtype=np.int64)])

        order = np.lexsort((cols, rows))
        rows, cols = rows[order], cols[order]
        self._tmpl_sorted = np.ascontiguousarray(tmpl[order])
        self._entry_el = np.ascontiguousarray(ent_el[order])

        new_group = np.empty(rows.size, dtype=bool)
        new_group[0] = True
        new_group[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
        self._entry_pos = np.cumsum(new_group) - 1
        starts = np.flatnonzero(new_group)
        self.nnz = starts.size
        self._indices = cols[starts].astype(np.int32)
        row_of_group = rows[starts]
        self._indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(self._indptr, row_of_group + 1, 1)
        self._indptr = np.cumsum(self._indptr)

    def element_kappa(self, kappa_nodal: np.ndarray) -> np.ndarray:
        return kappa_nodal[self.tri.elements].mean(axis=1)

    def assemble(self, kappa_nodal: np.ndarray) -> sparse.csr_matrix:
        if kappa_nodal.shape != (self.tri.grid.n_nodes,):
            raise ValueError("kappa must be a flat nodal array")
        if np.any(kappa_nodal <= 0.0) or not np.all(np.isfinite(kappa_nodal)):
            raise ValueError("conductivity must be positive and finite everywhere")
        kap_ext = np.append(self.element_kappa(kappa_nodal), 1.0)
        vals = kap_ext[self._entry_el] * self._tmpl_sorted
        data = np.bincount(self._entry_pos, weights=vals, minlength=self.nnz)
        n = self.tri.grid.n_nodes
        return sparse.csr_matrix((data, self._indices, self._indptr), shape=(n, n))

    def load_vector(self, q_nodal: np.ndarray) -> np.ndarray:
        """Lumped load b_i = q_i * V_i, zeroed on Dirichlet nodes."""
        b = q_nodal * self.tri.lumped_node_volume
        b[self.is_dirichlet] = 0.0
        return b


def assemble_stiffness(tri: Triangulation, bc: BoundarySpec, kappa: ScalarField) -> sparse.csr_matrix:
    """Eliminated stiffness matrix for nodal conductivity kappa."""
    if kappa.grid != tri.grid:
        raise ValueError("kappa grid does not match triangulation grid")
    return tri.assembler(bc).assemble(kappa.values)


class LinearHeatSystem:
    """One conductivity state of the discrete operator, with solver reuse.

    set_kappa swaps the matrix; the preconditioner is kept until CG slows
    down past refresh_limit iterations, then rebuilt from the current
    matrix. With 'direct' every matrix is factored exactly once.
    """

    def __init__(self, assembler: StiffnessAssembler, settings: SolverSettings,
                 refresh_limit: int = 60):
        self.assembler = assembler
        self.settings = settings
        self.refresh_limit = refresh_limit
        self.matrix = None
        self._prec = None
        self._prec_fresh = False
        self._factor = None
        self.last_iters = 0

    def set_kappa(self, kappa_nodal: np.ndarray):
        self.matrix = self.assembler.assemble(kappa_nodal)
        self._factor = None
        self._prec_fresh = False
        if self.settings.preconditioner == "jacobi":
            self._prec = self._build_prec()
            self._prec_fresh = True

    def _build_prec(self):
        A = self.matrix
        kind = self.settings.preconditioner
        if kind == "jacobi":
            inv_diag = 1.0 / A.diagonal()
            return spla.LinearOperator(A.shape, matvec=lambda x: inv_diag * x)
        if kind == "ichol-like":
            return _ichol_operator(A)
        if kind == "amg":
            import pyamg

            ml = pyamg.ruge_stuben_solver(A.tocsr())
            return ml.aspreconditioner(cycle="V")
        raise AssertionError(kind)

    def _cg(self, b, cap):
        count = [0]

        def cb(_):
            count[0] += 1

        x, info = spla.cg(
            self.matrix, b, rtol=self.settings.rel_tol, atol=0.0,
            maxiter=cap, M=self._prec, callback=cb,
        )
        return x, info, count[0]

    def solve(self, b: np.ndarray) -> np.ndarray:
        if self.matrix is None:
            raise SolverError("set_kappa must be called before solve")
        if not np.any(b):
            return np.zeros_like(b)
        if self.settings.preconditioner == "direct":
            if self._factor is None:
                self._factor = spla.splu(self.matrix.tocsc())
            x = self._factor.solve(b)
            self._check_residual(x, b)
            return x
        cap = self.settings.iter_cap(self.assembler.tri.grid)
        if self._prec is None:
            self._prec = self._build_prec()
            self._prec_fresh = True
        x, info, iters = self._cg(b, cap)
        if info != 0 or iters > self.refresh_limit:
            if not self._prec_fresh:
                self._prec = self._build_prec()
                self._prec_fresh = True
                x, info, iters = self._cg(b, cap)
        self.last_iters = iters
        if info != 0:
            res = np.linalg.norm(self.matrix @ x - b) / np.linalg.norm(b)
            raise SolverError(
                f"CG failed to converge in {cap} iterations "
                f"(relative residual {res:.3e}, preconditioner {self.settings.preconditioner!r})"
            )
        return x

    def _check_residual(self, x, b):
        nb = np.linalg.norm(b)
        res = np.linalg.norm(self.matrix @ x - b) / nb
        if res > max(self.settings.rel_tol, 1e-12):
            raise SolverError(f"direct solve residual {res:.3e} exceeds tolerance")


def _system_for(tri, bc, kappa, settings):
    if kappa.grid != tri.grid:
        raise ValueError("kappa grid does not match triangulation grid")
    sys_ = LinearHeatSystem(tri.assembler(bc), settings)
    sys_.set_kappa(kappa.values)
    return sys_


def solve_state(tri: Triangulation, bc: BoundarySpec, kappa: ScalarField,
                q: ScalarField, settings: SolverSettings = SolverSettings()) -> ScalarField:
    """Temperature field for -div(kappa grad T) = q with the given boundary set."""
    system = _system_for(tri, bc, kappa, settings)
    b = system.assembler.load_vector(q.values)
    x = system.solve(b)
    x[system.assembler.is_dirichlet] = 0.0
    return ScalarField(tri.grid, x)


def solve_adjoint(tri: Triangulation, bc: BoundarySpec, kappa: ScalarField,
                  q: ScalarField, T: ScalarField, xi: float,
                  settings: SolverSettings = SolverSettings()) -> ScalarField:
    """Adjoint temperature from its own weak form.

    The adjoint of the compliance-plus-penalty objective solves
    A T* = -(b + xi A T); analytically T* = -(1 + xi) T, which makes the
    numeric solve a useful cross-check rather than a shortcut.
    """
    system = _system_for(tri, bc, kappa, settings)
    b = system.assembler.load_vector(q.values)
    rhs = -(b + xi * (system.matrix @ T.values))
    rhs[system.assembler.is_dirichlet] = 0.0
    x = system.solve(rhs)
    x[system.assembler.is_dirichlet] = 0.0
    return ScalarField(tri.grid, x)


def gradient_product_field(tri: Triangulation, T: ScalarField, T_star: ScalarField,
                           xi: float) -> ScalarField:
    """Nodal field of (xi/2) |grad T|^2 + grad T . grad T*.

    Element values are averaged onto nodes with element-volume weights
    (all elements share one volume, so this is a plain mean over the
    elements touching each node).
    """
    if T.grid != tri.grid or T_star.grid != tri.grid:
        raise ValueError("field grids do not match triangulation grid")
    gT = tri.element_gradients(T.values)
    gS = tri.element_gradients(T_star.values)
    elem_val = 0.5 * xi * np.einsum("ed,ed->e", gT, gT) + np.einsum("ed,ed->e", gT, gS)
    n = tri.grid.n_nodes
    d1 = tri.grid.dim + 1
    flat_nodes = tri.elements.reshape(-1)
    num = np.bincount(flat_nodes, weights=np.repeat(elem_val, d1), minlength=n)
    den = np.bincount(flat_nodes, minlength=n).astype(float)
    return ScalarField(tri.grid, num / den)
