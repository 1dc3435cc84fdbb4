"""Hierarchical C0 spline space on the six-patch cube.

Level ``l`` is the uniform multipatch space obtained by bisecting every knot
span ``l`` times; its global functions come from :class:`GlobalDofMap`. The
hierarchy is described by nested cell domains ``Omega_0 = everything ⊇
Omega_1 ⊇ ...`` stored as boolean masks over the level-``l`` cells. A level-``l``
function is active when its support lies in ``Omega_l`` but not in
``Omega_{l+1}``. Refining a function adds its support to ``Omega_{l+1}``, which
deactivates it and activates (at least) all of its children.

Active functions are numbered level by level, increasing global index within
a level. Everything downstream works through the extraction matrix ``E``
which writes each active function in the discontinuous per-face tensor basis
of the finest active level; an unrefined space is the special case where
``E`` is the 0/1 gluing matrix.
"""
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import CapacityError, InvalidArgument
from .spline import uniform_refine
from .topology import NUM_FACES, GlobalDofMap

_LEVEL_MAPS = {}
_PROLONG = {}


def level_map(n0, p, level):
    """Uniform multipatch basis after ``level`` bisections of ``Xi_{n0,p}``."""
    key = (n0, p, level)
    if key not in _LEVEL_MAPS:
        n = (n0 - p) * 2**level + p
        _LEVEL_MAPS[key] = GlobalDofMap(n, p)
    return _LEVEL_MAPS[key]


def global_prolongation(n0, p, level):
    """Sparse ``T`` with ``c_{l+1} = T @ c_l`` between consecutive levels."""
    key = (n0, p, level)
    if key not in _PROLONG:
        coarse = level_map(n0, p, level)
        fine = level_map(n0, p, level + 1)
        _, T1 = uniform_refine(coarse.univariate)
        Tloc = sp.kron(T1.matrix, T1.matrix, format="csr")
        Tblk = sp.block_diag([Tloc] * NUM_FACES, format="csr")
        T = fine.selection @ Tblk @ coarse.gluing.T
        T = sp.csr_matrix(T)
        T.eliminate_zeros()
        T.sort_indices()
        _PROLONG[key] = T
    return _PROLONG[key]


def _window_all(mask, p):
    """``out[f, i, j]`` is True iff every cell supporting local function
    ``(i, j)`` is in ``mask`` (shape ``(6, nel, nel)``)."""
    nf, nel, _ = mask.shape
    n = nel + p
    padded = np.ones((nf, nel + 2 * p, nel + 2 * p), dtype=bool)
    padded[:, p:p + nel, p:p + nel] = mask
    out = np.ones((nf, n, n), dtype=bool)
    # function i covers cells i-p .. i, i.e. padded rows i .. i+p
    for a in range(p + 1):
        for b in range(p + 1):
            out &= padded[:, a:a + n, b:b + n]
    return out


def _coarsen(mask):
    """Level-``l`` cells all of whose children are set in a level-``l+1``
    cell mask."""
    nf, n2, _ = mask.shape
    return mask.reshape(nf, n2 // 2, 2, n2 // 2, 2).all(axis=(2, 4))


class SplineSpace:
    """Active hierarchical basis plus the machinery to use it.

    Parameters
    ----------
    n, p : int
        Base cardinality per direction and degree.
    domains : list of bool arrays, optional
        ``domains[l]`` marks refined level-``l`` cells (``l >= 1``); omitted
        for a uniform space.
    max_level : int
        Highest level that may be created by refinement.
    """

    def __init__(self, n, p, domains=None, max_level=3):
        self.n0, self.p = int(n), int(p)
        self.max_level = int(max_level)
        base = level_map(self.n0, self.p, 0)
        doms = [np.ones((NUM_FACES, base.n - self.p, base.n - self.p), dtype=bool)]
        for l, d in enumerate(domains[1:] if domains else [], start=1):
            d = np.asarray(d, dtype=bool)
            nel = (self.n0 - self.p) * 2**l
            if d.shape != (NUM_FACES, nel, nel):
                raise InvalidArgument(f"domain mask at level {l} has wrong shape")
            doms.append(d.copy())
        while len(doms) > 1 and not doms[-1].any():
            doms.pop()
        for d in doms:
            d.setflags(write=False)
        self.domains = doms

        self.active = []
        for l in range(len(doms)):
            m = level_map(self.n0, self.p, l)
            inside = self._contained(l, doms[l])
            if l + 1 < len(doms):
                inside &= ~self._contained(l, _coarsen(doms[l + 1]))
            self.active.append(np.flatnonzero(inside))
        while len(self.active) > 1 and len(self.active[-1]) == 0:
            self.active.pop()
        self.offsets = np.cumsum([0] + [len(a) for a in self.active])

    # -- structure -----------------------------------------------------------

    @classmethod
    def uniform(cls, n, p, max_level=3):
        return cls(n, p, None, max_level)

    @property
    def num_levels(self):
        return len(self.active)

    @property
    def finest(self):
        return self.num_levels - 1

    @property
    def num_dofs(self):
        return int(self.offsets[-1])

    @property
    def is_uniform(self):
        return self.num_levels == 1

    def level_map(self, level):
        return level_map(self.n0, self.p, level)

    @property
    def fine_map(self):
        """Uniform level on whose cells the active functions are polynomial."""
        return self.level_map(self.finest)

    def dof_levels(self):
        return np.concatenate([np.full(len(a), l) for l, a in enumerate(self.active)])

    def dof_ids(self):
        return np.concatenate(self.active)

    @cached_property
    def is_interface(self):
        """Active functions that are non-zero on some patch interface."""
        return np.concatenate([self.level_map(l).is_interface[a] for l, a in enumerate(self.active)])

    def _contained(self, level, mask):
        m = self.level_map(level)
        loc = _window_all(mask, self.p)
        out = np.ones(m.num_global, dtype=bool)
        np.logical_and.at(out, m.local_to_global.ravel(), loc.ravel())
        return out

    def __eq__(self, other):
        if not isinstance(other, SplineSpace):
            return NotImplemented
        return (
            (self.n0, self.p) == (other.n0, other.p)
            and len(self.domains) == len(other.domains)
            and all(np.array_equal(a, b) for a, b in zip(self.domains, other.domains))
        )

    __hash__ = None

    # -- extraction ----------------------------------------------------------

    @cached_property
    def extraction(self):
        """``E`` (num_dofs x 6 n_L^2): row ``k`` expresses active function
        ``k`` in the per-face tensor basis of the finest level ``L``."""
        L = self.finest
        fine = self.level_map(L)
        blocks = []
        P = sp.identity(fine.num_global, format="csr")
        for l in range(L, -1, -1):
            if l < L:
                P = P @ global_prolongation(self.n0, self.p, l)
            blocks.append((fine.gluing.T @ P[:, self.active[l]]).T)
        E = sp.vstack(blocks[::-1], format="csr")
        E.eliminate_zeros()
        E.sort_indices()
        return E

    def to_local(self, coeffs):
        """Coefficients of active functions -> ``(6, n_L, n_L, ...)`` arrays."""
        c = np.asarray(coeffs, dtype=float)
        if c.shape[0] != self.num_dofs:
            raise InvalidArgument(f"expected {self.num_dofs} coefficients, got {c.shape[0]}")
        n = self.fine_map.n
        flat = c.reshape(c.shape[0], -1)
        loc = np.asarray(self.extraction.T @ flat)
        return loc.reshape((NUM_FACES, n, n) + c.shape[1:])

    def evaluate(self, coeffs, face, xi, eta, derivative="value"):
        from .topology import eval_local

        loc = self.to_local(coeffs)[int(face)]
        return eval_local(self.fine_map.univariate, loc, xi, eta, derivative)

    # -- refinement ----------------------------------------------------------

    def support_cells(self, level, gid):
        """Level-``level`` cells ``(f, a, b)`` in the support of global ``gid``."""
        m = self.level_map(level)
        nel = m.n - self.p
        out = []
        for f, i, j in zip(*np.nonzero(m.local_to_global == gid)):
            for a in range(max(0, i - self.p), min(i, nel - 1) + 1):
                for b in range(max(0, j - self.p), min(j, nel - 1) + 1):
                    out.append((f, a, b))
        return out

    def refine(self, marked):
        """Refine the active functions with indices ``marked``.

        Returns ``(new_space, R)`` where ``R`` is a sparse matrix mapping old
        coefficient vectors to new ones so every represented function is
        unchanged.
        """
        marked = np.unique(np.asarray(marked, dtype=np.int64))
        if marked.size == 0:
            return self, sp.identity(self.num_dofs, format="csr")
        if marked.min() < 0 or marked.max() >= self.num_dofs:
            raise InvalidArgument("marked index out of range")
        levels = self.dof_levels()[marked]
        if levels.max() >= self.max_level:
            raise CapacityError(f"refinement beyond level {self.max_level} requested")
        ids = self.dof_ids()[marked]
        doms = [d.copy() for d in self.domains]
        for l, g in zip(levels, ids):
            while len(doms) <= l + 1:
                nel = (self.n0 - self.p) * 2**len(doms)
                doms.append(np.zeros((NUM_FACES, nel, nel), dtype=bool))
            for f, a, b in self.support_cells(int(l), int(g)):
                doms[l + 1][f, 2 * a:2 * a + 2, 2 * b:2 * b + 2] = True
        new = SplineSpace(self.n0, self.p, doms, self.max_level)
        return new, transfer_matrix(self, new)


def transfer_matrix(old, new):
    """Exact coefficient transfer between nested hierarchical spaces.

    Coefficients of functions that are no longer active are pushed to the
    next level through the prolongation until they land on active functions.
    """
    nlev = max(old.num_levels, new.num_levels)
    nold = old.num_dofs
    C = []
    for l in range(nlev):
        N = level_map(old.n0, old.p, l).num_global
        if l < old.num_levels:
            a = old.active[l]
            cols = np.arange(old.offsets[l], old.offsets[l + 1])
            C.append(sp.csr_matrix((np.ones(len(a)), (a, cols)), shape=(N, nold)))
        else:
            C.append(sp.csr_matrix((N, nold)))
    for l in range(nlev):
        keep = np.zeros(C[l].shape[0], dtype=bool)
        if l < new.num_levels:
            keep[new.active[l]] = True
        gone = np.flatnonzero(~keep)
        pushed = C[l][gone]
        if pushed.nnz:
            if l + 1 >= nlev:
                raise InvalidArgument("coefficients left on inactive finest-level functions")
            T = global_prolongation(old.n0, old.p, l)
            C[l + 1] = C[l + 1] + T[:, gone] @ pushed
    R = sp.vstack([C[l][new.active[l]] for l in range(new.num_levels)], format="csr")
    R.eliminate_zeros()
    return R
