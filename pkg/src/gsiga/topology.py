"""Six-patch hollow-cube parametric domain and C0 degree-of-freedom coupling.

Face convention: face ``f`` lies in the plane ``x[normal] = sign`` and is
parameterised over ``(xi, eta) in [0, 1]^2`` by

    x = sign * e_normal + (2 xi - 1) * e_u + (2 eta - 1) * e_v

with ``e_u x e_v = sign * e_normal`` so every face is outward oriented:

====  ======  ====  ===  ===
face  plane   sign  u    v
====  ======  ====  ===  ===
0     x = +1  +1    y    z
1     x = -1  -1    z    y
2     y = +1  +1    z    x
3     y = -1  -1    x    z
4     z = +1  +1    x    y
5     z = -1  -1    y    x
====  ======  ====  ===  ===

Local edges are numbered 0: ``xi = 0``, 1: ``xi = 1``, 2: ``eta = 0``,
3: ``eta = 1``.

Coupling uses the fact that with identical open uniform knot vectors the
function ``(i, j)`` of face ``f`` is anchored at the cube-lattice point
``sign*(n-1) e_normal + (2i-(n-1)) e_u + (2j-(n-1)) e_v``. Local functions
sharing an anchor are glued into one global function. Edge reversals are
absorbed by the symmetry of the knot vector, so the map needs no per-edge
logic afterwards.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgument, OutOfDomain
from .spline import TensorBasis, UnivariateBasis, make_open_uniform_knots

NUM_FACES = 6

# (normal axis, sign, u axis, v axis)
FACE_FRAMES = (
    (0, +1, 1, 2),
    (0, -1, 2, 1),
    (1, +1, 2, 0),
    (1, -1, 0, 2),
    (2, +1, 0, 1),
    (2, -1, 1, 0),
)

# local edge -> (fixed parameter 0/1 for xi/eta, fixed value)
_EDGE_DEF = ((0, 0.0), (0, 1.0), (1, 0.0), (1, 1.0))


@dataclass(frozen=True)
class Face:
    id: int
    normal_axis: int
    sign: int
    u_axis: int
    v_axis: int

    def cube_point(self, xi, eta):
        """Points on the cube surface for parameter arrays ``xi, eta``."""
        xi = np.asarray(xi, dtype=float)
        eta = np.asarray(eta, dtype=float)
        out = np.zeros(np.broadcast(xi, eta).shape + (3,))
        out[..., self.normal_axis] = self.sign
        out[..., self.u_axis] = 2.0 * xi - 1.0
        out[..., self.v_axis] = 2.0 * eta - 1.0
        return out

    @property
    def outward_normal(self):
        e = np.zeros(3)
        e[self.normal_axis] = self.sign
        return e

    def jacobian(self):
        """Constant 3x2 Jacobian of the face parameterisation."""
        J = np.zeros((3, 2))
        J[self.u_axis, 0] = 2.0
        J[self.v_axis, 1] = 2.0
        return J


FACES = tuple(Face(i, *fr) for i, fr in enumerate(FACE_FRAMES))


@dataclass(frozen=True)
class EdgeAdjacency:
    face_a: int
    local_edge_a: int
    face_b: int
    local_edge_b: int
    orientation_flip: bool

    def edge_params(self, t):
        """Parametric points on both faces for edge coordinate ``t`` in [0, 1]
        (measured along face_a's running parameter)."""
        ta = np.asarray(t, dtype=float)
        tb = 1.0 - ta if self.orientation_flip else ta
        return _edge_point(self.local_edge_a, ta), _edge_point(self.local_edge_b, tb)


def _edge_point(edge, t):
    fixed, val = _EDGE_DEF[edge]
    t = np.asarray(t, dtype=float)
    c = np.full_like(t, val)
    return (c, t) if fixed == 0 else (t, c)


def build_cube_topology():
    """Faces, the 12 oriented edge adjacencies and the 8 vertex triples.

    Vertices are returned as a list of ``(corner, [(face, (xi, eta)), ...])``
    with the corner a 3-tuple of ``+-1``.
    """
    edges = []
    ends = {}
    for f in FACES:
        for e in range(4):
            a, b = _edge_point(e, np.array([0.0, 1.0]))
            pts = f.cube_point(a, b)
            ends[(f.id, e)] = pts
    seen = set()
    for fa in range(NUM_FACES):
        for ea in range(4):
            if (fa, ea) in seen:
                continue
            pa = ends[(fa, ea)]
            for fb in range(fa + 1, NUM_FACES):
                for eb in range(4):
                    pb = ends[(fb, eb)]
                    if np.allclose(pa, pb):
                        flip = False
                    elif np.allclose(pa, pb[::-1]):
                        flip = True
                    else:
                        continue
                    edges.append(EdgeAdjacency(fa, ea, fb, eb, flip))
                    seen.update({(fa, ea), (fb, eb)})
    vertices = {}
    for f in FACES:
        for xi in (0.0, 1.0):
            for eta in (0.0, 1.0):
                c = tuple(int(v) for v in np.rint(f.cube_point(xi, eta)))
                vertices.setdefault(c, []).append((f.id, (xi, eta)))
    return FACES, edges, sorted(vertices.items())


class GlobalDofMap:
    """C0 coupling of six identical tensor bases into one global basis.

    Attributes
    ----------
    n, p : int
        Per-direction cardinality and degree.
    local_to_global : ndarray of int, shape (6, n, n)
    num_global : int
        ``6 n^2 - 12 n + 8``.
    owner : ndarray of int, shape (num_global,)
        Flat local index ``f * n^2 + i * n + j`` of the owning function
        (lowest face id).
    """

    def __init__(self, n, p, patch_bases=None):
        n, p = int(n), int(p)
        if n < 2:
            raise InvalidArgument("need at least two functions per direction")
        kv = make_open_uniform_knots(n, p)
        basis = TensorBasis(UnivariateBasis(kv), UnivariateBasis(kv))
        if patch_bases is not None:
            if len(patch_bases) != NUM_FACES or any(b != basis for b in patch_bases):
                raise InvalidArgument("all patches need identical open uniform bases")
        self.n, self.p = n, p
        self.knot_vector = kv
        self.univariate = basis.basis_xi
        self.tensor = basis

        l2g = np.empty((NUM_FACES, n, n), dtype=np.int64)
        keys = {}
        m = n - 1
        ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        owner = []
        for f in FACES:
            lat = np.zeros((n, n, 3), dtype=np.int64)
            lat[..., f.normal_axis] = f.sign * m
            lat[..., f.u_axis] = 2 * ii - m
            lat[..., f.v_axis] = 2 * jj - m
            for i in range(n):
                for j in range(n):
                    key = tuple(lat[i, j])
                    g = keys.get(key)
                    if g is None:
                        g = len(keys)
                        keys[key] = g
                        owner.append(f.id * n * n + i * n + j)
                    l2g[f.id, i, j] = g
        l2g.setflags(write=False)
        self.local_to_global = l2g
        self.num_global = len(keys)
        self.owner = np.array(owner, dtype=np.int64)
        mult = np.bincount(l2g.ravel(), minlength=self.num_global)
        self.multiplicity = mult
        self.is_interface = mult > 1

    @property
    def num_local(self):
        return NUM_FACES * self.n * self.n

    @cached_property
    def gluing(self):
        """0/1 matrix ``G`` (num_global x num_local); local coeffs = ``G.T @ c``."""
        cols = np.arange(self.num_local)
        rows = self.local_to_global.ravel()
        G = sp.csr_matrix((np.ones(self.num_local), (rows, cols)), shape=(self.num_global, self.num_local))
        return G

    @cached_property
    def selection(self):
        """Picks the owner's local entry for every global function."""
        S = sp.csr_matrix(
            (np.ones(self.num_global), (np.arange(self.num_global), self.owner)),
            shape=(self.num_global, self.num_local),
        )
        return S

    def to_local(self, coeffs):
        """Global coefficients -> per-face arrays of shape ``(6, n, n, ...)``."""
        c = np.asarray(coeffs)
        return c[self.local_to_global]

    def __eq__(self, other):
        return isinstance(other, GlobalDofMap) and (self.n, self.p) == (other.n, other.p)

    def __hash__(self):
        return hash((self.n, self.p))


def build_global_basis(n, p, patch_bases=None):
    return GlobalDofMap(n, p, patch_bases)


_DERIVS = {"value": (0, 0), "d_xi": (1, 0), "d_eta": (0, 1), "d_xixi": (2, 0), "d_xieta": (1, 1), "d_etaeta": (0, 2)}


def eval_local(univariate, local_coeffs, xi, eta, derivative=(0, 0)):
    """Evaluate a tensor spline with coefficients ``local_coeffs[(n, n, ...)]``
    at parameter arrays ``xi, eta`` (same shape)."""
    if isinstance(derivative, str):
        derivative = _DERIVS[derivative]
    dx, dy = derivative
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    shape = np.broadcast(xi, eta).shape
    xi, eta = np.broadcast_to(xi, shape).ravel(), np.broadcast_to(eta, shape).ravel()
    p1 = univariate.degree + 1
    fx, vx = univariate.eval_many(xi, dx)
    fy, vy = univariate.eval_many(eta, dy)
    ix = fx[:, None] + np.arange(p1)
    iy = fy[:, None] + np.arange(p1)
    C = np.asarray(local_coeffs)
    block = C[ix[:, :, None], iy[:, None, :]]
    out = np.einsum("kr,ks,krs...->k...", vx[:, dx, :], vy[:, dy, :], block)
    return out.reshape(shape + C.shape[2:])


def global_function_eval(dof_map, coefficients, face, xi, eta, derivative="value"):
    """Evaluate the glued function on one face.

    ``derivative`` is one of ``"value", "d_xi", "d_eta", "d_xixi", "d_xieta",
    "d_etaeta"`` or a tuple ``(dxi, deta)``.
    """
    c = np.asarray(coefficients)
    if c.shape[0] != dof_map.num_global:
        raise InvalidArgument("coefficient vector does not match the basis")
    if not 0 <= int(face) < NUM_FACES:
        raise OutOfDomain(f"no face {face}")
    return eval_local(dof_map.univariate, dof_map.to_local(c)[int(face)], xi, eta, derivative)
