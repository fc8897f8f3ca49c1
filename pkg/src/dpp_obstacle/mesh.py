"""Square lattice over the extended domain X = Omega u Gamma and its eps-ball stencils.

Nodes sit at integer multiples of ``h`` (the origin is always a node) and are
ordered row-major: ``index = row * n + col`` with rows running over y and
columns over x, both ascending.  Because ``eps < collar`` every interior ball
lies completely inside the lattice, so a single offset table describes all
stencils.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import NonIntegerRadius, NonPositiveSpacing, NotInterior, RadiusExceedsCollar

_REL_TOL = 1e-9


class NodeClass(str, Enum):
    INTERIOR = "interior"
    COLLAR = "collar"


def _last_index_below(bound: float, h: float) -> int:
    """Largest integer i with i*h strictly below ``bound`` (lattice-aware rounding)."""
    r = bound / h
    n = round(r)
    if abs(r - n) < _REL_TOL * max(1.0, abs(r)):
        return int(n) - 1
    return int(math.floor(r))


def ball_offsets(m: int) -> np.ndarray:
    """Integer offsets (di, dj) with di^2 + dj^2 <= m^2, sorted by (dj, di).

    This is ascending order of the flat node-index offset ``dj * n + di`` for
    any row length ``n > 2m``.
    """
    out = [(di, dj) for dj in range(-m, m + 1) for di in range(-m, m + 1) if di * di + dj * dj <= m * m]
    return np.array(out, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class Mesh:
    h: float
    a: float
    collar: float
    eps: float
    m: int                      # radius in mesh units
    n_side: int                 # nodes per axis
    n_int: int                  # interior nodes per axis
    offsets: np.ndarray = field(repr=False)      # (k, 2) ints (di, dj)
    nodes: np.ndarray = field(repr=False)        # (N, 2) coordinates
    interior: np.ndarray = field(repr=False)     # (N,) bool

    @property
    def k(self) -> int:
        return len(self.offsets)

    @property
    def n_nodes(self) -> int:
        return self.n_side * self.n_side

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_side, self.n_side)

    @property
    def x(self) -> np.ndarray:
        return self.nodes[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.nodes[:, 1]

    @property
    def collar_mask(self) -> np.ndarray:
        return ~self.interior

    @property
    def interior_indices(self) -> np.ndarray:
        return np.flatnonzero(self.interior)

    @property
    def interior_slice(self) -> slice:
        """Row/column slice of the interior block in the 2-D node array."""
        lo = (self.n_side - self.n_int) // 2
        return slice(lo, lo + self.n_int)

    @property
    def flat_offsets(self) -> np.ndarray:
        """Stencil offsets as flat index deltas, ascending."""
        return self.offsets[:, 1] * self.n_side + self.offsets[:, 0]

    @property
    def node_class(self) -> list[NodeClass]:
        return [NodeClass.INTERIOR if f else NodeClass.COLLAR for f in self.interior]

    def index_of(self, point) -> int:
        """Index of the lattice node at ``point`` (must coincide with a node)."""
        half = self.n_side // 2
        col = int(round(point[0] / self.h)) + half
        row = int(round(point[1] / self.h)) + half
        if not (0 <= col < self.n_side and 0 <= row < self.n_side):
            raise IndexError(f"point {tuple(point)} outside the lattice")
        idx = row * self.n_side + col
        if np.hypot(*(self.nodes[idx] - np.asarray(point, float))) > 1e-6 * self.h:
            raise IndexError(f"point {tuple(point)} is not a lattice node")
        return idx

    def classify(self, point) -> NodeClass:
        """Classify an arbitrary point of X by the open square (-a, a)^2."""
        x, y = point
        lim = self.a + self.collar
        if not (abs(x) < lim and abs(y) < lim):
            raise ValueError(f"point {tuple(point)} lies outside X")
        if abs(x) < self.a and abs(y) < self.a:
            return NodeClass.INTERIOR
        return NodeClass.COLLAR

    def stencil_array(self, nodes=None) -> np.ndarray:
        """(len(nodes), k) array of sorted stencil indices; defaults to all interior nodes."""
        if nodes is None:
            nodes = self.interior_indices
        nodes = np.asarray(nodes, dtype=np.int64)
        return nodes[:, None] + self.flat_offsets[None, :]

    def to_grid(self, values) -> np.ndarray:
        return np.asarray(values).reshape(self.shape)


def build_mesh(h: float, a: float = 1.0, collar: float = 0.2, eps: float | None = None) -> Mesh:
    """Build the lattice over X = (-a-collar, a+collar)^2 with eps-ball stencils.

    ``eps`` must be a positive integer multiple of ``h`` and strictly smaller
    than ``collar``.  Ball membership is the closed condition |p_j - p| <= eps.
    """
    if not (h > 0 and math.isfinite(h)):
        raise NonPositiveSpacing(f"mesh spacing must be positive, got {h}")
    if not (a > 0 and collar > 0):
        raise ValueError("domain half-width and collar width must be positive")
    if eps is None:
        eps = h
    if not eps > 0:
        raise NonIntegerRadius(f"radius must be a positive multiple of h, got {eps}")
    m_real = eps / h
    m = round(m_real)
    if m < 1 or abs(m_real - m) > _REL_TOL * max(1.0, m_real):
        raise NonIntegerRadius(f"eps={eps} is not an integer multiple of h={h}")
    if eps >= collar:
        raise RadiusExceedsCollar(f"eps={eps} must be smaller than the collar width {collar}")

    i_out = _last_index_below(a + collar, h)
    i_in = _last_index_below(a, h)
    if i_out - i_in < m:
        # lattice cannot hold the full ball around the outermost interior node
        raise RadiusExceedsCollar(f"collar holds {i_out - i_in} lattice layers, radius needs {m}")
    ticks = np.arange(-i_out, i_out + 1) * h
    n_side = len(ticks)
    yy, xx = np.meshgrid(ticks, ticks, indexing="ij")
    nodes = np.column_stack([xx.ravel(), yy.ravel()])
    idx = np.arange(-i_out, i_out + 1)
    inside_1d = np.abs(idx) <= i_in
    interior = (inside_1d[:, None] & inside_1d[None, :]).ravel()
    return Mesh(
        h=float(h), a=float(a), collar=float(collar), eps=float(eps), m=int(m),
        n_side=n_side, n_int=2 * i_in + 1, offsets=ball_offsets(m),
        nodes=nodes, interior=interior,
    )


def stencil_of(mesh: Mesh, node: int) -> list[int]:
    """Sorted indices of the nodes within distance eps of an interior node (center included)."""
    node = int(node)
    if not (0 <= node < mesh.n_nodes) or not mesh.interior[node]:
        raise NotInterior(f"node {node} is not an interior node")
    return (node + mesh.flat_offsets).tolist()
