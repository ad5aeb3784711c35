"""Parameter boxes, probability densities and multilinear hat Gramians.

The parametric domain is a box, discretized per dimension by a partition
into cells carrying piecewise linear hat functions.  The tensor products of
these hats form the multilinear basis; all inner products are taken with the
product probability density.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Density1D",
    "ParamGrid",
    "Gramians",
    "build_param_grid",
    "deterministic_grid",
    "assemble_gramians",
    "multilinear_evaluate",
]


@dataclass(frozen=True)
class Density1D:
    """Probability density on an interval, with optional exact sampling."""

    kind: str
    support: tuple[float, float]
    pdf: Callable[[np.ndarray], np.ndarray]
    sampler: Callable[[np.random.Generator, int], np.ndarray] | None = None

    def __post_init__(self):
        c, d = self.support
        if not d > c:
            raise ValueError(f"empty support ({c}, {d})")
        mass = self.moment(0)
        if abs(mass - 1.0) > 1e-9:
            raise ValueError(f"density {self.kind!r} integrates to {mass!r}, not 1")

    def moment(self, k: int, n_cells: int = 64, n_pts: int = 10) -> float:
        """integral of y^k p(y) by composite Gauss-Legendre."""
        c, d = self.support
        edges = np.linspace(c, d, n_cells + 1)
        gx, gw = np.polynomial.legendre.leggauss(n_pts)
        h = (d - c) / n_cells
        mids = 0.5 * (edges[:-1] + edges[1:])
        y = (mids[:, None] + 0.5 * h * gx[None, :]).ravel()
        w = np.tile(0.5 * h * gw, n_cells)
        return float(np.sum(w * self.pdf(y) * y ** k))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.sampler is None:
            raise ValueError(f"density {self.kind!r} has no sampler")
        return self.sampler(rng, n)

    @staticmethod
    def uniform(c: float, d: float) -> "Density1D":
        if not d > c:
            raise ValueError(f"empty support ({c}, {d})")
        height = 1.0 / (d - c)
        return Density1D(
            kind="uniform",
            support=(float(c), float(d)),
            pdf=lambda y: np.where((y >= c) & (y <= d), height, 0.0),
            sampler=lambda rng, n: rng.uniform(c, d, n),
        )

    @staticmethod
    def exp_uniform(a: float = -1.0, b: float = 1.0) -> "Density1D":
        """Law of y = exp(xi) with xi uniform on (a, b): p(y) = 1/((b-a) y)."""
        c, d = np.exp(a), np.exp(b)
        width = b - a
        return Density1D(
            kind="exp-uniform",
            support=(float(c), float(d)),
            pdf=lambda y: np.where((y >= c) & (y <= d), 1.0 / (width * y), 0.0),
            sampler=lambda rng, n: np.exp(rng.uniform(a, b, n)),
        )

    @staticmethod
    def from_callable(pdf, support, kind: str = "custom") -> "Density1D":
        return Density1D(kind=kind, support=(float(support[0]), float(support[1])),
                         pdf=pdf)


@dataclass(frozen=True)
class ParamGrid:
    """Tensor grid on a parameter box with per-dimension hat functions.

    Parameter nodes are enumerated in C order (last dimension fastest), so
    the flat node index matches Kronecker products taken dimension 0 first.
    """

    densities: tuple[Density1D, ...]
    breakpoints: tuple[np.ndarray, ...]

    @property
    def n_dims(self) -> int:
        return len(self.densities)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.breakpoints)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape)) if self.n_dims else 1

    @property
    def s(self) -> float:
        """Largest parametric cell width over all dimensions (0 if M = 0)."""
        if self.n_dims == 0:
            return 0.0
        return max(float(np.max(np.diff(b))) for b in self.breakpoints)

    def nodes(self) -> np.ndarray:
        """All parameter nodes as a (n_nodes, n_dims) array, C order."""
        if self.n_dims == 0:
            return np.zeros((1, 0))
        grids = np.meshgrid(*self.breakpoints, indexing="ij")
        return np.column_stack([g.ravel() for g in grids])


def build_param_grid(densities: Sequence[Density1D], cells: int | Sequence[int]) -> ParamGrid:
    """Uniform partition of each density's support into ``cells`` cells."""
    densities = tuple(densities)
    if len(densities) == 0:
        raise ValueError("need at least one dimension; use deterministic_grid()")
    if np.isscalar(cells):
        cells = [int(cells)] * len(densities)
    if len(cells) != len(densities):
        raise ValueError("one cell count per dimension required")
    breaks = []
    for rho, m in zip(densities, cells):
        if m < 1:
            raise ValueError("each dimension needs at least one cell")
        c, d = rho.support
        breaks.append(np.linspace(c, d, m + 1))
    return ParamGrid(densities=densities, breakpoints=tuple(breaks))


def deterministic_grid() -> ParamGrid:
    """Zero-dimensional grid: a single parameter node with unit weight."""
    return ParamGrid(densities=(), breakpoints=())


@dataclass(frozen=True)
class Gramians:
    """Density-weighted Gramians of the multilinear basis.

    G0[j, t] = <psi_j, psi_t>, Gk[j, t] = <y_k psi_j, psi_t>,
    g0[t] = <psi_t, 1>, gk[t] = <y_k, psi_t>; all with the product density.
    """

    G0: sp.csr_array
    Gk: tuple[sp.csr_array, ...]
    g0: np.ndarray
    gk: tuple[np.ndarray, ...]


def _hat_factors_1d(rho: Density1D, breaks: np.ndarray, n_pts: int):
    """Per-dimension weighted mass matrices and moment vectors of the hats."""
    n = len(breaks)
    gx, gw = np.polynomial.legendre.leggauss(n_pts)
    mass0 = np.zeros((n, n))
    massy = np.zeros((n, n))
    vec0 = np.zeros(n)
    vecy = np.zeros(n)
    for l in range(n - 1):
        a, b = breaks[l], breaks[l + 1]
        h = b - a
        y = 0.5 * (a + b) + 0.5 * h * gx
        w = 0.5 * h * gw * rho.pdf(y)
        left = (b - y) / h
        right = (y - a) / h
        mass0[l, l] += np.sum(w * left * left)
        mass0[l, l + 1] += np.sum(w * left * right)
        mass0[l + 1, l] += np.sum(w * left * right)
        mass0[l + 1, l + 1] += np.sum(w * right * right)
        massy[l, l] += np.sum(w * y * left * left)
        massy[l, l + 1] += np.sum(w * y * left * right)
        massy[l + 1, l] += np.sum(w * y * left * right)
        massy[l + 1, l + 1] += np.sum(w * y * right * right)
        vec0[l] += np.sum(w * left)
        vec0[l + 1] += np.sum(w * right)
        vecy[l] += np.sum(w * y * left)
        vecy[l + 1] += np.sum(w * y * right)
    return mass0, massy, vec0, vecy


def assemble_gramians(grid: ParamGrid, n_pts: int = 12) -> Gramians:
    """Assemble the tensor Gramians by Kronecker products of 1D factors.

    ``n_pts`` Gauss-Legendre points per parametric cell; 12 points integrate
    the smooth densities used here to machine precision, which keeps the
    normalization error out of derived statistics.
    """
    if grid.n_dims == 0:
        one = sp.csr_array(np.array([[1.0]]))
        return Gramians(G0=one, Gk=(), g0=np.array([1.0]), gk=())

    factors = [_hat_factors_1d(rho, brk, n_pts)
               for rho, brk in zip(grid.densities, grid.breakpoints)]

    def kron_chain(mats):
        out = sp.csr_array(mats[0])
        for m in mats[1:]:
            out = sp.kron(out, sp.csr_array(m), format="csr")
        return out

    def kron_vec(vecs):
        out = vecs[0]
        for v in vecs[1:]:
            out = np.kron(out, v)
        return out

    G0 = kron_chain([f[0] for f in factors])
    g0 = kron_vec([f[2] for f in factors])
    Gk = []
    gk = []
    for k in range(grid.n_dims):
        mats = [factors[d][1] if d == k else factors[d][0] for d in range(grid.n_dims)]
        vecs = [factors[d][3] if d == k else factors[d][2] for d in range(grid.n_dims)]
        Gk.append(kron_chain(mats))
        gk.append(kron_vec(vecs))
    G0.sort_indices()
    for G in Gk:
        G.sort_indices()
    return Gramians(G0=G0, Gk=tuple(Gk), g0=g0, gk=tuple(gk))


def multilinear_evaluate(grid: ParamGrid, block_values: np.ndarray,
                         y: np.ndarray) -> np.ndarray:
    """Evaluate the multilinear interpolant at parameter points.

    ``block_values`` has shape (n_nodes, ...) with one block per parameter
    node (C order); ``y`` has shape (n_pts, n_dims).  Returns (n_pts, ...).
    """
    if grid.n_dims == 0:
        return np.broadcast_to(block_values[0], (y.shape[0],) + block_values.shape[1:]).copy()
    y = np.atleast_2d(np.asarray(y, dtype=float))
    npts = y.shape[0]
    assert y.shape[1] == grid.n_dims
    assert block_values.shape[0] == grid.n_nodes

    shape = grid.shape
    strides = np.ones(grid.n_dims, dtype=np.int64)
    for d in range(grid.n_dims - 2, -1, -1):
        strides[d] = strides[d + 1] * shape[d + 1]

    cells = []
    wright = []
    for d in range(grid.n_dims):
        brk = grid.breakpoints[d]
        yd = np.clip(y[:, d], brk[0], brk[-1])
        c = np.clip(np.searchsorted(brk, yd, side="right") - 1, 0, len(brk) - 2)
        cells.append(c)
        wright.append((yd - brk[c]) / (brk[c + 1] - brk[c]))

    out = np.zeros((npts,) + block_values.shape[1:])
    extra = (None,) * (block_values.ndim - 1)
    for corner in range(2 ** grid.n_dims):
        idx = np.zeros(npts, dtype=np.int64)
        w = np.ones(npts)
        for d in range(grid.n_dims):
            bit = (corner >> d) & 1
            idx += (cells[d] + bit) * strides[d]
            w = w * (wright[d] if bit else 1.0 - wright[d])
        out += w[(slice(None),) + extra] * block_values[idx]
    return out
