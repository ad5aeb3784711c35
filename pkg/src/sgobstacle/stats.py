"""Moments of the discrete solution and reference statistics of exact solutions.

First and second moments of a tensor Galerkin solution reduce to weighted
sums of the coefficient blocks: the parametric basis integrals g0 give the
mean, the Gramian G0 gives the second moment.  Reference statistics of a
known parametric solution are tensor Gauss-Legendre quadratures against the
product density.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .fem import SpatialFunction
from .mesh import Mesh, write_vtk
from .param import Density1D
from .system import SGSystem

__all__ = [
    "StatField",
    "ParametricFunction",
    "sg_mean",
    "sg_second_moment",
    "sg_variance",
    "exact_statistic",
    "write_stat_csv",
    "write_stat_vtk",
]

VAR_CLIP_TOL = 1e-12

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class StatField:
    """A nodal scalar field over the full mesh node set.

    ``n_clipped`` counts nodes whose value was rounded up to zero; only the
    variance field ever sets it.
    """

    mesh: Mesh
    name: str
    values: np.ndarray
    n_clipped: int = 0

    def __post_init__(self):
        assert self.values.shape == (self.mesh.n_nodes,)


def _full_blocks(system: SGSystem, u: np.ndarray) -> np.ndarray:
    """Coefficient blocks extended by boundary data, shape (J, n_nodes)."""
    I, J = system.n_spatial, system.n_param
    U = u.reshape(J, I)
    full = np.zeros((J, system.mesh.n_nodes))
    full[:, system.mesh.interior] = U
    bnd = np.flatnonzero(system.mesh.boundary)
    if bnd.size:
        full[:, bnd] = system.boundary_values.T
    return full


def sg_mean(system: SGSystem, u: np.ndarray) -> StatField:
    full = _full_blocks(system, u)
    vals = system.gram.g0 @ full
    return StatField(mesh=system.mesh, name="mean", values=vals)


def sg_second_moment(system: SGSystem, u: np.ndarray) -> StatField:
    full = _full_blocks(system, u)
    vals = np.sum(full * (system.gram.G0 @ full), axis=0)
    return StatField(mesh=system.mesh, name="second_moment", values=vals)


def sg_variance(system: SGSystem, u: np.ndarray) -> StatField:
    """Second moment minus squared mean, clipped at zero.

    Small negative values (quadrature and solver roundoff) are tolerated up
    to VAR_CLIP_TOL relative to the field scale and clipped, with the count
    recorded on the returned field; anything more negative raises.
    """
    mean = sg_mean(system, u).values
    m2 = sg_second_moment(system, u).values
    var = m2 - mean ** 2
    scale = max(float(np.max(np.abs(m2))), 1.0)
    if float(np.min(var)) < -VAR_CLIP_TOL * scale:
        raise FloatingPointError(
            f"variance fell below -{VAR_CLIP_TOL} * scale: {float(np.min(var))!r}")
    n_clipped = int(np.count_nonzero(var < 0.0))
    if n_clipped:
        log.warning("clipped %d negative variance node(s), most negative %.3e",
                    n_clipped, float(np.min(var)))
    return StatField(mesh=system.mesh, name="variance",
                     values=np.maximum(var, 0.0), n_clipped=n_clipped)


@dataclass(frozen=True)
class ParametricFunction:
    """u(x, y) with values and x-gradient, vectorized over x batches."""

    value: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None


def tensor_quadrature(densities: tuple[Density1D, ...], order: int):
    """Tensor Gauss-Legendre nodes on the parameter box with density weights."""
    if len(densities) == 0:
        return np.zeros((1, 0)), np.ones(1)
    gx, gw = np.polynomial.legendre.leggauss(order)
    pts_1d = []
    wts_1d = []
    for rho in densities:
        c, d = rho.support
        y = 0.5 * (c + d) + 0.5 * (d - c) * gx
        w = 0.5 * (d - c) * gw * rho.pdf(y)
        pts_1d.append(y)
        wts_1d.append(w)
    grids = np.meshgrid(*pts_1d, indexing="ij")
    nodes = np.column_stack([g.ravel() for g in grids])
    weights = wts_1d[0]
    for w in wts_1d[1:]:
        weights = np.kron(weights, w)
    return nodes, weights


def exact_statistic(analytic: ParametricFunction, densities, moment: int = 1,
                    quad_order: int = 64) -> SpatialFunction:
    """Spatial function x -> E[u(x, .)^moment] by tensor quadrature.

    The returned gradient is E[moment * u^(moment-1) grad u] and requires
    ``analytic.grad``.  Intended for solutions smooth in y; 64 points per
    dimension leave the parametric quadrature error far below the spatial
    discretization errors studied here.
    """
    densities = tuple(densities)
    nodes, weights = tensor_quadrature(densities, quad_order)

    def values(x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        acc = np.zeros(x.shape[0])
        for y, w in zip(nodes, weights):
            acc += w * np.asarray(analytic.value(x, y)) ** moment
        return acc

    grad = None
    if analytic.grad is not None:
        def grad(x: np.ndarray) -> np.ndarray:
            x = np.atleast_2d(x)
            acc = np.zeros((x.shape[0], 2))
            for y, w in zip(nodes, weights):
                g = np.asarray(analytic.grad(x, y))
                if moment == 1:
                    acc += w * g
                else:
                    v = np.asarray(analytic.value(x, y)) ** (moment - 1)
                    acc += (w * moment) * v[:, None] * g
            return acc

    return SpatialFunction(values=values, grad=grad)


def write_stat_csv(field: StatField, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x1", "x2", "value"])
        for (x1, x2), v in zip(field.mesh.nodes, field.values):
            writer.writerow([f"{x1:.16g}", f"{x2:.16g}", f"{v:.16e}"])


def write_stat_vtk(fields: list[StatField], path: str) -> None:
    if not fields:
        raise ValueError("no fields to write")
    mesh = fields[0].mesh
    write_vtk(mesh, path, point_data={f.name: f.values for f in fields},
              title="solution statistics")
