"""Uniform triangulations of axis-aligned rectangles.

Every cell of the nx-by-ny grid is split along its bottom-left to top-right
diagonal into two counterclockwise triangles, so each interior node touches
six triangles.  Node numbering is row-major (x fastest).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Mesh",
    "TriQuadRule",
    "build_uniform_mesh",
    "mesh_size",
    "triangle_quadrature",
    "write_vtk",
]

Rect = tuple[float, float, float, float]


@dataclass(frozen=True)
class Mesh:
    """Conforming P1 triangulation of a rectangle.

    Attributes
    ----------
    rect : tuple
        (x0, x1, y0, y1) with x0 < x1, y0 < y1.
    nx, ny : int
        Number of cells per direction.
    nodes : ndarray, shape (n_nodes, 2)
        Vertex coordinates, row-major over the structured grid.
    triangles : ndarray, shape (n_triangles, 3)
        Vertex indices, counterclockwise.
    boundary : ndarray of bool, shape (n_nodes,)
        True for nodes on the rectangle boundary.
    """

    rect: Rect
    nx: int
    ny: int
    nodes: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    interior: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "interior", np.flatnonzero(~self.boundary))

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def dx(self) -> float:
        return (self.rect[1] - self.rect[0]) / self.nx

    @property
    def dy(self) -> float:
        return (self.rect[3] - self.rect[2]) / self.ny

    def cell_side(self) -> float:
        """Largest cell edge length (the h reported in convergence tables)."""
        return max(self.dx, self.dy)

    def triangle_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def build_uniform_mesh(rect: Rect, nx: int, ny: int | None = None) -> Mesh:
    """Build the uniform criss-cross-free triangulation of ``rect``.

    Parameters
    ----------
    rect : tuple
        (x0, x1, y0, y1).
    nx : int
        Cells in the x direction, >= 1.
    ny : int, optional
        Cells in the y direction; defaults to nx.
    """
    if ny is None:
        ny = nx
    x0, x1, y0, y1 = map(float, rect)
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate rectangle {rect!r}")
    if nx < 1 or ny < 1:
        raise ValueError("nx and ny must be at least 1")

    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    ix, iy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    ix = ix.ravel()
    iy = iy.ravel()
    bl = iy * (nx + 1) + ix
    br = bl + 1
    tl = bl + (nx + 1)
    tr = tl + 1
    # lower-right triangle (bl, br, tr) and upper-left triangle (bl, tr, tl)
    triangles = np.empty((2 * nx * ny, 3), dtype=np.int64)
    triangles[0::2] = np.column_stack([bl, br, tr])
    triangles[1::2] = np.column_stack([bl, tr, tl])

    gx, gy = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="xy")
    boundary = (
        (gx.ravel() == 0) | (gx.ravel() == nx) | (gy.ravel() == 0) | (gy.ravel() == ny)
    )

    mesh = Mesh(rect=(x0, x1, y0, y1), nx=nx, ny=ny, nodes=nodes,
                triangles=triangles, boundary=boundary)
    areas = mesh.triangle_areas()
    assert np.all(areas > 0.0)
    assert abs(areas.sum() - (x1 - x0) * (y1 - y0)) <= 1e-12 * (x1 - x0) * (y1 - y0)
    return mesh


def mesh_size(mesh: Mesh) -> float:
    """Maximum triangle diameter (longest edge over all triangles)."""
    p = mesh.nodes[mesh.triangles]
    e0 = np.linalg.norm(p[:, 1] - p[:, 0], axis=1)
    e1 = np.linalg.norm(p[:, 2] - p[:, 1], axis=1)
    e2 = np.linalg.norm(p[:, 0] - p[:, 2], axis=1)
    return float(np.max(np.stack([e0, e1, e2])))


@dataclass(frozen=True)
class TriQuadRule:
    """Quadrature on the reference triangle {(s, t): s, t >= 0, s + t <= 1}.

    Weights sum to 1/2 (the reference area), so an integral over a physical
    triangle T is 2*|T| * sum_q w_q f(x_q).
    """

    degree: int
    points: np.ndarray  # (n_q, 2) reference coordinates
    weights: np.ndarray  # (n_q,)


def _rule_deg1() -> TriQuadRule:
    return TriQuadRule(1, np.array([[1 / 3, 1 / 3]]), np.array([0.5]))


def _rule_deg2() -> TriQuadRule:
    pts = np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]])
    return TriQuadRule(2, pts, np.full(3, 1 / 6))


def _rule_deg3() -> TriQuadRule:
    pts = np.array([[1 / 3, 1 / 3], [0.6, 0.2], [0.2, 0.6], [0.2, 0.2]])
    w = np.array([-27.0, 25.0, 25.0, 25.0]) / 96.0
    return TriQuadRule(3, pts, w)


def _rule_deg4() -> TriQuadRule:
    a = 0.445948490915965
    b = 0.091576213509771
    wa = 0.223381589678011 / 2
    wb = 0.109951743655322 / 2
    pts = np.array([
        [a, a], [1 - 2 * a, a], [a, 1 - 2 * a],
        [b, b], [1 - 2 * b, b], [b, 1 - 2 * b],
    ])
    return TriQuadRule(4, pts, np.array([wa, wa, wa, wb, wb, wb]))


def _rule_deg5() -> TriQuadRule:
    a = 0.470142064105115
    b = 0.101286507323456
    wa = 0.132394152788506 / 2
    wb = 0.125939180544827 / 2
    pts = np.array([
        [1 / 3, 1 / 3],
        [a, a], [1 - 2 * a, a], [a, 1 - 2 * a],
        [b, b], [1 - 2 * b, b], [b, 1 - 2 * b],
    ])
    return TriQuadRule(5, pts, np.array([0.1125, wa, wa, wa, wb, wb, wb]))


_RULES = {1: _rule_deg1, 2: _rule_deg2, 3: _rule_deg3, 4: _rule_deg4, 5: _rule_deg5}


def triangle_quadrature(degree: int) -> TriQuadRule:
    """Smallest tabulated rule exact for polynomials up to ``degree`` (1..5)."""
    if degree < 1 or degree > 5:
        raise ValueError(f"no tabulated triangle rule of degree {degree}")
    return _RULES[degree]()


def write_vtk(mesh: Mesh, path: str, point_data: dict[str, np.ndarray] | None = None,
              title: str = "mesh") -> None:
    """Write the mesh (and optional nodal scalar fields) as legacy ASCII VTK."""
    lines = [
        "# vtk DataFile Version 2.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.n_nodes} double",
    ]
    for x, y in mesh.nodes:
        lines.append(f"{x:.16g} {y:.16g} 0")
    lines.append(f"CELLS {mesh.n_triangles} {4 * mesh.n_triangles}")
    for tri in mesh.triangles:
        lines.append(f"3 {tri[0]} {tri[1]} {tri[2]}")
    lines.append(f"CELL_TYPES {mesh.n_triangles}")
    lines.extend(["5"] * mesh.n_triangles)
    if point_data:
        lines.append(f"POINT_DATA {mesh.n_nodes}")
        for name, values in point_data.items():
            values = np.asarray(values)
            if values.shape != (mesh.n_nodes,):
                raise ValueError(f"field {name!r} has shape {values.shape}, "
                                 f"expected ({mesh.n_nodes},)")
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(f"{v:.16g}" for v in values)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
