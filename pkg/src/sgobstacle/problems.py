"""Built-in obstacle problems and the field registry for custom configs.

Both built-in problems have two parameter dimensions driven by uniform
variables xi on (-1, 1) entering through y = exp(xi), manufactured exact
solutions with a circular contact set, and Dirichlet data taken from the
exact solution (which is nonzero on the boundary of the domain).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .fem import SpatialFunction
from .fields import AffineField
from .param import Density1D
from .stats import ParametricFunction

__all__ = ["Problem", "get_problem", "example1", "example2", "spatial_from_spec",
           "density_from_spec", "problem_from_config"]


@dataclass(frozen=True)
class Problem:
    name: str
    rect: tuple[float, float, float, float]
    n_dims: int
    parameterization: str
    densities: tuple[Density1D, ...]
    fields: dict  # 'a', 'f', 'g' -> AffineField or callable (x, y) -> values
    dirichlet: Callable | None
    exact: ParametricFunction | None
    h_over_s: float | None = None  # default coupling constant for h = c * s

    @property
    def sg_ready(self) -> bool:
        return all(isinstance(self.fields[k], AffineField) for k in ("a", "f", "g"))


def _one(x):
    return np.ones(x.shape[0])


def _rho(x):
    return x[:, 0] ** 2 + x[:, 1] ** 2


def example1(parameterization: str = "exp") -> Problem:
    """Random diffusion coefficient, constant source, zero obstacle.

    a = 1 + y1 + 2 y2, f = -2, g = 0 on (-1.5, 1.5)^2 with y_k = exp(xi_k);
    the exact solution has contact set {|x| <= 1} and scales like
    1 / (1 + y1 + 2 y2).
    """

    def w_profile(x):
        rho = _rho(x)
        out = np.zeros(x.shape[0])
        outside = rho > 1.0
        r = rho[outside]
        out[outside] = 0.5 * (r - np.log(r) - 1.0)
        return out

    def w_grad(x):
        rho = _rho(x)
        out = np.zeros_like(x)
        outside = rho > 1.0
        out[outside] = x[outside] * (1.0 - 1.0 / rho[outside])[:, None]
        return out

    def value_y(x, y):
        return w_profile(np.atleast_2d(x)) / (1.0 + y[0] + 2.0 * y[1])

    def grad_y(x, y):
        return w_grad(np.atleast_2d(x)) / (1.0 + y[0] + 2.0 * y[1])

    rect = (-1.5, 1.5, -1.5, 1.5)
    span = np.e - 1.0 / np.e
    if parameterization == "exp":
        fields = {
            "a": AffineField.build(1.0, [(1.0, _one, 0), (2.0, _one, 1)]),
            "f": AffineField.build(-2.0),
            "g": AffineField.build(0.0),
        }
        exact = ParametricFunction(value=value_y, grad=grad_y)
        densities = (Density1D.exp_uniform(), Density1D.exp_uniform())
        dirichlet = value_y
    elif parameterization == "xi":
        def a_xi(x, xi):
            return 1.0 + np.exp(xi[0]) + 2.0 * np.exp(xi[1]) + 0.0 * x[:, 0]

        fields = {
            "a": a_xi,
            "f": AffineField.build(-2.0),
            "g": AffineField.build(0.0),
        }
        exact = ParametricFunction(
            value=lambda x, xi: value_y(x, np.exp(xi)),
            grad=lambda x, xi: grad_y(x, np.exp(xi)),
        )
        densities = (Density1D.uniform(-1.0, 1.0), Density1D.uniform(-1.0, 1.0))
        dirichlet = exact.value
    else:
        raise ValueError(f"unknown parameterization {parameterization!r}")
    return Problem(
        name="example1", rect=rect, n_dims=2, parameterization=parameterization,
        densities=densities, fields=fields, dirichlet=dirichlet, exact=exact,
        h_over_s=3.0 / (2.0 * span),
    )


def example2(parameterization: str = "exp") -> Problem:
    """Unit coefficient, random source, zero obstacle.

    a = 1, f = F(x) (y1 + 2 y2) on (-1, 1)^2 with contact radius r0 = 0.7;
    the exact solution is (rho - r0^2)^2 (y1 + 2 y2) outside the contact set.
    """
    r0sq = 0.49

    def f_profile(x):
        rho = _rho(x)
        return np.where(rho <= r0sq,
                        8.0 * r0sq * (rho - 1.0 - r0sq),
                        -8.0 * (2.0 * rho - r0sq))

    def u_profile(x):
        return np.maximum(_rho(x) - r0sq, 0.0) ** 2

    def u_profile_grad(x):
        return 4.0 * np.maximum(_rho(x) - r0sq, 0.0)[:, None] * x

    def value_y(x, y):
        return u_profile(np.atleast_2d(x)) * (y[0] + 2.0 * y[1])

    def grad_y(x, y):
        return u_profile_grad(np.atleast_2d(x)) * (y[0] + 2.0 * y[1])

    rect = (-1.0, 1.0, -1.0, 1.0)
    span = np.e - 1.0 / np.e
    if parameterization == "exp":
        fields = {
            "a": AffineField.build(1.0),
            "f": AffineField.build(0.0, [(1.0, f_profile, 0), (2.0, f_profile, 1)]),
            "g": AffineField.build(0.0),
        }
        exact = ParametricFunction(value=value_y, grad=grad_y)
        densities = (Density1D.exp_uniform(), Density1D.exp_uniform())
        dirichlet = value_y
    elif parameterization == "xi":
        def f_xi(x, xi):
            return f_profile(x) * (np.exp(xi[0]) + 2.0 * np.exp(xi[1]))

        fields = {
            "a": AffineField.build(1.0),
            "f": f_xi,
            "g": AffineField.build(0.0),
        }
        exact = ParametricFunction(
            value=lambda x, xi: value_y(x, np.exp(xi)),
            grad=lambda x, xi: grad_y(x, np.exp(xi)),
        )
        densities = (Density1D.uniform(-1.0, 1.0), Density1D.uniform(-1.0, 1.0))
        dirichlet = exact.value
    else:
        raise ValueError(f"unknown parameterization {parameterization!r}")
    return Problem(
        name="example2", rect=rect, n_dims=2, parameterization=parameterization,
        densities=densities, fields=fields, dirichlet=dirichlet, exact=exact,
        h_over_s=1.0 / span,
    )


_BUILTINS = {"example1": example1, "example2": example2}


def get_problem(name: str, parameterization: str = "exp") -> Problem:
    if name not in _BUILTINS:
        raise KeyError(f"unknown problem {name!r}; built-ins: {sorted(_BUILTINS)}")
    return _BUILTINS[name](parameterization)


def spatial_from_spec(spec) -> SpatialFunction:
    """Spatial function registry for config files.

    Accepts a bare number (constant) or a dict:
      {"kind": "constant", "value": v}
      {"kind": "polynomial", "terms": [[c, p, q], ...]}  for sum c x1^p x2^q
    """
    if isinstance(spec, (int, float)):
        return SpatialFunction.constant(float(spec))
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValueError(f"bad spatial function spec {spec!r}")
    kind = spec["kind"]
    if kind == "constant":
        return SpatialFunction.constant(float(spec["value"]))
    if kind == "polynomial":
        terms = [(float(c), int(p), int(q)) for c, p, q in spec["terms"]]

        def values(x, terms=tuple(terms)):
            out = np.zeros(x.shape[0])
            for c, p, q in terms:
                out += c * x[:, 0] ** p * x[:, 1] ** q
            return out

        def grad(x, terms=tuple(terms)):
            out = np.zeros_like(x)
            for c, p, q in terms:
                if p > 0:
                    out[:, 0] += c * p * x[:, 0] ** (p - 1) * x[:, 1] ** q
                if q > 0:
                    out[:, 1] += c * q * x[:, 0] ** p * x[:, 1] ** (q - 1)
            return out

        return SpatialFunction(values=values, grad=grad)
    raise ValueError(f"unknown spatial function kind {kind!r}")


def density_from_spec(spec) -> Density1D:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValueError(f"bad density spec {spec!r}")
    kind = spec["kind"]
    if kind == "uniform":
        return Density1D.uniform(spec["lo"], spec["hi"])
    if kind == "exp-uniform":
        return Density1D.exp_uniform(spec.get("lo", -1.0), spec.get("hi", 1.0))
    raise ValueError(f"unknown density kind {kind!r}")


def _affine_from_spec(spec) -> AffineField:
    if isinstance(spec, (int, float)):
        return AffineField.build(float(spec))
    mean = spatial_from_spec(spec.get("mean", 0.0))
    modes = [(m["coeff"], spatial_from_spec(m["shape"]), m["dim"])
             for m in spec.get("modes", [])]
    return AffineField.build(mean, modes)


def problem_from_config(custom: dict) -> Problem:
    """Assemble a custom problem from its config section.

    Custom problems have no exact solution; convergence errors are not
    available for them.
    """
    rect = tuple(float(v) for v in custom["domain"])
    if len(rect) != 4:
        raise ValueError("domain must be [x0, x1, y0, y1]")
    densities = tuple(density_from_spec(d) for d in custom["densities"])
    fields = {key: _affine_from_spec(custom["fields"][key]) for key in ("a", "f", "g")}
    return Problem(
        name=custom.get("name", "custom"), rect=rect, n_dims=len(densities),
        parameterization="exp", densities=densities, fields=fields,
        dirichlet=None, exact=None, h_over_s=None,
    )
