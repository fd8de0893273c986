"""Function catalog, time weights and sampled time series.

Everything that enters a solve (initial profiles, boundary data, sources) is
described by a :class:`FunctionSpec`, a small closed catalog of analytic
forms plus linear tabulation.  Specs are immutable, round-trip through plain
dictionaries (for config files), and know their own derivative so that tests
can check the derivative rule of the transforms against closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

KINDS = ("constant", "polynomial", "exponential", "sinusoid", "gaussian", "tabulated", "sum")
MAX_POLY_DEGREE = 8


class DomainError(ValueError):
    """Raised when a function is evaluated outside its declared domain."""


@dataclass(frozen=True)
class FunctionSpec:
    """Immutable description of a scalar function of one variable.

    Parameters
    ----------
    kind : str
        One of ``constant``, ``polynomial``, ``exponential``, ``sinusoid``,
        ``gaussian``, ``tabulated`` or ``sum``.
    coefficients : tuple of float
        ``constant``: ``(c,)``.  ``polynomial``: ``(c0, ..., cn)`` with
        ``n <= 8``.  ``exponential``: ``(A, a)`` for ``A exp(a x)``.
        ``sinusoid``: ``(A, omega, phase)`` for ``A sin(omega x + phase)``.
        ``gaussian``: ``(A, c, w)`` for ``A exp(-((x - c) / w)**2)``.
    abscissae, ordinates : tuple of float
        Nodes of a ``tabulated`` function (piecewise linear, constant
        extrapolation).  Abscissae must be strictly increasing.
    terms : tuple of FunctionSpec
        Summands of a ``sum``.
    domain : (float, float)
        Closed interval outside of which evaluation raises
        :class:`DomainError`.
    """

    kind: str
    coefficients: tuple[float, ...] = ()
    abscissae: tuple[float, ...] = ()
    ordinates: tuple[float, ...] = ()
    terms: tuple["FunctionSpec", ...] = ()
    domain: tuple[float, float] = (-math.inf, math.inf)

    def __post_init__(self) -> None:
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        object.__setattr__(self, "abscissae", tuple(float(c) for c in self.abscissae))
        object.__setattr__(self, "ordinates", tuple(float(c) for c in self.ordinates))
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "domain", (float(self.domain[0]), float(self.domain[1])))
        _validate(self)

    # -- constructors -------------------------------------------------------
    @classmethod
    def constant(cls, c: float) -> FunctionSpec:
        return cls("constant", (c,))

    @classmethod
    def polynomial(cls, coefficients: Sequence[float]) -> FunctionSpec:
        return cls("polynomial", tuple(coefficients))

    @classmethod
    def exponential(cls, amplitude: float, rate: float) -> FunctionSpec:
        return cls("exponential", (amplitude, rate))

    @classmethod
    def sinusoid(cls, amplitude: float, frequency: float, phase: float = 0.0) -> FunctionSpec:
        return cls("sinusoid", (amplitude, frequency, phase))

    @classmethod
    def gaussian(cls, amplitude: float, center: float, width: float) -> FunctionSpec:
        return cls("gaussian", (amplitude, center, width))

    @classmethod
    def tabulated(cls, xs: Sequence[float], ys: Sequence[float]) -> FunctionSpec:
        return cls("tabulated", abscissae=tuple(xs), ordinates=tuple(ys))

    @classmethod
    def sum_of(cls, *terms: FunctionSpec) -> FunctionSpec:
        return cls("sum", terms=tuple(terms))

    # -- evaluation ---------------------------------------------------------
    def __call__(self, x):
        return eval_fn(self, x)

    def derivative_at(self, x):
        """Evaluate the first derivative in closed form.

        For ``tabulated`` specs this is the slope of the segment containing
        ``x`` (right-continuous at the nodes, zero outside the table).
        """
        xa = _check_domain(self, x)
        return _reshape_like(x, _deriv(self, xa))

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind}
        if self.kind == "sum":
            out["terms"] = [t.to_dict() for t in self.terms]
        elif self.kind == "tabulated":
            out["abscissae"] = list(self.abscissae)
            out["ordinates"] = list(self.ordinates)
        else:
            out["coefficients"] = list(self.coefficients)
        if math.isfinite(self.domain[0]) or math.isfinite(self.domain[1]):
            out["domain"] = list(self.domain)
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any] | float | int) -> FunctionSpec:
        """Build a spec from a mapping; a bare number means a constant."""
        if isinstance(data, (int, float)) and not isinstance(data, bool):
            return cls.constant(float(data))
        if not isinstance(data, Mapping):
            raise ValueError(f"function spec must be a table or a number, got {data!r}")
        unknown = set(data) - {"kind", "coefficients", "abscissae", "ordinates", "terms", "domain"}
        if unknown:
            raise ValueError(f"unknown function spec keys: {sorted(unknown)}")
        if "kind" not in data:
            raise ValueError("function spec is missing 'kind'")
        return cls(
            kind=str(data["kind"]),
            coefficients=tuple(data.get("coefficients", ())),
            abscissae=tuple(data.get("abscissae", ())),
            ordinates=tuple(data.get("ordinates", ())),
            terms=tuple(cls.from_dict(t) for t in data.get("terms", ())),
            domain=tuple(data.get("domain", (-math.inf, math.inf))),
        )


def _validate(f: FunctionSpec) -> None:
    if f.kind not in KINDS:
        raise ValueError(f"unknown function kind {f.kind!r}; expected one of {KINDS}")
    lo, hi = f.domain
    if not lo <= hi:
        raise ValueError(f"empty domain {f.domain}")
    ncoef = len(f.coefficients)
    if f.kind == "constant" and ncoef != 1:
        raise ValueError("constant needs exactly one coefficient")
    if f.kind == "polynomial" and not 1 <= ncoef <= MAX_POLY_DEGREE + 1:
        raise ValueError(f"polynomial needs 1..{MAX_POLY_DEGREE + 1} coefficients, got {ncoef}")
    if f.kind == "exponential" and ncoef != 2:
        raise ValueError("exponential needs (amplitude, rate)")
    if f.kind == "sinusoid" and ncoef not in (2, 3):
        raise ValueError("sinusoid needs (amplitude, frequency[, phase])")
    if f.kind == "sinusoid" and ncoef == 2:
        object.__setattr__(f, "coefficients", f.coefficients + (0.0,))
    if f.kind == "gaussian":
        if ncoef != 3:
            raise ValueError("gaussian needs (amplitude, center, width)")
        if f.coefficients[2] == 0.0:
            raise ValueError("gaussian width must be nonzero")
    if f.kind == "tabulated":
        xs = np.asarray(f.abscissae)
        if xs.size < 2 or xs.size != len(f.ordinates):
            raise ValueError("tabulated needs at least two (x, y) pairs of equal length")
        if np.any(np.diff(xs) <= 0.0):
            raise ValueError("tabulated abscissae must be strictly increasing")
    if f.kind == "sum" and not f.terms:
        raise ValueError("sum needs at least one term")
    if f.kind != "sum" and f.terms:
        raise ValueError("only 'sum' specs take terms")
    vals = f.coefficients + f.abscissae + f.ordinates
    if not all(math.isfinite(v) for v in vals):
        raise ValueError("function parameters must be finite")


def _check_domain(f: FunctionSpec, x) -> np.ndarray:
    xa = np.asarray(x, dtype=float)
    lo, hi = f.domain
    if np.any(xa < lo) or np.any(xa > hi):
        raise DomainError(f"argument outside domain [{lo}, {hi}] of {f.kind} function")
    return xa


def _reshape_like(x, values: np.ndarray):
    if np.ndim(x) == 0:
        return float(values)
    return values


def _eval(f: FunctionSpec, x: np.ndarray) -> np.ndarray:
    c = f.coefficients
    if f.kind == "constant":
        return np.full_like(x, c[0])
    if f.kind == "polynomial":
        return np.polynomial.polynomial.polyval(x, c) + 0.0 * x
    if f.kind == "exponential":
        return c[0] * np.exp(c[1] * x)
    if f.kind == "sinusoid":
        return c[0] * np.sin(c[1] * x + c[2])
    if f.kind == "gaussian":
        return c[0] * np.exp(-(((x - c[1]) / c[2]) ** 2))
    if f.kind == "tabulated":
        return np.interp(x, f.abscissae, f.ordinates)
    return sum((_eval(t, x) for t in f.terms), np.zeros_like(x))


def _deriv(f: FunctionSpec, x: np.ndarray) -> np.ndarray:
    c = f.coefficients
    if f.kind == "constant":
        return np.zeros_like(x)
    if f.kind == "polynomial":
        dc = np.polynomial.polynomial.polyder(c) if len(c) > 1 else [0.0]
        return np.polynomial.polynomial.polyval(x, dc) + 0.0 * x
    if f.kind == "exponential":
        return c[0] * c[1] * np.exp(c[1] * x)
    if f.kind == "sinusoid":
        return c[0] * c[1] * np.cos(c[1] * x + c[2])
    if f.kind == "gaussian":
        u = (x - c[1]) / c[2]
        return -2.0 * c[0] * u / c[2] * np.exp(-(u**2))
    if f.kind == "tabulated":
        xs = np.asarray(f.abscissae)
        slopes = np.diff(f.ordinates) / np.diff(xs)
        idx = np.searchsorted(xs, x, side="right") - 1
        inside = (idx >= 0) & (idx < slopes.size)
        out = np.zeros_like(x)
        out[inside] = slopes[idx[inside]]
        return out
    return sum((_deriv(t, x) for t in f.terms), np.zeros_like(x))


def eval_fn(f: FunctionSpec, x):
    """Evaluate ``f`` at ``x`` (scalar or array); raises DomainError."""
    xa = _check_domain(f, x)
    return _reshape_like(x, _eval(f, np.atleast_1d(xa)).reshape(xa.shape))


@dataclass(frozen=True)
class WeightParams:
    """Parameters of the time weight ``lambda(t) = (t^m / tau^m + tau^m)^(-rho)``."""

    rho: float = 0.0
    m: float = 1.0
    tau: float = 1.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.rho) and self.rho >= 0.0):
            raise ValueError("rho must be a finite number >= 0")
        if not (math.isfinite(self.m) and self.m >= 1.0):
            raise ValueError("m must be a finite number >= 1")
        if not (math.isfinite(self.tau) and self.tau > 0.0):
            raise ValueError("tau must be a finite number > 0")

    def __call__(self, t):
        return eval_weight(self, t)


def eval_weight(w: WeightParams, t):
    """Evaluate the time weight at ``t >= 0``."""
    ta = np.asarray(t, dtype=float)
    if np.any(ta < 0.0):
        raise DomainError("time weight is only defined for t >= 0")
    if w.rho == 0.0:
        out = np.ones_like(ta)
    else:
        out = (ta**w.m / w.tau**w.m + w.tau**w.m) ** (-w.rho)
    return _reshape_like(t, out)


@dataclass(frozen=True)
class SpaceTimeFunctionSpec:
    """Separable source ``r(x, t) = sum_p X_p(x) T_p(t)``."""

    terms: tuple[tuple[FunctionSpec, FunctionSpec], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "terms", tuple((x, t) for x, t in self.terms))
        if not self.terms:
            raise ValueError("space-time function needs at least one term")

    @classmethod
    def product(cls, space: FunctionSpec, time: FunctionSpec) -> SpaceTimeFunctionSpec:
        return cls(((space, time),))

    def __call__(self, x, t):
        return sum(np.multiply.outer(eval_fn(X, x), eval_fn(T, t)) for X, T in self.terms)

    def to_dict(self) -> list[dict[str, Any]]:
        return [{"x": X.to_dict(), "t": T.to_dict()} for X, T in self.terms]

    @classmethod
    def from_dict(cls, data: Iterable[Mapping[str, Any]]) -> SpaceTimeFunctionSpec:
        return cls(tuple((FunctionSpec.from_dict(d["x"]), FunctionSpec.from_dict(d["t"])) for d in data))


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_n = n * t_end / n_steps``, ``n = 0..n_steps``."""

    t_end: float
    n_steps: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.t_end) and self.t_end > 0.0):
            raise ValueError("t_end must be positive")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError("n_steps must be a positive integer")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def dt(self) -> float:
        return self.t_end / self.n_steps

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.n_steps + 1)

    def __len__(self) -> int:
        return self.n_steps + 1


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Samples of a (scalar, vector or matrix valued) function on a TimeGrid.

    ``values[n]`` is the sample at ``t_n``.  ``interp`` records how the
    samples represent the underlying function between nodes:

    ``"linear"``
        piecewise linear through the nodes;
    ``"constant"``
        constant on each cell ``(t_{n-1}, t_n]`` with value ``values[n]``
        (``values[0]`` is only used as the value at ``t = 0``).
    """

    grid: TimeGrid
    values: np.ndarray
    interp: str = "linear"
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim < 1 or vals.shape[0] != len(self.grid):
            raise ValueError(f"expected {len(self.grid)} samples, got shape {vals.shape}")
        if self.interp not in ("linear", "constant"):
            raise ValueError("interp must be 'linear' or 'constant'")
        object.__setattr__(self, "values", vals)

    @property
    def t(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape[1:]


def sample(f: FunctionSpec, grid: TimeGrid, weight: WeightParams | None = None) -> TimeSeries:
    """Sample ``f`` (optionally multiplied by the time weight) on ``grid``."""
    t = grid.nodes
    vals = np.asarray(eval_fn(f, t), dtype=float)
    if weight is not None:
        vals = vals * eval_weight(weight, t)
    return TimeSeries(grid, vals)
