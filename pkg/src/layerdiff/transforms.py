"""Natural/M transforms, time convolution and resolvent series.

The natural transform used throughout is

    N[f](s, tau) = int_0^inf exp(-s t) f(tau t) dt,

and the M transform of ``f`` is the natural transform of ``lambda * f``
where ``lambda`` is the time weight.  With this scaling

    N[f'] = (s / tau) N[f] - f(0) / tau,      tau N[f] N[g] = N[f * g].

Time convolutions of sampled data are formed with the trapezoid rule; the
exponential kernels that appear in the residue series are integrated
exactly against piecewise linear or piecewise constant data by
:func:`exp_history`, which stays stable for arbitrarily stiff rates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.signal import fftconvolve

from .funcspace import TimeSeries, WeightParams, eval_weight

FFT_THRESHOLD = 256


class TruncationError(RuntimeError):
    """The transform integrand has not decayed at the truncation point."""


@dataclass(frozen=True)
class TransformQuery:
    """A transform evaluation point ``s`` with the weight parameters."""

    s: float
    weight: WeightParams = field(default_factory=WeightParams)

    def __post_init__(self) -> None:
        if not self.s > 0.0:
            raise ValueError("transform variable s must be positive")


_GL_X, _GL_W = np.polynomial.legendre.leggauss(6)


def natural_transform(
    f: Callable,
    q: TransformQuery,
    t_max: float | None = None,
    n_panels: int = 4096,
    decay_tol: float = 1e-6,
) -> float:
    """Numerically evaluate ``int_0^t_max exp(-s t) f(tau t) dt``.

    Composite 6-point Gauss-Legendre on ``n_panels`` equal panels.  The
    default ``t_max = 40 / s`` leaves ``exp(-40)`` of an undamped integrand.
    Raises :class:`TruncationError` when the integrand at ``t_max`` is
    larger than ``decay_tol`` times its peak.
    """
    s, tau = q.s, q.weight.tau
    if t_max is None:
        t_max = 40.0 / s
    edges = np.linspace(0.0, t_max, n_panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    t = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    vals = np.exp(-s * t) * np.asarray(f(tau * t), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise TruncationError("transform integrand is not finite on [0, t_max]")
    peak = np.max(np.abs(vals)) if vals.size else 0.0
    end_val = abs(np.exp(-s * t_max) * float(np.asarray(f(tau * t_max))))
    if peak > 0.0 and end_val > decay_tol * peak:
        raise TruncationError(
            f"integrand has not decayed at t_max={t_max:g} (ratio {end_val / peak:.3g}); "
            "increase t_max or s"
        )
    return float(np.sum(vals.reshape(n_panels, -1) * _GL_W[None, :] * half[:, None]))


def m_transform(f: Callable, q: TransformQuery, **kwargs) -> float:
    """Natural transform of ``lambda(t) f(t)``."""
    return natural_transform(lambda t: eval_weight(q.weight, t) * np.asarray(f(t)), q, **kwargs)


# --- convolution ---------------------------------------------------------------


def _product_subscripts(fshape: tuple, gshape: tuple) -> str | None:
    if not fshape or not gshape:
        return None
    if len(fshape) == 2 and len(gshape) == 2:
        return "nij,njk->nik"
    if len(fshape) == 2 and len(gshape) == 1:
        return "nij,nj->ni"
    if len(fshape) == 1 and len(gshape) == 1:
        return "ni,ni->n"
    raise ValueError(f"cannot convolve values of shapes {fshape} and {gshape}")


def _pointwise(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    subs = _product_subscripts(f.shape[1:], g.shape[1:])
    if subs is None:
        fb = f.reshape(f.shape + (1,) * (g.ndim - 1)) if f.ndim == 1 else f
        gb = g.reshape(g.shape + (1,) * (f.ndim - 1)) if g.ndim == 1 else g
        return fb * gb
    return np.einsum(subs, f, g)


def _full_direct(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    n = f.shape[0]
    out = [np.sum(_pointwise(f[: k + 1], g[k::-1]), axis=0) for k in range(n)]
    return np.asarray(out)


def _full_fft(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    n = f.shape[0]
    fs, gs = f.shape[1:], g.shape[1:]
    if not fs or not gs:
        fb = f.reshape(f.shape + (1,) * (g.ndim - 1)) if f.ndim == 1 else f
        gb = g.reshape(g.shape + (1,) * (f.ndim - 1)) if g.ndim == 1 else g
        return fftconvolve(fb, gb, axes=0)[:n]
    if len(fs) == 2 and len(gs) == 2:
        return fftconvolve(f[:, :, :, None], g[:, None, :, :], axes=0)[:n].sum(axis=2)
    if len(fs) == 2 and len(gs) == 1:
        return fftconvolve(f, g[:, None, :], axes=0)[:n].sum(axis=2)
    if len(fs) == 1 and len(gs) == 1:
        return fftconvolve(f, g, axes=0)[:n].sum(axis=1)
    raise ValueError(f"cannot convolve values of shapes {fs} and {gs}")


def convolve(f: TimeSeries, g: TimeSeries, method: str = "auto", rule: str = "trapezoid") -> TimeSeries:
    """Discrete time convolution ``(f * g)(t_n) = int_0^t_n f(t_n - u) g(u) du``.

    Matrix-valued operands are combined with the matrix product.

    Parameters
    ----------
    method : {"auto", "direct", "fft"}
        ``auto`` switches to FFT above ``FFT_THRESHOLD`` samples.
    rule : {"trapezoid", "cells"}
        ``trapezoid`` treats both operands as piecewise linear samples.
        ``cells`` is the strictly causal sum ``dt * sum_{j=1}^{n-1} f_j g_{n-j}``
        used for cell-averaged kernels acting on piecewise constant data.
    """
    if f.grid != g.grid:
        raise ValueError("convolution operands must share a time grid")
    fv, gv = f.values, g.values
    dt = f.grid.dt
    if rule == "cells":
        fv = fv.copy()
        gv = gv.copy()
        fv[0] = 0.0
        gv[0] = 0.0
    elif rule != "trapezoid":
        raise ValueError(f"unknown convolution rule {rule!r}")
    if method == "auto":
        method = "fft" if fv.shape[0] > FFT_THRESHOLD else "direct"
    if method == "direct":
        full = _full_direct(fv, gv)
    elif method == "fft":
        full = _full_fft(fv, gv)
    else:
        raise ValueError(f"unknown convolution method {method!r}")
    if rule == "trapezoid":
        ends = 0.5 * (_pointwise(np.broadcast_to(fv[:1], fv.shape), gv) + _pointwise(fv, np.broadcast_to(gv[:1], gv.shape)))
        full = full - ends
        full[0] = 0.0
    return TimeSeries(f.grid, dt * full, interp=g.interp)


@dataclass
class NeumannResult:
    """Partial sum of a resolvent series with convergence diagnostics.

    ``rounding_bound`` is ``eps * sum of term norms``, a bound on the error
    left by cancellation between large terms of alternating sign.
    """

    series: TimeSeries
    n_terms: int
    last_norm: float
    converged: bool
    term_norms: list[float]

    @property
    def rounding_bound(self) -> float:
        return float(np.finfo(float).eps * np.sum(self.term_norms))


def neumann_series(
    B: TimeSeries,
    C: TimeSeries,
    tol: float = 1e-12,
    max_terms: int = 200,
    rule: str = "trapezoid",
) -> NeumannResult:
    """Sum ``h = sum_m B^{*m} * C`` for the Volterra equation ``h = C + B * h``.

    Terms are added until the sup norm of the newest term falls below
    ``tol * max(1, |h|_inf)``.  ``converged`` is False when ``max_terms``
    is reached first or the terms stop being finite.
    """
    total = C.values.copy()
    term = C
    norms = [float(np.max(np.abs(C.values))) if C.values.size else 0.0]
    converged = norms[0] <= tol
    n = 1
    while not converged and n < max_terms:
        term = convolve(B, term, rule=rule)
        norm = float(np.max(np.abs(term.values)))
        norms.append(norm)
        n += 1
        if not np.isfinite(norm):
            break
        total = total + term.values
        converged = norm <= tol * max(1.0, float(np.max(np.abs(total))))
    return NeumannResult(TimeSeries(C.grid, total, interp=C.interp), n, norms[-1], converged, norms)


# --- exponential product integration -----------------------------------------


def phi1(z):
    """``(exp(z) - 1) / z`` with the removable point at 0."""
    z = np.asarray(z, dtype=float)
    out = np.ones_like(z)
    nz = z != 0.0
    out[nz] = np.expm1(z[nz]) / z[nz]
    return out


def phi2(z):
    """``(exp(z) - 1 - z) / z**2``, evaluated by series for small ``|z|``."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = np.abs(z) < 0.1
    zs = z[small]
    acc = np.zeros_like(zs)
    fact = 2.0
    power = np.ones_like(zs)
    for j in range(12):
        acc += power / fact
        power = power * zs
        fact *= j + 3
    out[small] = acc
    zl = z[~small]
    out[~small] = (np.expm1(zl) - zl) / zl**2
    return out


def exp_history(q, values, dt: float, interp: str = "linear") -> np.ndarray:
    """Exact ``I_k(t_n) = int_0^{t_n} exp(q_k (t_n - u)) f(u) du`` for all rates.

    ``f`` is the piecewise linear (``interp="linear"``) or cell-wise
    constant (``interp="constant"``) function carried by ``values``.  Rates
    ``q`` must be non-positive real numbers.  Returns shape ``(K, N + 1)``.
    """
    q = np.atleast_1d(np.asarray(q, dtype=float))
    f = np.asarray(values, dtype=float)
    z = q * dt
    decay = np.exp(z)
    if interp == "linear":
        w1 = dt * phi2(z)
        w0 = dt * phi1(z) - w1
    elif interp == "constant":
        w0 = np.zeros_like(z)
        w1 = dt * phi1(z)
    else:
        raise ValueError("interp must be 'linear' or 'constant'")
    out = np.zeros((q.size, f.size))
    acc = np.zeros(q.size)
    for n in range(1, f.size):
        acc = decay * acc + w0 * f[n - 1] + w1 * f[n]
        out[:, n] = acc
    return out


def cumulative_integral(values, dt: float, interp: str = "linear") -> np.ndarray:
    """Exact running integral of piecewise linear or cell-wise constant data."""
    f = np.asarray(values, dtype=float)
    out = np.zeros_like(f)
    if interp == "linear":
        out[1:] = np.cumsum(0.5 * dt * (f[1:] + f[:-1]), axis=0)
    else:
        out[1:] = np.cumsum(dt * f[1:], axis=0)
    return out
