"""Truncated Fourier series on the 1- and 2-torus.

Coefficients are stored densely on the cube |k_i| <= K, so absent wavevectors
are simply zeros. Index ``K + k`` along each mode axis holds wavevector ``k``.
The field ``f(x) = sum_k fhat(k) exp(i k.x)`` may be vector valued; the
leading axis of ``coeffs`` runs over components.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Iterator

import numpy as np
import scipy.fft
from scipy import signal

from .errors import RadiusUndetermined

RADIUS_FLOOR = 1e-13


def bracket(k):
    """Japanese bracket (1 + |k|^2)^(1/2)."""
    return np.sqrt(1.0 + np.asarray(k, dtype=float) ** 2)


def mode_axis(K):
    return np.arange(-K, K + 1)


@dataclass(frozen=True, eq=False)
class FourierField:
    dim: int
    K: int
    coeffs: np.ndarray

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.K < 0:
            raise ValueError("cutoff K must be nonnegative")
        c = np.array(self.coeffs, dtype=complex)
        n = 2 * self.K + 1
        if c.ndim == self.dim:
            c = c[None]
        if c.shape[1:] != (n,) * self.dim or c.shape[0] < 1:
            raise ValueError(f"coeffs shape {c.shape} does not match dim={self.dim}, K={self.K}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    # -- construction -----------------------------------------------------
    @classmethod
    def zeros(cls, dim, K, m=1):
        return cls(dim, K, np.zeros((m,) + (2 * K + 1,) * dim, dtype=complex))

    @classmethod
    def from_modes(cls, dim, K, modes, m=None):
        """Build from a mapping ``{k: coeff}``.

        ``k`` is an int (dim 1) or a tuple; ``coeff`` a scalar or length-m vector.
        """
        if m is None:
            m = max((np.size(v) for v in modes.values()), default=1)
        arr = np.zeros((m,) + (2 * K + 1,) * dim, dtype=complex)
        for k, v in modes.items():
            kk = (k,) if np.isscalar(k) else tuple(k)
            if len(kk) != dim:
                raise ValueError(f"wavevector {k} has wrong dimension")
            if any(abs(int(ki)) > K for ki in kk):
                raise ValueError(f"wavevector {k} outside cutoff K={K}")
            idx = tuple(int(ki) + K for ki in kk)
            arr[(slice(None),) + idx] = v
        return cls(dim, K, arr)

    # -- structure --------------------------------------------------------
    @property
    def m(self):
        return self.coeffs.shape[0]

    def wavenumbers(self):
        """Integer wavevector grids, one array per axis."""
        ax = mode_axis(self.K)
        if self.dim == 1:
            return (ax,)
        return tuple(np.meshgrid(ax, ax, indexing="ij"))

    def abs_k(self):
        return np.sqrt(sum(kk.astype(float) ** 2 for kk in self.wavenumbers()))

    def magnitudes(self):
        """Euclidean norm over components at every stored wavevector."""
        return np.sqrt(np.sum(np.abs(self.coeffs) ** 2, axis=0))

    def coeff(self, k):
        kk = (k,) if np.isscalar(k) else tuple(k)
        if any(abs(ki) > self.K for ki in kk):
            return np.zeros(self.m, dtype=complex)
        return self.coeffs[(slice(None),) + tuple(ki + self.K for ki in kk)].copy()

    def modes(self, tol=0.0) -> Iterator[tuple]:
        mags = self.magnitudes()
        for idx in zip(*np.nonzero(mags > tol)):
            k = tuple(int(i) - self.K for i in idx)
            yield (k[0] if self.dim == 1 else k), self.coeffs[(slice(None),) + idx].copy()

    def reflect(self):
        """Coefficients of f(-x): k -> -k."""
        axes = tuple(range(1, self.dim + 1))
        return FourierField(self.dim, self.K, np.flip(self.coeffs, axis=axes))

    def conj_reflect(self):
        """Coefficients of conj(f(x)): fhat(k) -> conj(fhat(-k))."""
        return FourierField(self.dim, self.K, np.conj(self.reflect().coeffs))

    def is_real(self, atol=1e-12):
        return np.allclose(self.coeffs, self.conj_reflect().coeffs, rtol=0.0, atol=atol)

    def component(self, i):
        return FourierField(self.dim, self.K, self.coeffs[i : i + 1])

    def with_cutoff(self, K):
        """Zero-pad or truncate to a new cutoff."""
        if K == self.K:
            return self
        out = np.zeros((self.m,) + (2 * K + 1,) * self.dim, dtype=complex)
        L = min(K, self.K)
        src = (slice(None),) + (slice(self.K - L, self.K + L + 1),) * self.dim
        dst = (slice(None),) + (slice(K - L, K + L + 1),) * self.dim
        out[dst] = self.coeffs[src]
        return FourierField(self.dim, K, out)

    # -- arithmetic -------------------------------------------------------
    def _check(self, other):
        if not isinstance(other, FourierField):
            return NotImplemented
        if (other.dim, other.K, other.m) != (self.dim, self.K, self.m):
            raise ValueError("fields differ in dim, cutoff or component count")
        return other

    def __add__(self, other):
        other = self._check(other)
        return FourierField(self.dim, self.K, self.coeffs + other.coeffs)

    def __sub__(self, other):
        other = self._check(other)
        return FourierField(self.dim, self.K, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        if isinstance(scalar, FourierField):
            return product(self, scalar)
        return FourierField(self.dim, self.K, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return FourierField(self.dim, self.K, -self.coeffs)

    # -- serialization ----------------------------------------------------
    def to_dict(self, tol=0.0):
        modes = []
        for k, v in self.modes(tol):
            kk = [k] if self.dim == 1 else list(k)
            modes.append({"k": kk, "re": v.real.tolist(), "im": v.imag.tolist()})
        return {"dim": self.dim, "K": self.K, "m": self.m, "modes": modes}

    @classmethod
    def from_dict(cls, d):
        dim, K = int(d["dim"]), int(d["K"])
        m = int(d.get("m", max((len(e["re"]) for e in d["modes"]), default=1)))
        arr = np.zeros((m,) + (2 * K + 1,) * dim, dtype=complex)
        for e in d["modes"]:
            k = [int(x) for x in e["k"]]
            if len(k) != dim or any(abs(x) > K for x in k):
                raise ValueError(f"bad wavevector {k}")
            arr[(slice(None),) + tuple(x + K for x in k)] = np.asarray(e["re"]) + 1j * np.asarray(e["im"])
        return cls(dim, K, arr)

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def decay_csv(self):
        """CSV rows ``k..., |fhat(k)|`` for every nonzero mode."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow((["k"] if self.dim == 1 else ["k1", "k2"]) + ["abs"])
        for k, v in self.modes():
            kk = [k] if self.dim == 1 else list(k)
            w.writerow(kk + [repr(float(np.linalg.norm(v)))])
        return buf.getvalue()


@dataclass(frozen=True)
class NormSpec:
    r: float = 0.0
    s: float = 0.0
    kind: str = "wiener"

    def __post_init__(self):
        if self.r < 0 or self.s < 0:
            raise ValueError(f"norm parameters must be nonnegative (r={self.r}, s={self.s})")
        if self.kind not in ("wiener", "sobolev"):
            raise ValueError(f"unknown norm kind {self.kind!r}")


def norm(f: FourierField, spec: NormSpec = NormSpec()) -> float:
    """Weighted Wiener (A^{r,s}) or Sobolev (H^s) norm of a truncated series."""
    ak = f.abs_k()
    mags = f.magnitudes()
    if spec.kind == "wiener":
        w = bracket(ak) ** spec.s * np.exp(spec.r * ak)
        return float(np.sum(w * mags))
    return float(np.sqrt(np.sum(bracket(ak) ** (2 * spec.s) * mags**2)))


def wiener(f, r=0.0, s=0.0):
    return norm(f, NormSpec(r, s, "wiener"))


def sobolev(f, s=0.0):
    return norm(f, NormSpec(0.0, s, "sobolev"))


def product(f: FourierField, g: FourierField) -> FourierField:
    """Pointwise product of scalar fields, Galerkin-truncated to the common cutoff."""
    if f.dim != g.dim:
        raise ValueError(f"dimension mismatch: {f.dim} vs {g.dim}")
    if f.K != g.K:
        raise ValueError(f"cutoff mismatch: {f.K} vs {g.K}")
    if f.m != 1 or g.m != 1:
        raise ValueError("product expects scalar fields; build componentwise products explicitly")
    full = signal.convolve(f.coeffs[0], g.coeffs[0], mode="full")
    K = f.K
    sl = (slice(K, 3 * K + 1),) * f.dim
    return FourierField(f.dim, K, full[sl][None])


def derivative(f: FourierField, axis: int = 0) -> FourierField:
    if not 0 <= axis < f.dim:
        raise ValueError(f"axis {axis} invalid for dim {f.dim}")
    k = f.wavenumbers()[axis]
    return FourierField(f.dim, f.K, 1j * k * f.coeffs)


def padded_size(K, degree=2):
    """Smallest fast FFT length for alias-free degree-``degree`` products truncated to K."""
    return scipy.fft.next_fast_len((degree + 1) * K + 1)


def _blocks(K, M, ndim):
    # (grid slice, centred slice) pairs per axis: k >= 0 first, then k < 0
    pairs = [(slice(0, K + 1), slice(K, 2 * K + 1)), (slice(M - K, M), slice(0, K))]
    out = [((), ())]
    for _ in range(ndim):
        out = [(g + (pg,), c + (pc,)) for g, c in out for pg, pc in pairs]
    return out


def to_grid(coeffs, K, M, ndim):
    """Physical values on an M-point (per axis) grid from centred coefficients.

    ``coeffs`` has ``ndim`` trailing mode axes of length 2K+1.
    """
    coeffs = np.asarray(coeffs)
    buf = np.zeros(coeffs.shape[:-ndim] + (M,) * ndim, dtype=complex)
    for g, c in _blocks(K, M, ndim):
        buf[(Ellipsis,) + g] = coeffs[(Ellipsis,) + c]
    axes = tuple(range(-ndim, 0))
    return scipy.fft.ifftn(buf, axes=axes, norm="forward", overwrite_x=True)


def from_grid(values, K, ndim):
    """Centred coefficients |k_i| <= K from grid values (inverse of :func:`to_grid`)."""
    M = values.shape[-1]
    axes = tuple(range(-ndim, 0))
    hat = scipy.fft.fftn(values, axes=axes, norm="forward")
    out = np.empty(hat.shape[:-ndim] + (2 * K + 1,) * ndim, dtype=complex)
    for g, c in _blocks(K, M, ndim):
        out[(Ellipsis,) + c] = hat[(Ellipsis,) + g]
    return out


def convolve_truncated(a, b, K, ndim=1):
    """Batched truncated convolution of centred coefficient arrays via padded FFT."""
    M = padded_size(K)
    return from_grid(to_grid(a, K, M, ndim) * to_grid(b, K, M, ndim), K, ndim)


def convolve_direct(a, b, K):
    """Batched truncated 1-D convolution by direct summation over the last axis.

    Slower than :func:`convolve_truncated` but each output coefficient is a
    sum of products of input coefficients, so exact zeros stay zero and tiny
    modes keep their relative accuracy (no FFT roundoff floor).
    """
    a = np.asarray(a)
    b = np.asarray(b)
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape), dtype=np.result_type(a, b, complex))
    n = 2 * K + 1
    for j in range(-K, K + 1):
        aj = a[..., K + j, None]
        if not np.any(aj):
            continue
        # out[k] += a[j] b[k - j] for |k| <= K and |k - j| <= K
        lo, hi = max(-K, j - K), min(K, j + K)
        out[..., K + lo : K + hi + 1] += aj * b[..., K + lo - j : K + hi - j + 1]
    return out


def estimate_analyticity_radius(f: FourierField, floor=RADIUS_FLOOR, model="algebraic") -> float:
    """Decay rate r in |fhat(k)| ~ C <k>^(-p) exp(-r|k|), clamped at zero.

    ``model="algebraic"`` fits log C, r and p jointly by least squares, which
    removes the slope bias an algebraic prefactor puts on a pure exponential
    fit; ``model="exponential"`` fits log C and r only. The zero mode is
    ignored and coefficients at or below ``floor`` are discarded.
    """
    ak = f.abs_k().ravel()
    mags = f.magnitudes().ravel()
    use = (ak > 0) & (mags > floor)
    ak, mags = ak[use], mags[use]
    if model == "algebraic":
        cols = [np.ones_like(ak), -ak, -np.log(bracket(ak))]
    elif model == "exponential":
        cols = [np.ones_like(ak), -ak]
    else:
        raise ValueError(f"unknown decay model {model!r}")
    if ak.size < 3 or np.unique(ak).size < len(cols):
        raise RadiusUndetermined(f"only {ak.size} usable modes above floor {floor:g}")
    X = np.column_stack(cols)
    sol, *_ = np.linalg.lstsq(X, np.log(mags), rcond=None)
    return max(float(sol[1]), 0.0)
