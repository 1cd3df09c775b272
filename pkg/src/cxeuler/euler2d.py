"""Pseudospectral solver for the 2D complex Euler equations in vorticity form.

The vorticity obeys ``w_t + conj(u) . grad w = 0`` with ``u = grad^perp psi``,
``lap psi = w``, and the mean velocity obeys
``d/dt mean(u_k) = i Im mean(conj(u_l) d_k u_l)``.

Coefficient arrays are centred: index ``(K + k1, K + k2)`` holds wavevector
``(k1, k2)``; the first array axis is x1. Integrals are torus averages.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import InvalidFitWindow, ResolutionExhausted, StepRejected
from .fourier import FourierField, from_grid, mode_axis, padded_size, to_grid
from .shear import ShearState

__all__ = [
    "SolverConfig",
    "VorticityState",
    "Diagnostics",
    "GrowthResult",
    "Trajectory2D",
    "biot_savart",
    "vorticity_rhs",
    "step",
    "integrate",
    "diagnostics",
    "tail_fraction",
    "velocity_grid",
    "linear_growth_check",
    "from_shear",
    "to_shear",
    "analytic_data",
    "rough_perturbation",
    "exhaustion_time",
    "illposedness_signature",
]


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings.

    With ``dealias`` on, products are evaluated on a padded grid of at least
    3K+1 points per axis, which makes the quadratic term an exact Galerkin
    truncation. With it off the grid has 2K+1 points and products alias.
    ``filter`` enables an exponential spectral filter (off by default).
    """

    K: int = 32
    dt: float = 1e-3
    dealias: bool = True
    tail_threshold: float = 1e-10
    filter: bool = False
    filter_alpha: float = 36.0
    filter_order: int = 36

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 4:
            raise ValueError(f"K must be an integer >= 4, got {self.K}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.tail_threshold > 0:
            raise ValueError("tail_threshold must be positive")


@dataclass(frozen=True)
class VorticityState:
    omega: FourierField
    mean_u: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        if self.omega.dim != 2 or self.omega.m != 1:
            raise ValueError("omega must be a scalar 2-D field")
        mean = np.asarray(self.mean_u, dtype=complex).reshape(2)
        mean.setflags(write=False)
        object.__setattr__(self, "mean_u", mean)
        w = self.omega.coeffs[0]
        K = self.omega.K
        if abs(w[K, K]) > 1e-14 * max(1.0, float(np.abs(w).max())):
            raise ValueError("vorticity must have zero mean")

    @property
    def K(self):
        return self.omega.K

    @classmethod
    def from_modes(cls, K, modes, mean_u=(0, 0), t=0.0):
        """Build from ``{(k1, k2): coeff}``."""
        return cls(FourierField.from_modes(2, K, modes), np.asarray(mean_u, dtype=complex), t)

    def with_K(self, K):
        return VorticityState(self.omega.with_cutoff(K), self.mean_u, self.t)


@dataclass(frozen=True)
class Diagnostics:
    energy: float
    enstrophy: complex
    enstrophy_hermitian: float
    casimir3: complex
    mean_re: np.ndarray
    tail: float


@dataclass
class Trajectory2D:
    times: np.ndarray
    diagnostics: list
    states: list

    def series(self, name):
        return np.array([getattr(d, name) for d in self.diagnostics])


@dataclass
class GrowthResult:
    measured: float
    predicted: float
    times: np.ndarray
    amplitudes: np.ndarray
    scale: float = field(default=1.0)

    @property
    def error(self):
        return abs(self.measured - self.predicted)

    def within(self, rel=0.01):
        """|measured - predicted| <= rel * |a||k|."""
        return self.error <= rel * self.scale


class _Grid:
    """Precomputed wavenumber arrays for one cutoff and grid size."""

    def __init__(self, K, dealias=True):
        self.K = K
        self.M = padded_size(K) if dealias else 2 * K + 1
        ks = mode_axis(K).astype(float)
        self.k1, self.k2 = np.meshgrid(ks, ks, indexing="ij")
        ksq = self.k1**2 + self.k2**2
        self.inv_ksq = np.divide(1.0, ksq, out=np.zeros_like(ksq), where=ksq > 0)
        self.tail = np.maximum(np.abs(self.k1), np.abs(self.k2)) > 2.0 * K / 3.0

    def velocity(self, w, mean):
        # u = grad^perp psi, lap psi = w  =>  uhat = -i kperp what / |k|^2, kperp = (-k2, k1)
        fac = -1j * w * self.inv_ksq
        uh = np.empty((2,) + w.shape, dtype=complex)
        uh[0] = -self.k2 * fac
        uh[1] = self.k1 * fac
        uh[:, self.K, self.K] = mean
        return uh

    def rhs(self, w, mean):
        # the mean-flow part of conj(u).grad w is diagonal and applied exactly;
        # only the fluctuation product goes through the grid
        uh = self.velocity(w, 0.0)
        stack = np.empty((4,) + w.shape, dtype=complex)
        stack[:2] = uh
        stack[2] = 1j * self.k1 * w
        stack[3] = 1j * self.k2 * w
        phys = to_grid(stack, self.K, self.M, 2)
        adv = np.conj(phys[0]) * phys[2] + np.conj(phys[1]) * phys[3]
        dw = -from_grid(adv, self.K, 2)
        dw -= (np.conj(mean[0]) * stack[2] + np.conj(mean[1]) * stack[3])
        dw[self.K, self.K] = 0.0
        e = (uh.real**2 + uh.imag**2).sum(axis=0)
        dmean = 1j * np.array([np.sum(self.k1 * e), np.sum(self.k2 * e)])
        return dw, dmean

    def tail_fraction(self, w):
        e = np.abs(w) ** 2 * self.inv_ksq
        total = float(e.sum())
        return float(e[self.tail].sum()) / total if total > 0 else 0.0


@lru_cache(maxsize=16)
def _grid(K, dealias=True):
    return _Grid(K, dealias)


def biot_savart(omega: FourierField, mean_u=(0, 0)) -> FourierField:
    """Velocity field (2 components) of a mean-free vorticity plus a mean flow."""
    if omega.dim != 2 or omega.m != 1:
        raise ValueError("omega must be a scalar 2-D field")
    K = omega.K
    w = omega.coeffs[0]
    if abs(w[K, K]) > 1e-14 * max(1.0, float(np.abs(w).max())):
        raise ValueError("vorticity must have zero mean")
    mean = np.asarray(mean_u, dtype=complex).reshape(2)
    return FourierField(2, K, _grid(K).velocity(w, mean))


def vorticity_rhs(state: VorticityState, config: SolverConfig | None = None):
    """Return ``(domega, dmean)``; raises ResolutionExhausted on a full spectral tail."""
    cfg = config or SolverConfig(K=max(4, state.K))
    g = _grid(state.K, cfg.dealias)
    w = state.omega.coeffs[0]
    tail = g.tail_fraction(w)
    if tail > cfg.tail_threshold:
        raise ResolutionExhausted(f"tail fraction {tail:.3e} above {cfg.tail_threshold:g}", state, tail)
    dw, dmean = g.rhs(w, state.mean_u)
    return FourierField(2, state.K, dw[None]), dmean


def tail_fraction(state: VorticityState) -> float:
    """Share of the fluctuation energy in modes with max|k_i| > 2K/3."""
    return _grid(state.K).tail_fraction(state.omega.coeffs[0])


def _filter_factor(cfg, K):
    g = _grid(K, cfg.dealias)
    kmax = np.maximum(np.abs(g.k1), np.abs(g.k2)) / K
    return np.exp(-cfg.filter_alpha * kmax**cfg.filter_order)


def _rk4(g, w, mean, h):
    a1, b1 = g.rhs(w, mean)
    a2, b2 = g.rhs(w + 0.5 * h * a1, mean + 0.5 * h * b1)
    a3, b3 = g.rhs(w + 0.5 * h * a2, mean + 0.5 * h * b2)
    a4, b4 = g.rhs(w + h * a3, mean + h * b3)
    w = w + h / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
    mean = mean + h / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
    return w, mean


def _advance(state, cfg, nsteps, sample_every=None, on_sample=None):
    """March ``nsteps`` RK4 steps on raw arrays, checking the tail after each step."""
    K = state.K
    g = _grid(K, cfg.dealias)
    filt = _filter_factor(cfg, K) if cfg.filter else None
    w = np.array(state.omega.coeffs[0])
    mean = np.array(state.mean_u)
    t0 = state.t
    for i in range(1, nsteps + 1):
        w_prev, mean_prev = w, mean
        w, mean = _rk4(g, w, mean, cfg.dt)
        if filt is not None:
            w = w * filt
        if not (np.isfinite(w).all() and np.isfinite(mean).all()):
            raise StepRejected(f"non-finite vorticity at t={t0 + i * cfg.dt}")
        tail = g.tail_fraction(w)
        if tail > cfg.tail_threshold:
            last = VorticityState(FourierField(2, K, w_prev[None]), mean_prev, t0 + (i - 1) * cfg.dt)
            raise ResolutionExhausted(
                f"tail fraction {tail:.3e} above {cfg.tail_threshold:g} at t={t0 + i * cfg.dt:.6g}", last, tail
            )
        if sample_every is not None and (i % sample_every == 0 or i == nsteps):
            on_sample(VorticityState(FourierField(2, K, w[None]), mean, t0 + i * cfg.dt))
    return VorticityState(FourierField(2, K, w[None]), mean, t0 + nsteps * cfg.dt)


def step(state: VorticityState, config: SolverConfig) -> VorticityState:
    """One classical RK4 step of size ``config.dt`` for (omega, mean_u)."""
    if config.K != state.K:
        raise ValueError(f"state cutoff {state.K} differs from config K={config.K}")
    return _advance(state, config, 1)


def integrate(state: VorticityState, config: SolverConfig, t_end: float, sample_every: int = 100) -> Trajectory2D:
    """Integrate to ``t_end`` with fixed steps, recording diagnostics at samples."""
    if config.K != state.K:
        raise ValueError(f"state cutoff {state.K} differs from config K={config.K}")
    nsteps = int(round((t_end - state.t) / config.dt))
    times, diags, states = [state.t], [diagnostics(state)], [state]

    def record(s):
        times.append(s.t)
        diags.append(diagnostics(s))
        states.append(s)

    _advance(state, config, nsteps, sample_every, record)
    return Trajectory2D(np.array(times), diags, states)


def velocity_grid(state: VorticityState, M=None):
    """Physical velocity, shape (2, M, M)."""
    K = state.K
    uh = _grid(K).velocity(state.omega.coeffs[0], state.mean_u)
    return to_grid(uh, K, M or 2 * K + 1, 2)


def diagnostics(state: VorticityState) -> Diagnostics:
    K = state.K
    g = _grid(K)
    w = state.omega.coeffs[0]
    uh = g.velocity(w, state.mean_u)
    energy = 0.5 * float((np.abs(uh) ** 2).sum())
    enstrophy = complex(np.sum(w * w[::-1, ::-1]))
    wg = to_grid(w, K, padded_size(K), 2)
    return Diagnostics(
        energy=energy,
        enstrophy=enstrophy,
        enstrophy_hermitian=float((np.abs(w) ** 2).sum()),
        casimir3=complex(np.mean(wg**3)),
        mean_re=state.mean_u.real.copy(),
        tail=g.tail_fraction(w),
    )


def linear_growth_check(a, k, T=None, delta=1e-6, K=4, dt=1e-3, n_fit=50) -> GrowthResult:
    """Fit the growth rate of mode k of a small vorticity perturbation of the flow u = a.

    The prediction is Re(-i conj(a).k). T defaults to the time for a thousandfold
    change at the predicted rate (5 if the rate is negligible).
    """
    a = np.asarray(a, dtype=complex).reshape(2)
    k = tuple(int(x) for x in k)
    if k == (0, 0):
        raise ValueError("k must be nonzero")
    if max(abs(k[0]), abs(k[1])) > 2 * K // 3:
        K = 2 * max(abs(k[0]), abs(k[1])) + 2
    predicted = float((-1j * np.dot(np.conj(a), k)).real)
    if T is None:
        T = math.log(1e3) / abs(predicted) if abs(predicted) > 1e-3 else 5.0
    cfg = SolverConfig(K=K, dt=dt)
    state = VorticityState.from_modes(K, {k: delta}, mean_u=a)
    nsteps = max(n_fit, int(round(T / dt)))
    every = max(1, nsteps // n_fit)
    times, amps = [0.0], [delta]
    idx = (K + k[0], K + k[1])

    def record(s):
        times.append(s.t)
        amps.append(abs(s.omega.coeffs[0][idx]))

    cfg = SolverConfig(K=K, dt=T / nsteps)
    _advance(state, cfg, nsteps, every, record)
    amps = np.array(amps)
    limit = 1e-2 * max(float(np.linalg.norm(a)), 1.0)
    if amps.max() > limit:
        raise InvalidFitWindow(f"perturbation reached {amps.max():.3e} > {limit:.3e}")
    times = np.array(times)
    slope = np.polyfit(times, np.log(amps), 1)[0]
    return GrowthResult(float(slope), predicted, times, amps, float(np.linalg.norm(a) * np.linalg.norm(k)))


def from_shear(state: ShearState, a2=0.0) -> VorticityState:
    """Embed u = (i q, a2 + b(x1)) as a y-independent vorticity state."""
    K = state.K
    ks = mode_axis(K)
    w = np.zeros((2 * K + 1, 2 * K + 1), dtype=complex)
    w[:, K] = 1j * ks * state.bk
    return VorticityState(FourierField(2, K, w[None]), np.array([1j * state.q, a2]), state.t)


def to_shear(state: VorticityState, atol=1e-12) -> ShearState:
    """Inverse of :func:`from_shear`; requires y-independent data with real-free mean_u[0]."""
    K = state.K
    w = state.omega.coeffs[0]
    off = np.delete(w, K, axis=1)
    scale = max(1.0, float(np.abs(w).max()))
    if np.abs(off).max(initial=0.0) > atol * scale:
        raise ValueError("state depends on x2")
    if abs(state.mean_u[0].real) > atol * scale:
        raise ValueError("mean_u[0] has a real part")
    ks = mode_axis(K)
    b = np.divide(w[:, K], 1j * ks, out=np.zeros(2 * K + 1, dtype=complex), where=ks != 0)
    return ShearState(float(state.mean_u[0].imag), FourierField(1, K, b), state.t)


def analytic_data(K, rng, amplitude=0.05, sigma=0.5, band=None, mean_u=(0.3 + 0.1j, -0.2 + 0.05j), real=False):
    """Random vorticity of size amplitude e^{-sigma|k|}, optionally supported in max|k_i| <= band."""
    ks = mode_axis(K)
    k1, k2 = np.meshgrid(ks, ks, indexing="ij")
    mask = (np.maximum(np.abs(k1), np.abs(k2)) <= (K if band is None else band)) & ((k1 != 0) | (k2 != 0))
    z = rng.standard_normal(k1.shape) + 1j * rng.standard_normal(k1.shape)
    w = amplitude * z * np.exp(-sigma * np.hypot(k1, k2)) * mask
    if real:
        w = 0.5 * (w + np.conj(w[::-1, ::-1]))
        mean_u = np.real(mean_u)
    return VorticityState(FourierField(2, K, w[None]), np.asarray(mean_u, dtype=complex))


def rough_perturbation(K, rng, a=(-1j, 0), delta=1e-3, p=4.0):
    """Mean flow a plus vorticity of size delta <k>^{-p} with random phases on all modes."""
    ks = mode_axis(K)
    k1, k2 = np.meshgrid(ks, ks, indexing="ij")
    phase = np.exp(2j * np.pi * rng.random(k1.shape))
    w = delta * phase * (1.0 + k1**2 + k2**2) ** (-p / 2)
    w[K, K] = 0.0
    return VorticityState(FourierField(2, K, w[None]), np.asarray(a, dtype=complex))


def exhaustion_time(state: VorticityState, config: SolverConfig, t_max: float):
    """Time at which the tail check first fires, or None if t_max is reached."""
    nsteps = int(round(t_max / config.dt))
    try:
        _advance(state, config, nsteps)
    except ResolutionExhausted as exc:
        return exc.state.t + config.dt
    return None


def illposedness_signature(K_list=(32, 64, 128), seed=0, a=(-1j, 0), delta=1e-3, p=4.0, dt=1e-3,
                           tail_threshold=1e-6, t_max=3.0):
    """Time to resolution exhaustion for rough perturbations of the flow a, per cutoff.

    The same seeded phases are drawn at every K; the data is delta <k>^{-p}.
    Modes with Re(-i conj(a).k) > 0 grow at a rate proportional to |k|, so the
    exhaustion time falls as K grows.
    """
    out = {}
    for K in K_list:
        st = rough_perturbation(K, np.random.default_rng(seed), a=a, delta=delta, p=p)
        out[K] = exhaustion_time(st, SolverConfig(K=K, dt=dt, tail_threshold=tail_threshold), t_max)
    return out
