"""Complex shear flows u = (iq(t), b(x, t)).

The reduced dynamics are

    dq/dt   = sum_k k |b_k|^2
    db_k/dt = -q k b_k

and conserve q^2 + sum |b_k|^2. Given Q(t) = int_0^t q the shear profile is
known exactly, b_k(t) = exp(-k Q(t)) b_k(0), so the integrator advances the
pair (Q, q) with RK4 and rebuilds b from the integrating factor. The
b-equation never constrains the step size however large k is.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import StepRejected
from .fourier import FourierField, bracket, estimate_analyticity_radius, mode_axis

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class ShearState:
    q: float
    b: FourierField
    t: float = 0.0

    def __post_init__(self):
        if self.b.dim != 1 or self.b.m != 1:
            raise ValueError("shear profile must be a scalar 1-D field")
        b0 = self.b.coeff(0)[0]
        if abs(b0) > 1e-14 * max(1.0, float(np.abs(self.b.coeffs).max())):
            raise ValueError("shear profile must have zero mean")
        object.__setattr__(self, "q", float(self.q))

    @classmethod
    def from_modes(cls, q, modes, K=None, t=0.0):
        K = K if K is not None else max(abs(k) for k in modes)
        return cls(q, FourierField.from_modes(1, K, modes), t)

    @property
    def K(self):
        return self.b.K

    @property
    def bk(self):
        return self.b.coeffs[0]

    def energy(self):
        return self.q**2 + float(np.sum(np.abs(self.bk) ** 2))

    def hs_norm(self, s):
        """H^s norm of u = (iq, b); the background sits in the k = 0 slot."""
        ks = mode_axis(self.K)
        return math.sqrt(self.q**2 + float(np.sum(bracket(ks) ** (2 * s) * np.abs(self.bk) ** 2)))


def shear_rhs(state: ShearState):
    ks = mode_axis(state.K)
    dq = float(np.sum(ks * np.abs(state.bk) ** 2))
    db = FourierField(1, state.K, -state.q * ks * state.bk)
    return dq, db


def time_reverse(state: ShearState) -> ShearState:
    """(x, t) -> (-x, -t): reflect modes k -> -k and negate time."""
    return ShearState(state.q, state.b.reflect(), -state.t)


def _check_finite(state):
    if not (math.isfinite(state.q) and math.isfinite(state.t) and np.all(np.isfinite(state.bk))):
        raise StepRejected(f"non-finite shear state at t={state.t}")


class _Live:
    """Nonzero modes of b, stored as weights w_k = k |b_k|^2."""

    def __init__(self, bk, K):
        ks = mode_axis(K)
        nz = bk != 0
        self.k = ks[nz].astype(float)
        self.absk = np.abs(self.k)
        self.m2k = -2.0 * self.k
        self.w = self.k * np.abs(bk[nz]) ** 2


class _RateSchedule:
    """Fastest live rate 2 |k|_max sqrt(E) as a function of the accumulated integral Q.

    A mode is live while it carries more than 1e-20 of the energy.
    E is conserved and |b_k|^2 = |b_k(0)|^2 exp(-2kQ), so mode k is live on a
    half-line in Q. The rate is piecewise constant between those breakpoints
    and only needs recomputing when Q leaves the current interval.
    """

    def __init__(self, live: _Live, q0: float):
        p0 = live.w / live.k
        self.E = q0 * q0 + float(p0.sum())
        self.absk = live.absk
        self.k = live.k
        # live iff log p0 - 2kQ > log(1e-20 E)
        self.cut = (np.log(p0) - math.log(1e-20 * self.E)) / (2.0 * live.k) if self.E > 0 else None
        self.lo = self.hi = 0.0
        self.value = None

    def __call__(self, Q):
        if self.value is not None and self.lo < Q < self.hi:
            return self.value
        if self.cut is None or self.k.size == 0:
            self.lo, self.hi, self.value = -math.inf, math.inf, 0.0
            return 0.0
        pos = self.k > 0
        live = np.where(pos, Q < self.cut, Q > self.cut)
        self.value = 2.0 * float(self.absk[live].max()) * math.sqrt(self.E) if live.any() else 0.0
        # nearest breakpoints on either side of Q
        below = self.cut[self.cut < Q]
        above = self.cut[self.cut > Q]
        self.lo = float(below.max()) if below.size else -math.inf
        self.hi = float(above.min()) if above.size else math.inf
        return self.value


def _rk4_substeps(q, m2k, wl, hs, nsub):
    """RK4 for Q' = q, q' = sum w_k exp(-2kQ), restarting Q at 0 each substep."""
    if wl.size <= 4:
        return _rk4_substeps_scalar(q, m2k.tolist(), wl.tolist(), hs, nsub)
    Qout = 0.0
    for _ in range(nsub):
        g1 = float(wl.sum())
        k2Q = q + 0.5 * hs * g1
        g2 = float(wl @ np.exp(m2k * (0.5 * hs * q)))
        k3Q = q + 0.5 * hs * g2
        g3 = float(wl @ np.exp(m2k * (0.5 * hs * k2Q)))
        k4Q = q + hs * g3
        g4 = float(wl @ np.exp(m2k * (hs * k3Q)))
        Q = hs * (q + 2.0 * k2Q + 2.0 * k3Q + k4Q) / 6.0
        q = q + hs * (g1 + 2.0 * g2 + 2.0 * g3 + g4) / 6.0
        wl = wl * np.exp(m2k * Q)
        Qout += Q
    return q, Qout, wl


def _rk4_substeps_scalar(q, m2k, wl, hs, nsub):
    # few live modes: plain floats beat numpy call overhead
    def G(x):
        return sum(w * math.exp(a * x) for w, a in zip(wl, m2k))

    Qout = 0.0
    for _ in range(nsub):
        g1 = sum(wl)
        k2Q = q + 0.5 * hs * g1
        g2 = G(0.5 * hs * q)
        k3Q = q + 0.5 * hs * g2
        g3 = G(0.5 * hs * k2Q)
        k4Q = q + hs * g3
        g4 = G(hs * k3Q)
        Q = hs * (q + 2.0 * k2Q + 2.0 * k3Q + k4Q) / 6.0
        q = q + hs * (g1 + 2.0 * g2 + 2.0 * g3 + g4) / 6.0
        wl = [w * math.exp(a * Q) for w, a in zip(wl, m2k)]
        Qout += Q
    return q, Qout, np.array(wl)


def _advance_b(state, Q):
    return FourierField(1, state.K, _scaled(state.bk, mode_axis(state.K), Q))


def _scaled(b0, ks, Q):
    # b0 exp(-kQ) evaluated in log space so tiny b0 times a huge factor stays finite
    out = np.zeros_like(b0)
    nz = b0 != 0
    a = b0[nz]
    out[nz] = np.exp(np.log(np.abs(a)) - ks[nz] * Q) * (a / np.abs(a))
    return out


def step_exact_b(state: ShearState, dt: float, q_path: Callable[[float], float] | None = None):
    """Advance one step; return ``(new_state, Q)`` with Q the integral of q over the step.

    With ``q_path`` the background is prescribed: Q comes from 8-point
    Gauss-Legendre quadrature of ``q_path`` and q is set to ``q_path(t + dt)``.
    Without it, (Q, q) are advanced together by one RK4 step with b rebuilt
    exactly inside each stage.
    """
    _check_finite(state)
    if q_path is None:
        live = _Live(state.bk, state.K)
        qn, Q, _ = _rk4_substeps(state.q, live.m2k, live.w, dt, 1)
    else:
        Q = _gauss_legendre(q_path, state.t, dt)
        qn = float(q_path(state.t + dt))
    new = ShearState(qn, _advance_b(state, Q), state.t + dt)
    _check_finite(new)
    return new, Q


def _gauss_legendre(f, t, h):
    ts = t + 0.5 * h * (_GL_NODES + 1.0)
    return 0.5 * h * float(np.dot(_GL_WEIGHTS, [f(s) for s in ts]))


@dataclass
class ShearTrajectory:
    times: np.ndarray
    q: np.ndarray
    energy: np.ndarray
    integral_q: np.ndarray
    states: list = field(repr=False)

    def hs_norms(self, s):
        return np.array([st.hs_norm(s) for st in self.states])


def integrate(state: ShearState, t_end: float, dt: float, sample_every: int = 1, q_path=None,
              stop: Callable[[ShearState], bool] | None = None, rate_cap: float | None = 0.02
              ) -> ShearTrajectory:
    """Integrate to ``t_end`` on a uniform grid of spacing about ``dt``.

    Each grid step is split into RK4 substeps so that the fastest live rate
    2|k|max sqrt(E) times the substep stays below ``rate_cap``; ``None``
    disables splitting. b is rebuilt from the accumulated integral of q.
    """
    _check_finite(state)
    n = max(1, int(math.ceil((t_end - state.t) / dt - 1e-9)))
    h = (t_end - state.t) / n
    K = state.K
    ks = mode_axis(K)
    b0 = state.bk
    live = _Live(b0, K)
    wl = live.w
    schedule = _RateSchedule(live, state.q)
    q, Qtot = state.q, 0.0
    rec_t, rec_q, rec_E, rec_Q, rec_s = [state.t], [q], [state.energy()], [0.0], [state]
    for i in range(1, n + 1):
        t = state.t + i * h
        if q_path is None:
            nsub = 1
            if rate_cap is not None:
                nsub = max(1, int(math.ceil(h * schedule(Qtot) / rate_cap)))
            q, Qout, wl = _rk4_substeps(q, live.m2k, wl, h / nsub, nsub)
        else:
            Qout = _gauss_legendre(q_path, t - h, h)
            q = float(q_path(t))
        Qtot += Qout
        if not (math.isfinite(q) and math.isfinite(Qtot)):
            raise StepRejected(f"non-finite shear state at t={t}")
        record = i % sample_every == 0 or i == n
        cur = None
        if record or stop is not None:
            cur = ShearState(q, FourierField(1, K, _scaled(b0, ks, Qtot)), t)
        done = stop is not None and stop(cur)
        if record or done:
            rec_t.append(t)
            rec_q.append(q)
            rec_E.append(cur.energy())
            rec_Q.append(Qtot)
            rec_s.append(cur)
        if done:
            break
    return ShearTrajectory(np.array(rec_t), np.array(rec_q), np.array(rec_E), np.array(rec_Q), rec_s)


# -- single-mode angle reduction ---------------------------------------------

@dataclass(frozen=True)
class ThetaState:
    theta: float
    E: float
    k: int

    def __post_init__(self):
        if self.E < 0:
            raise ValueError("energy must be nonnegative")

    def to_shear(self, K=None, t=0.0) -> ShearState:
        r = math.sqrt(self.E)
        return ShearState.from_modes(-r * math.cos(self.theta), {self.k: r * math.sin(self.theta)},
                                     K=K if K is not None else abs(self.k), t=t)

    @classmethod
    def from_shear(cls, state: ShearState, k: int) -> "ThetaState":
        others = np.delete(state.bk, k + state.K)
        bk = state.b.coeff(k)[0]
        if np.any(others != 0) or abs(bk.imag) > 1e-14 * max(1.0, abs(bk)):
            raise ValueError("angle reduction needs real data supported on a single mode")
        E = state.q**2 + bk.real**2
        return cls(math.atan2(bk.real, -state.q), E, k)


def theta_rhs(ts: ThetaState) -> float:
    return math.sqrt(ts.E) * ts.k * math.sin(ts.theta)


def theta_closed_form(theta0, E, k, t):
    """theta(t) = 2 atan(exp(sqrt(E) k t) tan(theta0 / 2)) for theta0 in (0, pi)."""
    if not 0.0 < theta0 < math.pi:
        raise ValueError(f"theta0={theta0} outside (0, pi); fixed points are handled separately")
    with np.errstate(over="ignore"):
        g = np.exp(math.sqrt(E) * k * np.asarray(t, dtype=float))
    return 2.0 * np.arctan(g * math.tan(0.5 * theta0))


# -- experiments --------------------------------------------------------------

def predicted_crossing_time(k, eps, s):
    """(pi / (k eps)) log <k>^s from the ill-posedness proof."""
    return math.pi / (k * eps) * s * math.log(float(bracket(k)))


def admissible_mode(k, eps, s, M, T):
    return (eps / 4) * float(bracket(k)) ** s > M and predicted_crossing_time(k, eps, s) < T


def select_mode(eps, s, M, T, k_max=10**7):
    if s > 0:
        k = max(1, int(math.floor(math.sqrt(max((4 * M / eps) ** (2.0 / s) - 1.0, 0.0)))))
    else:
        k = 1
    while k <= k_max:
        if admissible_mode(k, eps, s, M, T):
            return k
        k += 1
    raise ValueError(f"no admissible mode below {k_max} for eps={eps}, s={s}, M={M}, T={T}")


@dataclass
class InflationResult:
    k: int
    T0: float | None
    predicted_T0: float
    initial_norm: float
    sup_norm: float
    crossed: bool
    times: np.ndarray
    norms: np.ndarray
    params: dict

    def within(self, margin=5.0):
        return self.crossed and self.T0 <= margin * self.predicted_T0


def norm_inflation_experiment(eps, s, M, T, k=None, dt=None):
    """Small data whose H^s norm exceeds M before time T.

    Data: q = -eps/2, b = eps/(2<k>^s) e^{ikx}. The crossing time is located by
    linear interpolation between steps. A run that reaches T without crossing
    returns ``crossed=False`` with the achieved supremum.
    """
    if eps <= 0 or M <= 0 or T <= 0 or s < 0:
        raise ValueError("need eps, M, T > 0 and s >= 0")
    k = select_mode(eps, s, M, T) if k is None else int(k)
    state = ShearState.from_modes(-eps / 2, {k: eps / (2 * float(bracket(k)) ** s)})
    init = state.hs_norm(s)
    if not init < eps:
        raise AssertionError(f"initial H^{s} norm {init} is not below eps={eps}")
    rate = math.sqrt(state.energy()) * k
    if dt is None:
        dt = min(1e-3, 0.02 / rate)
    times, norms = [0.0], [init]
    T0 = 0.0 if init > M else None
    while T0 is None and state.t < T - 1e-12:
        state, _ = step_exact_b(state, min(dt, T - state.t))
        times.append(state.t)
        norms.append(state.hs_norm(s))
        if norms[-1] > M:
            t0, t1, n0, n1 = times[-2], times[-1], norms[-2], norms[-1]
            T0 = t0 + (M - n0) * (t1 - t0) / (n1 - n0)
    norms = np.array(norms)
    return InflationResult(k, T0, predicted_crossing_time(k, eps, s), init, float(norms.max()),
                           T0 is not None, np.array(times), norms,
                           dict(eps=eps, s=s, M=M, T=T, dt=dt))


@dataclass
class AnalyticityResult:
    times: np.ndarray
    q: np.ndarray
    energy: np.ndarray
    integral_q: np.ndarray
    radius: np.ndarray
    rel_error: np.ndarray
    window: np.ndarray
    states: list = field(repr=False)

    @property
    def max_rel_error(self):
        return float(np.max(self.rel_error[self.window]))

    @property
    def energy_drift(self):
        return float(np.max(np.abs(self.energy - self.energy[0])) / self.energy[0])

    @property
    def q_monotone(self):
        return bool(np.all(np.diff(self.q) >= -1e-14 * np.abs(self.q[:-1]).max()))

    def reversed_states(self):
        """The time-reversed run: analytic for t < 0, rough at t = 0."""
        return [time_reverse(st) for st in reversed(self.states)]


def rough_profile(K, p):
    """b_k = <k>^(-p) on k = 1..K."""
    return {k: float(bracket(k)) ** (-p) for k in range(1, K + 1)}


def loss_of_analyticity_experiment(q_in=1.0, p=1.0, K=256, T=2.0, dt=1e-3, n_samples=40):
    """Forward run from rough positive-mode data; tracks the analyticity radius.

    The exact solution has b_k(t) = exp(-k int_0^t q) b_k(0), so the fitted
    radius should equal the running integral of q.
    """
    if q_in <= 0:
        raise ValueError("q_in must be positive")
    state = ShearState.from_modes(q_in, rough_profile(K, p), K=K)
    nsteps = int(round(T / dt))
    every = max(1, nsteps // n_samples)
    traj = integrate(state, T, dt, sample_every=every)
    radius = np.array([estimate_analyticity_radius(st.b) if st.t > 0 else 0.0 for st in traj.states])
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(traj.integral_q > 0, np.abs(radius - traj.integral_q) / traj.integral_q, 0.0)
    window = traj.times >= T / 2 - 1e-12
    return AnalyticityResult(traj.times, traj.q, traj.energy, traj.integral_q, radius, rel, window,
                             traj.states)
