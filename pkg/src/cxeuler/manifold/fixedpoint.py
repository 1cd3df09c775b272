"""Duhamel fixed points on (-T, 0] in weighted analytic space-time norms.

Unstable-manifold map (Picard)::

    w(t) = e^{tL} a0 - int_t^0 e^{(t-s)L} P_u Ft ds + int_{-inf}^t e^{(t-s)L} P_cs Ft ds

Scattering map, iterating on v = w - e^{tL} b0 with the group-respecting
projections at threshold (3/2 + 3 delta) gamma::

    v(t) = - int_t^0 e^{(t-s)L} Pt_u Ft(v + e^{sL} b0) ds + int_{-inf}^t e^{(t-s)L} Pt_cs Ft(...) ds

Both maps act mode by mode in block coordinates of the dichotomy, and the
far past s < -T is dropped (its size is reported as ``tail_bound``).
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import expm

from ..errors import HypothesisViolation, NoContraction, OutsideAnalyticityBall
from ..fourier import FourierField, bracket, mode_axis
from .operators import assemble_mode_operator, modified_projection, split
from .quadrature import backward_recursion, forward_recursion, march_backward, march_forward
from .system import LocalSystem, a01_norm, nonlinear_coeffs

# largest powers of 1/2 with contraction factor <= 1/2 for the Burgers system
# at the default parameters (see calibrate_eps0 / calibrate_eps1)
EPS0_BURGERS = 2.0**-2
EPS1_BURGERS = 2.0**-1


@dataclass(frozen=True)
class ManifoldParams:
    gamma: float = 1.5
    zeta: float = 0.5
    nu: float = 1.0
    delta: float = 0.01
    m0: float = 3.0
    eps0: float | None = EPS0_BURGERS
    eps1: float | None = EPS1_BURGERS
    K: int = 32
    T: float | None = None
    N: int = 800
    picard_tol: float = 1e-10
    picard_max_iters: int = 30
    s: float = 1.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise HypothesisViolation("gamma must be positive")
        if not 0 <= self.zeta <= self.nu / 2 + 1e-15:
            raise HypothesisViolation(f"zeta={self.zeta} must lie in [0, nu/2] with nu={self.nu}")
        if int(self.K) != self.K or self.K < 1:
            raise ValueError("K must be a positive integer")
        if int(self.N) != self.N or self.N < 8:
            raise ValueError("N must be an integer >= 8")
        if self.T is not None and not self.T > 0:
            raise ValueError("T must be positive")
        if not self.picard_tol > 0 or self.picard_max_iters < 1:
            raise ValueError("picard_tol and picard_max_iters must be positive")

    @property
    def horizon(self):
        return 10.0 / self.gamma if self.T is None else float(self.T)

    @property
    def times(self):
        return np.linspace(-self.horizon, 0.0, self.N + 1)

    @property
    def h(self):
        return self.horizon / self.N

    @property
    def scatter_threshold(self):
        return (1.5 + 3 * self.delta) * self.gamma

    def check_primary(self):
        if self.gamma > self.m0 / 2 + 1e-15:
            raise HypothesisViolation(f"gamma={self.gamma} exceeds m0/2={self.m0 / 2} required by the unstable-manifold map")

    def check_scattering(self):
        if self.gamma < self.m0 / 2 - 1e-15:
            raise HypothesisViolation(f"gamma={self.gamma} is below m0/2={self.m0 / 2} required for scattering data")

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["T"] = self.horizon
        return d


def _modulus(coeffs):
    """Euclidean norm over the component axis (-2) without underflow in |z|^2."""
    a = np.abs(coeffs)
    top = a.max(axis=-2)
    safe = np.where(top > 0, top, 1.0)
    return top * np.sqrt(((a / np.expand_dims(safe, -2)) ** 2).sum(axis=-2))


def weighted_norm(coeffs, times, gamma, zeta=0.0, s=1.0):
    """sum_k sup_n <k>^s exp(-gamma t_n + zeta |t_n| |k|) |w_k(t_n)|."""
    coeffs = np.asarray(coeffs)
    K = (coeffs.shape[-1] - 1) // 2
    ks = np.abs(mode_axis(K))
    t = np.asarray(times)[:, None]
    logw = s * np.log(bracket(ks))[None, :] - gamma * t + zeta * np.abs(t) * ks[None, :]
    mag = _modulus(coeffs)
    with np.errstate(divide="ignore"):
        vals = np.where(mag > 0, np.exp(np.log(np.where(mag > 0, mag, 1.0)) + logw), 0.0)
    return float(vals.max(axis=0).sum())


@dataclass
class WeightedTrajectory:
    """Fields w(t_n) on the grid, shape (N+1, m, 2K+1), with their weight parameters."""

    times: np.ndarray
    coeffs: np.ndarray
    gamma: float
    zeta: float
    s: float = 1.0
    info: dict = field(default_factory=dict)

    @property
    def K(self):
        return (self.coeffs.shape[-1] - 1) // 2

    @property
    def m(self):
        return self.coeffs.shape[1]

    def weighted_norm(self, gamma=None, zeta=None, s=None):
        return weighted_norm(self.coeffs, self.times, self.gamma if gamma is None else gamma,
                             self.zeta if zeta is None else zeta, self.s if s is None else s)

    def field(self, n) -> FourierField:
        return FourierField(1, self.K, self.coeffs[n])

    def at(self, t) -> FourierField:
        """Piecewise-linear interpolant in time."""
        ts = self.times
        if not ts[0] - 1e-12 <= t <= ts[-1] + 1e-12:
            raise ValueError(f"t={t} outside [{ts[0]}, {ts[-1]}]")
        n = int(np.clip(np.searchsorted(ts, t) - 1, 0, len(ts) - 2))
        if abs(ts[n + 1] - t) < 1e-12:
            return self.field(n + 1)
        lam = (t - ts[n]) / (ts[n + 1] - ts[n])
        return FourierField(1, self.K, (1 - lam) * self.coeffs[n] + lam * self.coeffs[n + 1])

    def to_csv(self, tol=0.0) -> str:
        """Rows ``t_n,k,component,re,im`` for coefficients with modulus above ``tol``."""
        buf = io.StringIO()
        buf.write("t,k,component,re,im\n")
        ks = mode_axis(self.K)
        for n, t in enumerate(self.times):
            for j in range(self.m):
                row = self.coeffs[n, j]
                for k, z in zip(ks, row):
                    if abs(z) > tol:
                        buf.write(f"{float(t)!r},{k},{j},{float(z.real)!r},{float(z.imag)!r}\n")
        return buf.getvalue()


class _Engine:
    """Per-mode block coordinates and Duhamel propagators for one set of splits."""

    def __init__(self, sys, K, h, splits):
        self.sys = sys
        self.K = K
        self.ks = mode_axis(K)
        self.B = np.array([d.B for d in splits])
        self.Binv = np.array([d.Binv for d in splits])
        self.n_u = np.array([d.n for d in splits])
        self.fwd = forward_recursion(splits, h)
        self.bwd = backward_recursion(splits, h)

    def to_coords(self, W):
        return np.einsum("kij,njk->nki", self.Binv, W)

    def from_coords(self, c):
        return np.einsum("kij,nkj->nik", self.B, c)

    def nonlinear(self, W):
        return nonlinear_coeffs(self.sys, W, 1j * self.ks * W, self.K)

    def duhamel(self, F):
        """-int_t^0 (leading block) + int_{-T}^t (trailing block) of F."""
        g = self.to_coords(F)
        return self.from_coords(march_forward(self.fwd, g) - march_backward(self.bwd, g))

    def leading_flow(self, data, N):
        """e^{t_n L} data for data in the leading blocks, by exact backward stepping."""
        c = np.einsum("kij,jk->ki", self.Binv, data)
        lead = np.arange(c.shape[1])[None, :] < self.n_u[:, None]
        scale = max(float(np.abs(c).max()), 1e-300)
        if np.abs(c[~lead]).max(initial=0.0) > 1e-10 * scale:
            raise HypothesisViolation("data has components outside the selected spectral subspace")
        c = np.where(lead, c, 0.0)
        out = np.zeros((N + 1,) + c.shape, dtype=complex)
        out[N] = c
        for n in range(N - 1, -1, -1):
            out[n] = np.einsum("kij,kj->ki", self.bwd.E, out[n + 1])
        return self.from_coords(out)


def _as_coeffs(f: FourierField, sys, K):
    if f.dim != 1 or f.m != sys.m:
        raise ValueError(f"data must be a 1-D field with {sys.m} components")
    if f.K > K:
        raise ValueError(f"data cutoff {f.K} exceeds K={K}")
    return np.array(f.with_cutoff(K).coeffs)


def _iterate(engine, base, W0, times, rate, zeta, params, sys, shift=None):
    """Iterate X -> base + duhamel(Ft(X + shift)); return the converged X and diagnostics."""
    shift = 0.0 if shift is None else shift
    X = W0
    diffs, ratios = [], []
    for it in range(1, params.picard_max_iters + 1):
        Wfull = X + shift
        if a01_norm(Wfull, params.K) > sys.rho / 4:
            raise OutsideAnalyticityBall("iterate left the analyticity ball of the nonlinearity")
        with np.errstate(over="ignore", invalid="ignore"):
            new = base + engine.duhamel(engine.nonlinear(Wfull))
            diff = weighted_norm(new - X, times, rate, zeta, params.s)
        if not math.isfinite(diff):
            raise NoContraction(f"iteration diverged at step {it}")
        if diffs:
            ratios.append(diff / diffs[-1] if diffs[-1] > 0 else 0.0)
        diffs.append(diff)
        if diff <= params.picard_tol:
            return X, {"iterations": it, "residual": diff, "diffs": diffs, "ratios": ratios}
        X = new
    raise NoContraction(
        f"residual {diffs[-1]:.3e} above {params.picard_tol:g} after {params.picard_max_iters} iterations"
    )


def _splits(sys, K, select):
    return [select(k) for k in mode_axis(K)]


def picard_solve(sys: LocalSystem, a0: FourierField, params: ManifoldParams = ManifoldParams(),
                 start: str | np.ndarray = "linear") -> WeightedTrajectory:
    """Solution on the unstable manifold with P_u w(0) = a0.

    ``start`` is ``"linear"`` (the linear flow), ``"zero"``, or an explicit
    array of shape (N+1, m, 2K+1). The returned iterate w satisfies
    |w - Phi(w)| <= picard_tol in the (gamma, zeta, s) weighted norm.
    """
    params.check_primary()
    K, N, times = params.K, params.N, params.times
    A0 = _as_coeffs(a0, sys, K)
    size = a01_norm(A0, K)
    if params.eps0 is not None and size > params.eps0 * (1 + 1e-12):
        raise HypothesisViolation(f"|a0|_(A^0,1) = {size:.3g} exceeds eps0 = {params.eps0:.3g}")
    splits = _splits(sys, K, lambda k: assemble_mode_operator(sys, k, params.gamma).dichotomy)
    eng = _Engine(sys, K, params.h, splits)
    lin = eng.leading_flow(A0, N)
    if isinstance(start, str):
        W0 = {"linear": lin, "zero": np.zeros_like(lin)}[start]
    else:
        W0 = np.asarray(start, dtype=complex)
    W, info = _iterate(eng, lin, W0, times, params.gamma, params.zeta, params, sys)
    P = np.array([d.P for d in splits])
    pu0 = np.einsum("kij,jk->ik", P, W[-1])
    wn = weighted_norm(W, times, params.gamma, params.zeta, params.s)
    info.update(
        pu_defect=float(np.abs(pu0 - A0).max()),
        weighted_norm=wn,
        a0_norm=size,
        C=wn / size if size > 0 else float("nan"),
        tail_bound=wn * math.exp(-2 * params.gamma * params.horizon),
        max_ratio=max(info["ratios"], default=0.0),
    )
    return WeightedTrajectory(times, W, params.gamma, params.zeta, params.s, info)


def scattering_solve(sys: LocalSystem, b0: FourierField, params: ManifoldParams = ManifoldParams(),
                     start: str = "zero") -> WeightedTrajectory:
    """Solution with w - e^{tL} b0 = O(|b0|^2) in the 3 gamma / 2 weighted norm.

    b0 must lie in the span of eigenmodes with Re(lambda) >= gamma; build it
    with :func:`eigenmode`. ``info`` holds the deviation v, the ratio
    |v| / |b0|^2 and a0 = P_u(m0/2) w(0).
    """
    params.check_scattering()
    K, N, times = params.K, params.N, params.times
    B0 = _as_coeffs(b0, sys, K)
    size = a01_norm(B0, K)
    if params.eps1 is not None and size > params.eps1 * (1 + 1e-12):
        raise HypothesisViolation(f"|b0|_(A^0,1) = {size:.3g} exceeds eps1 = {params.eps1:.3g}")
    g = params.gamma
    cut = g - 1e-9 * max(1.0, g)
    lin_eng = _Engine(sys, K, params.h, _splits(sys, K, lambda k: split(sys.mode_matrix(k), lambda z: z.real >= cut)))
    lin = lin_eng.leading_flow(B0, N)
    gt = params.scatter_threshold
    mods = _splits(sys, K, lambda k: modified_projection(sys, k, gt))
    eng = _Engine(sys, K, params.h, [mp.dichotomy for mp in mods])
    rate = 1.5 * g
    V0 = np.zeros_like(lin) if start == "zero" else np.asarray(start, dtype=complex)
    V, info = _iterate(eng, 0.0, V0, times, rate, 0.0, params, sys, shift=lin)
    W = V + lin
    vnorm = weighted_norm(V, times, rate, 0.0, params.s)
    pu = np.array([assemble_mode_operator(sys, k, params.m0 / 2 * (1 - 1e-9)).P_u for k in mode_axis(K)])
    a0 = np.einsum("kij,jk->ik", pu, W[-1])
    info.update(
        v=V,
        v_norm=vnorm,
        b0_norm=size,
        ratio=vnorm / size**2 if size > 0 else float("nan"),
        a0=FourierField(1, K, a0),
        threshold=gt,
        straddling={int(k): mp.straddling for k, mp in zip(mode_axis(K), mods) if mp.straddling},
        tail_bound=weighted_norm(W, times, rate, 0.0, params.s) * math.exp(-2 * g * params.horizon),
        max_ratio=max(info["ratios"], default=0.0),
    )
    return WeightedTrajectory(times, W, rate, 0.0, params.s, info)


def eigenmode(sys: LocalSystem, n: int, K: int, amplitude: float = 1.0, which: str = "max"):
    """Single Fourier mode n along an eigenvector of L_n (unit Euclidean norm) times ``amplitude``.

    ``which="max"`` picks the eigenvalue with largest real part. Returns
    ``(field, lambda)``.
    """
    lam, vecs = np.linalg.eig(sys.mode_matrix(n))
    j = int(np.argmax(lam.real)) if which == "max" else int(np.argmin(lam.real))
    v = vecs[:, j] / np.linalg.norm(vecs[:, j])
    coeffs = np.zeros((sys.m, 2 * K + 1), dtype=complex)
    coeffs[:, K + n] = amplitude * v
    return FourierField(1, K, coeffs), complex(lam[j])


def unstable_mode(sys: LocalSystem, k: int, K: int, gamma: float, amplitude: float = 1.0) -> FourierField:
    """amplitude times a unit vector of E^u(gamma) at wavenumber k."""
    op = assemble_mode_operator(sys, k, gamma)
    if op.rank_u == 0:
        raise HypothesisViolation(f"no unstable direction at k={k}")
    v = op.dichotomy.B[:, 0]
    v = v / np.linalg.norm(v)
    coeffs = np.zeros((sys.m, 2 * K + 1), dtype=complex)
    coeffs[:, K + k] = amplitude * v
    return FourierField(1, K, coeffs)


def pde_residual(sys: LocalSystem, traj: WeightedTrajectory) -> np.ndarray:
    """Relative residual of w_t - L w - Ft(w, w_x) at interior nodes n = 2 .. N-2.

    w_t uses the fourth-order central difference; each entry is
    sum_k |r_k| / sum_k |w_t,k|.
    """
    W = traj.coeffs
    h = traj.times[1] - traj.times[0]
    K = traj.K
    ks = mode_axis(K)
    wt = (W[:-4] - 8 * W[1:-3] + 8 * W[3:-1] - W[4:]) / (12 * h)
    mid = W[2:-2]
    Lk = np.array([sys.mode_matrix(k) for k in ks])
    Lw = np.einsum("kij,njk->nik", Lk, mid)
    F = nonlinear_coeffs(sys, mid, 1j * ks * mid, K)
    r = wt - Lw - F
    num = np.linalg.norm(r, axis=1).sum(axis=-1)
    den = np.linalg.norm(wt, axis=1).sum(axis=-1)
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def hs_norm(coeffs, s):
    """(sum_k <k>^{2s} |w_k|^2)^{1/2} with |.| Euclidean over components."""
    coeffs = np.asarray(coeffs)
    K = (coeffs.shape[-1] - 1) // 2
    return float(np.sqrt((bracket(mode_axis(K)) ** (2 * s) * np.linalg.norm(coeffs, axis=-2) ** 2).sum()))


def _leading_exp(A, re_min, t):
    """e^{tA} restricted to the spectral subspace with Re(lambda) >= re_min.

    Exponentiating only the leading Schur block avoids amplifying roundoff in
    the strongly stable directions when t < 0.
    """
    d = split(A, lambda z: z.real >= re_min - 1e-9 * max(1.0, abs(re_min)))
    return d.B[:, : d.n] @ expm(t * d.T11) @ d.Binv[: d.n, :]


@dataclass
class IllposednessResult:
    rows: list
    skipped: list
    params: dict

    @property
    def w_column(self):
        return np.array([r["w_Hs"] for r in self.rows])

    @property
    def strictly_decreasing(self):
        col = self.w_column
        return bool(np.all(np.diff(col) < 0))

    def linear_error(self):
        return max((abs(r["linear_Hs"] - r["predicted_linear"]) / r["predicted_linear"] for r in self.rows), default=0.0)


def illposedness_experiment(sys: LocalSystem, s: float = 2.0, t: float = -0.5, M: float | None = None,
                            n_list=(4, 8, 16), params: ManifoldParams = ManifoldParams()) -> IllposednessResult:
    """Single-eigenmode scattering data with |b0|_(H^s) = 2M at increasing wavenumbers n.

    Reports |a0|_(H^s), |a0|_(A^0,1), |w(t)|_(H^s), the exact linear norm
    |e^{tL} b0|_(H^s) and its prediction e^{Re(lambda_n) t} 2M. Wavenumbers whose
    data would exceed eps1 in A^{0,1} are skipped.
    """
    if not s > 1:
        raise ValueError("s must exceed 1")
    if not t < 0:
        raise ValueError("t must be negative")
    if M is None:
        M = params.eps1
    rows, skipped = [], []
    for n in n_list:
        if n > params.K:
            skipped.append({"n": n, "reason": f"n exceeds K={params.K}"})
            continue
        unit, lam = eigenmode(sys, n, params.K)
        if not lam.real > 0:
            skipped.append({"n": n, "reason": "no unstable eigenvalue"})
            continue
        amp = 2 * M / bracket(n) ** s
        b0 = unit * amp
        size = a01_norm(b0.coeffs, params.K)
        if params.eps1 is not None and size > params.eps1 * (1 + 1e-12):
            skipped.append({"n": n, "reason": f"|b0|_(A^0,1) = {size:.3g} > eps1"})
            continue
        traj = scattering_solve(sys, b0, params)
        a0 = traj.info["a0"]
        lin_t = _leading_exp(sys.mode_matrix(n), lam.real, t) @ b0.coeffs[:, params.K + n]
        rows.append({
            "n": n,
            "lambda_re": lam.real,
            "lambda_im": lam.imag,
            "b0_A01": size,
            "a0_Hs": hs_norm(a0.coeffs, s),
            "a0_A01": a01_norm(a0.coeffs, params.K),
            "w_Hs": hs_norm(traj.at(t).coeffs, s),
            "linear_Hs": float(bracket(n) ** s * np.linalg.norm(lin_t)),
            "predicted_linear": float(math.exp(lam.real * t) * 2 * M),
            "v_ratio": traj.info["ratio"],
            "iterations": traj.info["iterations"],
        })
    return IllposednessResult(rows, skipped, {"s": s, "t": t, "M": M, "n_list": list(n_list), **params.to_dict()})


def _largest_contractive(run, amplitudes):
    for eps in amplitudes:
        try:
            info = run(eps)
        except (NoContraction, OutsideAnalyticityBall, FloatingPointError):
            continue
        if info["max_ratio"] <= 0.5:
            return eps
    return None


def calibrate_eps0(sys: LocalSystem, params: ManifoldParams = ManifoldParams(), k: int = 1, j_range=range(0, 20)):
    """Largest 2^-j for which Picard from a0 = 2^-j (unit unstable mode at k, A^{0,1}) contracts by 1/2."""
    p = replace(params, eps0=None)

    def run(eps):
        a0 = unstable_mode(sys, k, p.K, p.gamma, eps / bracket(k))
        return picard_solve(sys, a0, p).info

    return _largest_contractive(run, [2.0**-j for j in j_range])


def calibrate_eps1(sys: LocalSystem, params: ManifoldParams = ManifoldParams(), n: int = 1, j_range=range(0, 20)):
    """Largest 2^-j for which the scattering iteration from a single eigenmode contracts by 1/2."""
    p = replace(params, eps1=None)

    def run(eps):
        unit, _ = eigenmode(sys, n, p.K)
        return scattering_solve(sys, unit * (eps / bracket(n)), p).info

    return _largest_contractive(run, [2.0**-j for j in j_range])
