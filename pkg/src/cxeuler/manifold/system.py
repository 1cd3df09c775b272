"""Local first-order systems u_t + F(u, u_x) = 0 linearised at a constant state.

Writing u = c + w, F = A_u w + A_p p - Ft(w, p), the perturbation obeys
``w_t - L w = Ft(w, w_x)`` with mode matrices ``L_k = L0 + k Lb``,
``L0 = -A_u`` and ``Lb = -i A_p``.

Ft is stored as a finite Taylor polynomial: each term is a pair of
multi-indices (alpha, beta) with an m-vector coefficient, meaning
``coeff * prod_i w_i**alpha_i * prod_j p_j**beta_j``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import HypothesisViolation, OutsideAnalyticityBall
from ..fourier import FourierField, bracket, convolve_direct, mode_axis

AXIS_TOL = 1e-12


@dataclass(frozen=True)
class TaylorTerm:
    alpha: tuple
    beta: tuple
    coeff: np.ndarray

    @property
    def degree(self):
        return sum(self.alpha) + sum(self.beta)


@dataclass(frozen=True)
class LocalSystem:
    """Linearisation data and Taylor remainder of a local system.

    A_u and A_p are real for systems coming from a real F. Complex matrices
    are accepted so that mode matrices can be prescribed directly
    (see :meth:`from_mode_matrices`).
    """

    m: int
    c: np.ndarray
    A_u: np.ndarray
    A_p: np.ndarray
    taylor: tuple = ()
    rho: float = math.inf
    name: str = "system"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        m = int(self.m)
        A_u = np.atleast_2d(np.asarray(self.A_u))
        A_p = np.atleast_2d(np.asarray(self.A_p))
        if A_u.shape != (m, m) or A_p.shape != (m, m):
            raise ValueError(f"A_u and A_p must be {m}x{m}")
        c = np.asarray(self.c, dtype=float).reshape(m)
        terms = []
        for t in self.taylor:
            if not isinstance(t, TaylorTerm):
                t = TaylorTerm(*t)
            alpha, beta = tuple(int(x) for x in t.alpha), tuple(int(x) for x in t.beta)
            coeff = np.asarray(t.coeff).reshape(m)
            if len(alpha) != m or len(beta) != m or min(alpha + beta) < 0:
                raise ValueError(f"bad multi-index pair {alpha}, {beta}")
            if sum(alpha) + sum(beta) < 2:
                raise HypothesisViolation("Taylor remainder must start at degree 2")
            coeff.setflags(write=False)
            terms.append(TaylorTerm(alpha, beta, coeff))
        for name, val in (("c", c), ("A_u", A_u), ("A_p", A_p)):
            val = val.copy()
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "taylor", tuple(terms))
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        mu = np.linalg.eigvals(self.Lbold)
        if np.any(np.abs(mu.real) <= AXIS_TOL * max(1.0, float(np.abs(mu).max()))):
            raise HypothesisViolation(f"Lbold has spectrum on the imaginary axis: {mu}")

    @property
    def L0(self):
        return -self.A_u.astype(complex)

    @property
    def Lbold(self):
        return -1j * self.A_p

    def mode_matrix(self, k):
        return self.L0 + k * self.Lbold

    def mu(self, tol=1e-9):
        """Distinct eigenvalues of Lbold."""
        out = []
        for z in np.linalg.eigvals(self.Lbold):
            if all(abs(z - y) > tol for y in out):
                out.append(z)
        return np.array(out)

    def m0(self, K):
        """Smallest positive real part over sigma(L_k), |k| <= K."""
        re = np.concatenate([np.linalg.eigvals(self.mode_matrix(k)).real for k in range(-K, K + 1)])
        pos = re[re > AXIS_TOL]
        if pos.size == 0:
            raise HypothesisViolation("no unstable spectrum")
        return float(pos.min())

    @property
    def max_degree(self):
        return max((t.degree for t in self.taylor), default=0)

    @classmethod
    def from_mode_matrices(cls, L0, Lbold, taylor=(), rho=math.inf, name="modes"):
        """Build from L0 and Lbold directly (A_u = -L0, A_p = i Lbold)."""
        L0 = np.atleast_2d(np.asarray(L0, dtype=complex))
        Lbold = np.atleast_2d(np.asarray(Lbold, dtype=complex))
        m = L0.shape[0]
        A_u = -L0
        A_p = 1j * Lbold
        if np.abs(A_u.imag).max() == 0 and np.abs(A_p.imag).max() == 0:
            A_u, A_p = A_u.real, A_p.real
        return cls(m, np.zeros(m), A_u, A_p, taylor, rho, name)

    # -- serialisation ---------------------------------------------------

    def to_dict(self):
        def mat(a):
            a = np.asarray(a)
            if np.iscomplexobj(a) and np.abs(a.imag).max() > 0:
                return {"re": a.real.tolist(), "im": a.imag.tolist()}
            return np.real(a).tolist()

        return {
            "name": self.name,
            "m": self.m,
            "c": self.c.tolist(),
            "A_u": mat(self.A_u),
            "A_p": mat(self.A_p),
            "rho": None if math.isinf(self.rho) else self.rho,
            "taylor": [{"alpha": list(t.alpha), "beta": list(t.beta), "tensor": mat(t.coeff)} for t in self.taylor],
        }

    @classmethod
    def from_dict(cls, d):
        def mat(x):
            if isinstance(x, dict):
                return np.asarray(x["re"]) + 1j * np.asarray(x["im"])
            return np.asarray(x, dtype=float)

        rho = d.get("rho")
        terms = [TaylorTerm(tuple(t["alpha"]), tuple(t["beta"]), mat(t["tensor"])) for t in d.get("taylor", [])]
        return cls(int(d["m"]), d["c"], mat(d["A_u"]), mat(d["A_p"]), tuple(terms),
                   math.inf if rho is None else float(rho), d.get("name", "system"))

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def burgers_system() -> LocalSystem:
    """u_t + 3 u u_x = 0 for complex u = a + i b, as a real 2x2 system at u = i.

    F(u, p) = 3 (u_a p_a - u_b p_b, u_a p_b + u_b p_a); at c = (0, 1) this gives
    A_u = 0, A_p = [[0, -3], [3, 0]] and Ft = -3 (w_a p_a - w_b p_b, w_a p_b + w_b p_a).
    """
    terms = (
        TaylorTerm((1, 0), (1, 0), np.array([-3.0, 0.0])),
        TaylorTerm((0, 1), (0, 1), np.array([3.0, 0.0])),
        TaylorTerm((1, 0), (0, 1), np.array([0.0, -3.0])),
        TaylorTerm((0, 1), (1, 0), np.array([0.0, -3.0])),
    )
    return LocalSystem(2, np.array([0.0, 1.0]), np.zeros((2, 2)), np.array([[0.0, -3.0], [3.0, 0.0]]),
                       terms, math.inf, "burgers")


def jordan_system() -> LocalSystem:
    """Lbold = [[1, 1], [0, 1]], L0 = [[0, 0], [1, 0]]: eigenvalues k +- sqrt(k)."""
    return LocalSystem.from_mode_matrices([[0, 0], [1, 0]], [[1, 1], [0, 1]], name="jordan")


def _monomials(sys, W, P, K):
    """Evaluate every Taylor term on coefficient arrays of shape (..., m, 2K+1)."""
    out = np.zeros(np.broadcast_shapes(W.shape, P.shape), dtype=complex)
    for t in sys.taylor:
        prod = None
        for arr, idx in ((W, t.alpha), (P, t.beta)):
            for i, power in enumerate(idx):
                for _ in range(power):
                    f = arr[..., i, :]
                    prod = f if prod is None else convolve_direct(prod, f, K)
        out += t.coeff[:, None] * prod[..., None, :]
    return out


def nonlinear_coeffs(sys: LocalSystem, W, P, K):
    """Ft(w, p) on raw coefficient arrays of shape (..., m, 2K+1), Galerkin-truncated."""
    return _monomials(sys, np.asarray(W), np.asarray(P), K)


def nonlinear_eval(sys: LocalSystem, w: FourierField, wx: FourierField | None = None) -> FourierField:
    """Ft(w, w_x) as a FourierField truncated at the common cutoff.

    Raises OutsideAnalyticityBall when the A^{0,1} norm of w exceeds rho/4.
    """
    if w.dim != 1 or w.m != sys.m:
        raise ValueError(f"w must be a 1-D field with {sys.m} components")
    if wx is None:
        wx = FourierField(1, w.K, 1j * mode_axis(w.K) * w.coeffs)
    size = a01_norm(w.coeffs, w.K)
    if size > sys.rho / 4:
        raise OutsideAnalyticityBall(f"|w|_(A^0,1) = {size:.3g} exceeds rho/4 = {sys.rho / 4:.3g}")
    return FourierField(1, w.K, nonlinear_coeffs(sys, w.coeffs, wx.coeffs, w.K))


def composition_bound(sys: LocalSystem, w: FourierField, wx: FourierField | None = None) -> float:
    """Right side of the composition estimate: sum |coeff| |w|^|alpha| |w_x|^|beta| in A^0."""
    if wx is None:
        wx = FourierField(1, w.K, 1j * mode_axis(w.K) * w.coeffs)
    nw = float(np.linalg.norm(w.coeffs, axis=0).sum())
    np_ = float(np.linalg.norm(wx.coeffs, axis=0).sum())
    return sum(float(np.linalg.norm(t.coeff)) * nw ** sum(t.alpha) * np_ ** sum(t.beta) for t in sys.taylor)


def a01_norm(coeffs, K, s=1.0):
    """sum_k <k>^s |w_k| with |.| the Euclidean norm over components (last axis is k)."""
    return float((bracket(mode_axis(K)) ** s * np.linalg.norm(coeffs, axis=-2)).sum(axis=-1).max())


def geometric_burgers_matrix(a, b):
    """Quasilinear matrix of the geometric complex Burgers system in (Re u, Im u)."""
    return np.array([[3 * a, 3 * b], [b, -a]], dtype=float)


def geometric_burgers_hyperbolicity(a, b):
    """Both roots of l^2 - 2 a l - 3 (a^2 + b^2), i.e. a -+ sqrt(4a^2 + 3b^2), ascending.

    Vectorised: returns an array of shape ``broadcast(a, b).shape + (2,)``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    r = np.hypot(2 * a, math.sqrt(3) * b)
    return np.stack([a - r, a + r], axis=-1)
