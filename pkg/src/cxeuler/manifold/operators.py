"""Mode operators, spectral dichotomies and eigenvalue groups.

Invariant subspaces come from an ordered complex Schur form
``A = Z T Z^H`` with the selected eigenvalues leading. Solving
``T11 Y - Y T22 = -T12`` block-diagonalises T, so ``B = Z [[I, Y], [0, I]]``
gives ``B^{-1} A B = diag(T11, T22)`` and the projection onto the leading
subspace along the trailing one is ``Z [[I, -Y], [0, 0]] Z^H``. This stays
well defined for Jordan blocks, where eigenvector bases do not exist.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm, schur, solve_sylvester
from scipy.linalg.lapack import ztrsen

from ..errors import KBelowK0, NuTooLarge, ThresholdOnSpectrum
from .system import LocalSystem

TOL_AXIS = 1e-9


@dataclass(frozen=True)
class Split:
    """Block-diagonalising change of basis for a selected set of eigenvalues."""

    n: int  # size of the selected (leading) block
    T11: np.ndarray
    T22: np.ndarray
    B: np.ndarray
    Binv: np.ndarray
    P: np.ndarray  # projection onto the selected subspace
    eigvals: np.ndarray  # diagonal of the ordered Schur form

    @property
    def m(self):
        return self.B.shape[0]


def split(A, select) -> Split:
    """Ordered-Schur split of A; ``select`` maps eigenvalues to a boolean mask."""
    A = np.asarray(A, dtype=complex)
    m = A.shape[0]
    T, Z = schur(A, output="complex")
    mask = np.asarray(select(np.diag(T)), dtype=bool)
    n = int(mask.sum())
    if 0 < n < m:
        T, Z, _, _, _, _, info = ztrsen(mask.astype(np.int32), T, Z, job="N")
        if info != 0:
            raise np.linalg.LinAlgError(f"ztrsen failed with info={info}")
    T11, T12, T22 = T[:n, :n], T[:n, n:], T[n:, n:]
    if 0 < n < m:
        Y = solve_sylvester(T11, -T22, -T12)
    else:
        Y = np.zeros((n, m - n), dtype=complex)
    S = np.eye(m, dtype=complex)
    S[:n, n:] = Y
    Sinv = np.eye(m, dtype=complex)
    Sinv[:n, n:] = -Y
    B = Z @ S
    Binv = Sinv @ Z.conj().T
    E = np.zeros((m, m))
    E[:n, :n] = np.eye(n)
    P = B @ E @ Binv
    return Split(n, T11, T22, B, Binv, P, np.diag(T).copy())


@dataclass(frozen=True)
class ModeOperator:
    k: int
    gamma: float
    matrix: np.ndarray
    eigvals: np.ndarray
    P_u: np.ndarray
    P_cs: np.ndarray
    dichotomy: Split

    @property
    def rank_u(self):
        return self.dichotomy.n


def _check_threshold(lam, gamma, tol_axis):
    close = np.abs(lam.real - gamma) < tol_axis
    if np.any(close):
        raise ThresholdOnSpectrum(f"eigenvalue {lam[close][0]} within {tol_axis:g} of Re = {gamma}")


def assemble_mode_operator(sys: LocalSystem, k: int, gamma: float, tol_axis: float = TOL_AXIS) -> ModeOperator:
    """L_k = L0 + k Lb with the dichotomy projections for Re(lambda) > gamma."""
    Lk = sys.mode_matrix(k)
    lam = np.linalg.eigvals(Lk)
    _check_threshold(lam, gamma, tol_axis)
    d = split(Lk, lambda z: z.real > gamma)
    return ModeOperator(int(k), float(gamma), Lk, lam, d.P, np.eye(sys.m) - d.P, d)


@dataclass(frozen=True)
class EigenGroups:
    k: int
    mu: np.ndarray  # distinct eigenvalues of Lbold
    eigvals: np.ndarray  # eigenvalues of L_k
    labels: np.ndarray  # index into mu for each eigenvalue
    projections: dict  # mu index -> group-eigenspace projection
    group_radius: float

    def group(self, i):
        return self.eigvals[self.labels == i]


def default_group_radius(sys):
    mu = sys.mu()
    if mu.size < 2:
        return 0.5
    return 0.25 * min(abs(a - b) for i, a in enumerate(mu) for b in mu[i + 1 :])


def eigenvalue_groups(sys: LocalSystem, k: int, group_radius: float | None = None) -> EigenGroups:
    """Cluster sigma(Lb + L0/k) around sigma(Lb); raise KBelowK0 when ambiguous."""
    if k == 0:
        raise KBelowK0("groups are undefined at k = 0")
    r = default_group_radius(sys) if group_radius is None else float(group_radius)
    mu = sys.mu()
    Lk = sys.mode_matrix(k)
    lam = np.linalg.eigvals(Lk)
    scaled = lam / k
    labels = np.empty(lam.size, dtype=int)
    for j, z in enumerate(scaled):
        dist = np.abs(mu - z)
        near = np.flatnonzero(dist <= 2 * r)
        if dist.min() > r or near.size > 1:
            raise KBelowK0(f"eigenvalue {z} of Lb + L0/k not uniquely within {r:g} of sigma(Lb) at k={k}")
        labels[j] = int(dist.argmin())
    projections = {}
    for i, m_i in enumerate(mu):
        if not np.any(labels == i):
            continue
        # select via the scaled Schur diagonal so labels and ordering agree
        projections[i] = split(Lk, lambda z, i=i: np.abs(z / k - m_i) <= r).P
    return EigenGroups(int(k), mu, lam, labels, projections, r)


@dataclass(frozen=True)
class ModifiedProjection:
    P_u: np.ndarray
    P_cs: np.ndarray
    dichotomy: Split
    straddling: tuple  # mu indices of groups moved to the centre-stable side
    fallback: bool  # True when groups were undefined and P_u(gamma) was used


def modified_projection(sys: LocalSystem, k: int, gamma: float, group_radius: float | None = None,
                        tol_axis: float = TOL_AXIS) -> ModifiedProjection:
    """Dichotomy at gamma that never splits an eigenvalue group.

    A group straddling Re(lambda) = gamma goes entirely to the centre-stable
    side. Without any straddling group the result is the plain P_u(gamma);
    where groups are undefined (small |k|) it falls back to P_u(gamma) too.
    """
    try:
        g = eigenvalue_groups(sys, k, group_radius)
    except KBelowK0:
        op = assemble_mode_operator(sys, k, gamma, tol_axis)
        return ModifiedProjection(op.P_u, op.P_cs, op.dichotomy, (), True)
    above, straddle = [], []
    for i in g.projections:
        re = g.group(i).real
        if np.all(re > gamma):
            above.append(i)
        elif np.any(re > gamma):
            straddle.append(i)
    if not straddle:
        op = assemble_mode_operator(sys, k, gamma, tol_axis)
        return ModifiedProjection(op.P_u, op.P_cs, op.dichotomy, (), False)
    r, mu = g.group_radius, g.mu
    d = split(sys.mode_matrix(k), lambda z: np.array([any(abs(x / k - mu[i]) <= r for i in above) for x in z]))
    return ModifiedProjection(d.P, np.eye(sys.m) - d.P, d, tuple(straddle), False)


def phi_functions(X):
    """(e^X, phi1(X), phi2(X)) for a stack of square matrices via one augmented expm."""
    X = np.asarray(X, dtype=complex)
    n = X.shape[-1]
    aug = np.zeros(X.shape[:-2] + (3 * n, 3 * n), dtype=complex)
    eye = np.eye(n)
    aug[..., :n, :n] = X
    aug[..., :n, n : 2 * n] = eye
    aug[..., n : 2 * n, 2 * n :] = eye
    big = expm(aug)
    return big[..., :n, :n], big[..., :n, n : 2 * n], big[..., :n, 2 * n :]


@dataclass
class SemigroupConstants:
    C_u: float
    C_cs: float
    per_k_u: dict
    per_k_cs: dict


def _block_exp(T, times):
    """e^{t T} for each t, stacked."""
    return expm(np.asarray(times)[:, None, None] * T[None])


def semigroup_bound_check(sys: LocalSystem, gamma: float, nu: float, k_range, t_range,
                          growth_tol: float = 1.5) -> SemigroupConstants:
    """Measured constants in the smoothing and decay bounds of the linear semigroup.

    C_u = sup |e^{L_k t} P_u| e^{-(gamma + nu|k|) t} over sampled t <= 0 and
    C_cs = sup |e^{L_k t} P_cs| e^{-(gamma - nu|k|) t} over t >= 0 (spectral
    norms). ``t_range`` is ``(T, n_samples)``. Raises NuTooLarge when the
    per-|k| constants keep growing over the upper half of the k range.
    """
    T, nt = t_range
    tneg = np.linspace(-T, 0.0, nt)
    tpos = np.linspace(0.0, T, nt)
    per_u, per_cs = {}, {}
    for k in k_range:
        d = assemble_mode_operator(sys, k, gamma).dichotomy
        n, m = d.n, d.m
        cu = ccs = 0.0
        if n > 0:
            E = _block_exp(d.T11, tneg)
            mats = d.B[:, :n] @ E @ d.Binv[:n, :]
            norms = np.linalg.norm(mats, ord=2, axis=(-2, -1))
            cu = float(np.max(norms * np.exp(-(gamma + nu * abs(k)) * tneg)))
        if n < m:
            E = _block_exp(d.T22, tpos)
            mats = d.B[:, n:] @ E @ d.Binv[n:, :]
            norms = np.linalg.norm(mats, ord=2, axis=(-2, -1))
            ccs = float(np.max(norms * np.exp(-(gamma - nu * abs(k)) * tpos)))
        per_u[k], per_cs[k] = cu, ccs
    _check_growth(per_u, per_cs, growth_tol)
    return SemigroupConstants(max(per_u.values()), max(per_cs.values()), per_u, per_cs)


def _check_growth(per_u, per_cs, growth_tol):
    kabs = sorted({abs(k) for k in per_u})
    if len(kabs) < 4:
        return
    upper = kabs[len(kabs) // 2 :]
    for per in (per_u, per_cs):
        c = [max(v for k, v in per.items() if abs(k) == a) for a in upper]
        if c[0] > 0 and c[-1] > growth_tol * c[0] and all(x <= y for x, y in zip(c, c[1:])):
            raise NuTooLarge(f"constants grow along k: {c[0]:.3g} at |k|={upper[0]} to {c[-1]:.3g} at |k|={upper[-1]}")
