"""Exponential-integrator Duhamel sums on a uniform grid.

The integrand is replaced by its piecewise-linear interpolant between nodes
and convolved exactly against the matrix exponential, so stiff modes need no
step restriction. Matrices are stacked along a leading wavenumber axis and
padded to m x m, with zero rows and columns outside the active block.

Forward (from the far past)::

    J(t) = int_{-inf}^t e^{(t-s)A} g(s) ds
    J_{n+1} = e^{hA} J_n + h (phi1 - phi2)(hA) g_n + h phi2(hA) g_{n+1}

Backward (to time 0)::

    I(t) = int_t^0 e^{(t-s)A} g(s) ds
    I_n = e^{C} I_{n+1} + h phi2(C) g_n + h (phi1 - phi2)(C) g_{n+1},  C = -hA
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import Split, phi_functions


@dataclass(frozen=True)
class Recursion:
    """One-step propagators (nk, m, m): ``x_next = E x + W_here g_here + W_next g_next``."""

    E: np.ndarray
    W_here: np.ndarray
    W_next: np.ndarray


def _pad(block, m, lo):
    out = np.zeros(block.shape[:-2] + (m, m), dtype=complex)
    n = block.shape[-1]
    out[..., lo : lo + n, lo : lo + n] = block
    return out


def forward_recursion(splits: list[Split], h: float) -> Recursion:
    """Propagators for the trailing (centre-stable) blocks, marching forward."""
    m = splits[0].m
    Es, Wh, Wn = [], [], []
    for d in splits:
        n = d.n
        if n == m:
            z = np.zeros((m, m), dtype=complex)
            Es.append(z), Wh.append(z), Wn.append(z)
            continue
        e, p1, p2 = phi_functions(h * d.T22)
        Es.append(_pad(e, m, n))
        Wh.append(_pad(h * (p1 - p2), m, n))
        Wn.append(_pad(h * p2, m, n))
    return Recursion(np.array(Es), np.array(Wh), np.array(Wn))


def backward_recursion(splits: list[Split], h: float) -> Recursion:
    """Propagators for the leading (unstable) blocks, marching backward from t = 0.

    Here "here" is node n and "next" is node n+1, i.e. the node already known.
    """
    m = splits[0].m
    Es, Wh, Wn = [], [], []
    for d in splits:
        n = d.n
        if n == 0:
            z = np.zeros((m, m), dtype=complex)
            Es.append(z), Wh.append(z), Wn.append(z)
            continue
        e, p1, p2 = phi_functions(-h * d.T11)
        Es.append(_pad(e, m, 0))
        Wh.append(_pad(h * p2, m, 0))
        Wn.append(_pad(h * (p1 - p2), m, 0))
    return Recursion(np.array(Es), np.array(Wh), np.array(Wn))


def _apply(M, x):
    # (nk, m, m) @ (nk, m) per wavenumber
    return np.einsum("kij,kj->ki", M, x)


def march_forward(rec: Recursion, g):
    """J on all nodes from J_0 = 0; g has shape (N+1, nk, m)."""
    J = np.zeros_like(g)
    for n in range(g.shape[0] - 1):
        J[n + 1] = _apply(rec.E, J[n]) + _apply(rec.W_here, g[n]) + _apply(rec.W_next, g[n + 1])
    return J


def march_backward(rec: Recursion, g):
    """I on all nodes from I_N = 0; g has shape (N+1, nk, m)."""
    I = np.zeros_like(g)
    for n in range(g.shape[0] - 2, -1, -1):
        I[n] = _apply(rec.E, I[n + 1]) + _apply(rec.W_here, g[n]) + _apply(rec.W_next, g[n + 1])
    return I


def scalar_forward(lam: complex, f, h: float):
    """Discrete int_{-T}^{t_n} e^{lam (t_n - s)} f(s) ds on a uniform grid (scalar case)."""
    e, p1, p2 = (x[0, 0] for x in phi_functions(np.array([[h * lam]])))
    out = np.zeros(len(f), dtype=complex)
    for n in range(len(f) - 1):
        out[n + 1] = e * out[n] + h * (p1 - p2) * f[n] + h * p2 * f[n + 1]
    return out


def scalar_backward(lam: complex, f, h: float):
    """Discrete int_{t_n}^0 e^{lam (t_n - s)} f(s) ds on a uniform grid (scalar case)."""
    e, p1, p2 = (x[0, 0] for x in phi_functions(np.array([[-h * lam]])))
    out = np.zeros(len(f), dtype=complex)
    for n in range(len(f) - 2, -1, -1):
        out[n] = e * out[n + 1] + h * p2 * f[n] + h * (p1 - p2) * f[n + 1]
    return out
