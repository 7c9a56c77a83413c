"""Finite-horizon controllability Gramians and minimum-energy control."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy import linalg

from .errors import HorizonOverflowError, LinearizationError, NumericalSingularityError

# eigenvalues below RANK_TOL * largest count as uncontrollable directions
RANK_TOL = 1e-10


@dataclass
class LinearizedSystem:
    """``x_dot = A x + B u`` about an operating point."""

    A: np.ndarray
    B: np.ndarray
    config: Any = None
    state_names: tuple[str, ...] = ()
    input_names: tuple[str, ...] = ()

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.B = np.asarray(self.B, dtype=float)
        if self.B.ndim == 1:
            self.B = self.B.reshape(-1, 1)
        n = self.A.shape[0]
        if self.A.shape != (n, n) or self.B.shape[0] != n:
            raise ValueError(f"inconsistent shapes A{self.A.shape} B{self.B.shape}")
        if not (np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.B))):
            raise LinearizationError("non-finite entries in A or B")
        if not self.state_names:
            self.state_names = tuple(f"x{i}" for i in range(n))
        if not self.input_names:
            self.input_names = tuple(f"u{i}" for i in range(self.B.shape[1]))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def to_text(self) -> str:
        """Row-major matrix text: comment header with the orderings, then A and B."""
        buf = io.StringIO()
        buf.write("# states: " + " ".join(self.state_names) + "\n")
        buf.write("# inputs: " + " ".join(self.input_names) + "\n")
        for name, mat in (("A", self.A), ("B", self.B)):
            buf.write(f"{name} {mat.shape[0]} {mat.shape[1]}\n")
            for row in mat:
                buf.write(" ".join(repr(float(v)) for v in row) + "\n")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "LinearizedSystem":
        states: tuple[str, ...] = ()
        inputs: tuple[str, ...] = ()
        mats: dict[str, np.ndarray] = {}
        lines = iter(text.splitlines())
        for line in lines:
            if line.startswith("# states:"):
                states = tuple(line.split(":", 1)[1].split())
            elif line.startswith("# inputs:"):
                inputs = tuple(line.split(":", 1)[1].split())
            elif line.strip():
                name, r, c = line.split()
                rows = [next(lines).split() for _ in range(int(r))]
                mats[name] = np.array(rows, dtype=float).reshape(int(r), int(c))
        return cls(mats["A"], mats["B"], None, states, inputs)


def linearize_dynamics(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    x0,
    u0,
    eps: float = 1e-6,
) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference Jacobians of ``f`` at ``(x0, u0)``.

    Step for entry i is ``eps * max(1, |x0_i|)``.
    """
    x0 = np.asarray(x0, dtype=float)
    u0 = np.asarray(u0, dtype=float)
    n, m = x0.size, u0.size
    A = np.empty((n, n))
    B = np.empty((n, m))
    for i in range(n):
        h = eps * max(1.0, abs(x0[i]))
        dx = np.zeros(n)
        dx[i] = h
        A[:, i] = (f(x0 + dx, u0) - f(x0 - dx, u0)) / (2 * h)
    for i in range(m):
        h = eps * max(1.0, abs(u0[i]))
        du = np.zeros(m)
        du[i] = h
        B[:, i] = (f(x0, u0 + du) - f(x0, u0 - du)) / (2 * h)
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise LinearizationError("finite differences produced non-finite derivatives")
    return A, B


@dataclass
class GramianFactor:
    """Well-scaled representation of ``W(T)``.

    With ``A = M diag(A_u, A_s) M^-1`` split into modes that grow over the
    horizon (``A_u``) and the rest, ``W = M D^-1 W_s D^-T M^T`` where
    ``D = diag(e^{-A_u T}, I)``. ``W_s`` stays O(|B|^2 T) even when ``W`` itself
    spans more decades than a double can hold, so energies are computed from it.
    """

    W_scaled: np.ndarray
    M: np.ndarray
    D: np.ndarray

    @property
    def n(self) -> int:
        return self.W_scaled.shape[0]

    def full(self) -> np.ndarray:
        """The Gramian itself; raises :class:`HorizonOverflowError` if it cannot be represented."""
        try:
            with np.errstate(over="raise", invalid="raise"):
                K = np.linalg.solve(self.D.T, self.M.T).T
                W = K @ self.W_scaled @ K.T
        except (np.linalg.LinAlgError, FloatingPointError):
            raise HorizonOverflowError("Gramian exceeds floating-point range; use a shorter horizon") from None
        return 0.5 * (W + W.T)

    def _whiten(self, d: np.ndarray) -> np.ndarray:
        return self.D @ np.linalg.solve(self.M, d)

    def solve(self, d) -> np.ndarray:
        """``W^-1 d``."""
        e = self._whiten(np.asarray(d, dtype=float))
        y = linalg.cho_solve(linalg.cho_factor(self.W_scaled), e)
        return np.linalg.solve(self.M.T, self.D.T @ y)

    def trace_inverse(self) -> float:
        L = np.linalg.cholesky(self.W_scaled)
        G = linalg.solve_triangular(L, self._whiten(np.eye(self.n)), lower=True)
        return float(np.sum(G * G))


def _split_growing(A: np.ndarray, T: float) -> tuple[np.ndarray, int]:
    """Similarity ``M`` block-diagonalizing ``A`` with modes ``Re(lambda) T > 1`` first."""
    n = A.shape[0]
    Tm, Q, k = linalg.schur(A, output="real", sort=lambda re, im: re * T > 1.0)
    if k == 0 or k == n:
        return Q, k
    X = linalg.solve_sylvester(Tm[:k, :k], -Tm[k:, k:], -Tm[:k, k:])
    Y = np.eye(n)
    Y[:k, k:] = X
    return Q @ Y, k


def gramian_factor(sys: LinearizedSystem, T: float, steps: int = 2000) -> GramianFactor:
    """Integrate the scaled Lyapunov ODE with fixed-step RK4.

    In modal coordinates the scaled Gramian obeys
    ``dW_s/dt = F W_s + W_s F^T + D(t) B_z B_z^T D(t)^T`` with
    ``F = diag(0, A_s)``, which has no growing solutions.
    The step count is raised automatically so that ``h * rho(A) <= 0.05``.
    """
    if not T > 0:
        raise ValueError(f"horizon must be positive, got {T!r}")
    A, B = sys.A, sys.B
    n = A.shape[0]
    rho = float(np.max(np.abs(np.linalg.eigvals(A)))) if A.size else 0.0
    steps = max(int(steps), int(math.ceil(T * rho / 0.05)))
    h = T / steps
    M, k = _split_growing(A, T)
    Az = np.linalg.solve(M, A @ M)
    Bz = np.linalg.solve(M, B)
    F = Az.copy()
    F[:k, :k] = 0.0
    F[:k, k:] = 0.0
    F[k:, :k] = 0.0
    Au = Az[:k, :k]
    half = linalg.expm(-Au * (0.5 * h))

    def forcing(Du):
        DB = Bz.copy()
        DB[:k] = Du @ Bz[:k]
        return DB @ DB.T

    def rhs(W, Q):
        FW = F @ W
        return FW + FW.T + Q

    W = np.zeros((n, n))
    Du = np.eye(k)
    with np.errstate(over="raise", invalid="raise"):
        try:
            for _ in range(steps):
                Dm = half @ Du
                De = half @ Dm
                Q0, Qm, Q1 = forcing(Du), forcing(Dm), forcing(De)
                k1 = rhs(W, Q0)
                k2 = rhs(W + 0.5 * h * k1, Qm)
                k3 = rhs(W + 0.5 * h * k2, Qm)
                k4 = rhs(W + h * k3, Q1)
                W = W + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
                Du = De
        except FloatingPointError as exc:
            raise HorizonOverflowError(f"Gramian overflowed over T={T}; use a shorter horizon") from exc
    if not np.all(np.isfinite(W)):
        raise HorizonOverflowError(f"Gramian overflowed over T={T}; use a shorter horizon")
    D = np.eye(n)
    D[:k, :k] = linalg.expm(-Au * T)
    return GramianFactor(0.5 * (W + W.T), M, D)


def finite_horizon_gramian(sys: LinearizedSystem, T: float, steps: int = 2000) -> np.ndarray:
    """``W(T) = int_0^T e^{At} B B^T e^{A^T t} dt`` (see :func:`gramian_factor`)."""
    W = gramian_factor(sys, T, steps).full()
    if not np.all(np.isfinite(W)) or np.max(np.abs(W)) > 1e250:
        raise HorizonOverflowError(f"Gramian overflowed over T={T}; use a shorter horizon")
    return W


def _spectrum(W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lam, V = np.linalg.eigh(W)
    top = max(float(lam[-1]), 0.0)
    if top == 0.0:
        return lam, V
    if lam[0] < -1e-8 * top:
        raise NumericalSingularityError(f"Gramian is indefinite (min eigenvalue {lam[0]:.3e})")
    return lam, V


def is_rank_deficient(W: np.ndarray | GramianFactor) -> bool:
    if isinstance(W, GramianFactor):
        W = W.W_scaled
    lam, _ = _spectrum(W)
    return bool(lam[-1] <= 0.0 or lam[0] < RANK_TOL * lam[-1])


def min_control_energy(W: np.ndarray | GramianFactor, x_s, x_f, sys: LinearizedSystem, T: float) -> float:
    """Minimum ``int u^T u dt`` steering ``x_s`` to ``x_f`` in time ``T``.

    ``W`` may be the plain Gramian or its :class:`GramianFactor`. Returns
    ``inf`` when the required displacement has a component in an
    uncontrollable direction of ``W``.
    """
    x_s = np.asarray(x_s, dtype=float)
    x_f = np.asarray(x_f, dtype=float)
    d = x_f - linalg.expm(sys.A * T) @ x_s
    dnorm = float(np.linalg.norm(d))
    if dnorm == 0.0:
        return 0.0
    if isinstance(W, GramianFactor):
        factor, d = W, W._whiten(d)
        W = factor.W_scaled
        dnorm = float(np.linalg.norm(d))
    if not is_rank_deficient(W):
        c = linalg.cho_factor(W)
        return float(d @ linalg.cho_solve(c, d))
    lam, V = _spectrum(W)
    keep = lam > RANK_TOL * max(lam[-1], 0.0)
    coords = V.T @ d
    if np.linalg.norm(coords[~keep]) > 1e-9 * dnorm or not np.any(keep):
        return math.inf
    return float(np.sum(coords[keep] ** 2 / lam[keep]))


def optimal_input(sys: LinearizedSystem, W: np.ndarray | GramianFactor, x_s, x_f, T: float) -> Callable[[float], np.ndarray]:
    """Open-loop minimum-energy input ``u*(t) = B^T e^{A^T (T-t)} W^{-1} d``."""
    d = np.asarray(x_f, dtype=float) - linalg.expm(sys.A * T) @ np.asarray(x_s, dtype=float)
    if isinstance(W, GramianFactor):
        eta = W.solve(d)
    else:
        eta = linalg.cho_solve(linalg.cho_factor(W), d)
    A, B = sys.A, sys.B

    def u(t: float) -> np.ndarray:
        return B.T @ (linalg.expm(A.T * (T - t)) @ eta)

    return u


def local_effort_metric(sys: LinearizedSystem, T: float = 2.0, steps: int = 2000) -> float:
    """Average minimum energy over unit-norm targets from the origin: ``tr(W^-1)/n``."""
    factor = gramian_factor(sys, T, steps)
    if is_rank_deficient(factor):
        return math.inf
    return factor.trace_inverse() / sys.n


def least_norm_energy(A, B, x_s, x_f, T: float, steps: int = 1000) -> float:
    """Direct-transcription reference: piecewise-constant input on ``steps``
    intervals, minimum-norm solution of the terminal constraint."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    n, m = B.shape
    h = T / steps
    # exact zero-order-hold discretization through the augmented exponential
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = A
    aug[:n, n:] = B
    E = linalg.expm(aug * h)
    Ad, Bd = E[:n, :n], E[:n, n:]
    G = np.empty((n, m * steps))
    P = np.eye(n)
    for k in range(steps - 1, -1, -1):
        G[:, k * m:(k + 1) * m] = P @ Bd
        P = P @ Ad
    d = np.asarray(x_f, dtype=float) - P @ np.asarray(x_s, dtype=float)
    u, *_ = np.linalg.lstsq(G, d, rcond=None)
    return float(h * u @ u)
