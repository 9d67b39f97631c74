"""Linear system model, stacked trajectory algebra, and point-to-point LQR.

The discrete-time model is X_{t+1} = A X_t + B U_t + w_t with observation
Y_t = C X_t + v_t.  Trajectories over a horizon T stack into

    X_2^T = Q U + Q_tilde w + Q_hat X_1

where Q and Q_tilde are block lower-triangular and Q_hat stacks the powers
of A.  Everything here is a pure function of its arguments.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InfeasibleTargetError

_PSD_TOL = 1e-10
_SINGULAR_REL_TOL = 1e-10


def _as_matrix(value, name: str) -> np.ndarray:
    mat = np.asarray(value, dtype=float)
    if mat.ndim != 2:
        raise ConfigurationError(f"{name} must be a 2-D matrix, got shape {mat.shape}")
    return mat


def _check_psd(mat: np.ndarray, name: str) -> None:
    if not np.allclose(mat, mat.T, atol=1e-9, rtol=0.0):
        raise ConfigurationError(f"{name} must be symmetric")
    eigvals = np.linalg.eigvalsh((mat + mat.T) / 2.0)
    if eigvals.size and eigvals.min() < -_PSD_TOL:
        raise ConfigurationError(f"{name} must be PSD, min eigenvalue {eigvals.min():g}")


@dataclass(frozen=True)
class LinearSystem:
    """Matrices (A, B, C) and noise covariances defining the dynamics.

    C defaults to the identity (full state observation) and both noise
    covariances default to zero, the regime in which the encoders operate.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray = None
    process_noise_cov: np.ndarray = None
    obs_noise_cov: np.ndarray = None

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        if A.shape[0] != A.shape[1]:
            raise ConfigurationError(f"A must be square, got {A.shape}")
        n = A.shape[0]
        B = _as_matrix(self.B, "B")
        if B.shape[0] != n:
            raise ConfigurationError(f"B must have {n} rows, got {B.shape}")
        C = np.eye(n) if self.C is None else _as_matrix(self.C, "C")
        if C.shape[1] != n:
            raise ConfigurationError(f"C must have {n} columns, got {C.shape}")
        W = np.zeros((n, n)) if self.process_noise_cov is None else _as_matrix(
            self.process_noise_cov, "process_noise_cov")
        if W.shape != (n, n):
            raise ConfigurationError(f"process_noise_cov must be {n}x{n}, got {W.shape}")
        _check_psd(W, "process_noise_cov")
        p = C.shape[0]
        V = np.zeros((p, p)) if self.obs_noise_cov is None else _as_matrix(
            self.obs_noise_cov, "obs_noise_cov")
        if V.shape != (p, p):
            raise ConfigurationError(f"obs_noise_cov must be {p}x{p}, got {V.shape}")
        _check_psd(V, "obs_noise_cov")
        for name, value in (("A", A), ("B", B), ("C", C),
                            ("process_noise_cov", W), ("obs_noise_cov", V)):
            object.__setattr__(self, name, value)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @classmethod
    def from_dict(cls, doc: dict) -> "LinearSystem":
        """Build from {"A": [[...]], "B": [[...]], ...} with row-major arrays."""
        known = {"A", "B", "C", "process_noise_cov", "obs_noise_cov"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigurationError(f"unknown system fields: {sorted(unknown)}")
        if "A" not in doc or "B" not in doc:
            raise ConfigurationError("system document needs at least A and B")
        return cls(A=doc["A"], B=doc["B"], C=doc.get("C"),
                   process_noise_cov=doc.get("process_noise_cov"),
                   obs_noise_cov=doc.get("obs_noise_cov"))

    @classmethod
    def from_json(cls, text: str) -> "LinearSystem":
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return {
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "C": self.C.tolist(),
            "process_noise_cov": self.process_noise_cov.tolist(),
            "obs_noise_cov": self.obs_noise_cov.tolist(),
        }


@dataclass(frozen=True)
class Trajectory:
    """States X_1..X_T (rows) with the inputs U_1..U_{T-1} that produced them."""

    states: np.ndarray
    inputs: np.ndarray

    def __post_init__(self):
        states = np.atleast_2d(np.asarray(self.states, dtype=float))
        inputs = np.asarray(self.inputs, dtype=float)
        if inputs.ndim == 1:
            inputs = inputs.reshape(-1, 1) if inputs.size else inputs.reshape(0, 1)
        if len(states) != len(inputs) + 1:
            raise ConfigurationError(
                f"{len(states)} states need {len(states) - 1} inputs, got {len(inputs)}")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "inputs", inputs)

    @property
    def horizon(self) -> int:
        return len(self.states)

    def stacked(self) -> np.ndarray:
        """All states as one concatenated vector."""
        return self.states.reshape(-1)


@dataclass(frozen=True)
class StackedDynamics:
    """Block matrices mapping (U, w, X_1) to the stacked tail X_2^T."""

    Q: np.ndarray
    Q_tilde: np.ndarray
    Q_hat: np.ndarray

    @property
    def n(self) -> int:
        return self.Q_hat.shape[1]

    @property
    def m(self) -> int:
        return self.Q.shape[1] // (self.horizon - 1)

    @property
    def horizon(self) -> int:
        return self.Q_hat.shape[0] // self.Q_hat.shape[1] + 1


@dataclass(frozen=True)
class GaussianSpec:
    """Mean vector and PSD covariance of a (possibly degenerate) Gaussian."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        d = mean.shape[0]
        if cov.shape != (d, d):
            raise ConfigurationError(f"cov must be {d}x{d}, got {cov.shape}")
        _check_psd(cov, "cov")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def stacked_matrices(system: LinearSystem, T: int) -> StackedDynamics:
    """Build Q, Q_tilde, Q_hat for horizon T.

    Block (i, j) of Q is A^(i-j) B for i >= j and zero above the diagonal;
    Q_tilde has A^(i-j) blocks; row-block r of Q_hat is A^r.
    """
    if T < 2:
        raise ConfigurationError(f"horizon must be at least 2, got {T}")
    n, m = system.n, system.m
    powers = [np.eye(n)]
    for _ in range(T - 1):
        powers.append(system.A @ powers[-1])
    Q = np.zeros((n * (T - 1), m * (T - 1)))
    Q_tilde = np.zeros((n * (T - 1), n * (T - 1)))
    Q_hat = np.zeros((n * (T - 1), n))
    for i in range(1, T):
        r = slice((i - 1) * n, i * n)
        Q_hat[r] = powers[i]
        for j in range(1, i + 1):
            Q[r, (j - 1) * m:j * m] = powers[i - j] @ system.B
            Q_tilde[r, (j - 1) * n:j * n] = powers[i - j]
    return StackedDynamics(Q=Q, Q_tilde=Q_tilde, Q_hat=Q_hat)


def propagate_gaussian(stacked: StackedDynamics, input_prior: GaussianSpec,
                       x1: np.ndarray) -> GaussianSpec:
    """Moments of X_2^T for Gaussian inputs and a fixed noise-free start.

    Returns mean Q mu_U + Q_hat x1 and covariance Q R_U Q^T.
    """
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    if x1.shape[0] != stacked.n:
        raise ConfigurationError(f"x1 must have dimension {stacked.n}, got {x1.shape[0]}")
    if input_prior.dim != stacked.Q.shape[1]:
        raise ConfigurationError(
            f"input prior dimension {input_prior.dim} != m(T-1) = {stacked.Q.shape[1]}")
    mean = stacked.Q @ input_prior.mean + stacked.Q_hat @ x1
    cov = stacked.Q @ input_prior.cov @ stacked.Q.T
    return GaussianSpec(mean=mean, cov=(cov + cov.T) / 2.0)


def simulate(system: LinearSystem, x1, inputs, noise=None) -> Trajectory:
    """Roll the recursion X_{t+1} = A X_t + B U_t + w_t forward."""
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim == 1:
        inputs = inputs.reshape(-1, system.m)
    steps = len(inputs)
    if noise is None:
        noise = np.zeros((steps, system.n))
    else:
        noise = np.asarray(noise, dtype=float).reshape(steps, system.n)
    states = np.empty((steps + 1, system.n))
    states[0] = x1
    for t in range(steps):
        states[t + 1] = system.A @ states[t] + system.B @ inputs[t] + noise[t]
    return Trajectory(states=states, inputs=inputs)


def _lqr_blocks(system: LinearSystem, T: int, state_weight: float):
    """Split the stacked map into the penalized rows and the terminal row."""
    stacked = stacked_matrices(system, T)
    n = system.n
    Q_mid = stacked.Q[: n * (T - 2)]
    Qhat_mid = stacked.Q_hat[: n * (T - 2)]
    G = stacked.Q[n * (T - 2):]
    A_top = stacked.Q_hat[n * (T - 2):]

    sv = np.linalg.svd(G, compute_uv=False)
    full_row_rank = sv.size == G.shape[0]
    if not full_row_rank or sv[0] == 0.0 or sv[-1] < _SINGULAR_REL_TOL * sv[0]:
        raise InfeasibleTargetError(
            f"terminal constraint singular at horizon {T}: singular values {sv}")

    H = 2.0 * (np.eye(G.shape[1]) + state_weight * Q_mid.T @ Q_mid)
    return H, G, Q_mid, Qhat_mid, A_top


def lqr_solution_map(system: LinearSystem, T: int, state_weight: float):
    """Matrices (M1, M2) with vec(U*) = M1 x1 + M2 xT for the LQR below.

    The optimum of a strictly convex equality-constrained quadratic program
    is linear in the constraint data, so one factorization serves every
    (x1, xT) pair.  Used to evaluate large corpora cheaply.
    """
    H, G, Q_mid, Qhat_mid, A_top = _lqr_blocks(system, T, state_weight)
    n = system.n
    nu = H.shape[0]
    KKT = np.block([[H, G.T], [G, np.zeros((n, n))]])
    rhs1 = np.vstack([-2.0 * state_weight * Q_mid.T @ Qhat_mid, -A_top])
    rhs2 = np.vstack([np.zeros((nu, n)), np.eye(n)])
    try:
        sol = np.linalg.solve(KKT, np.hstack([rhs1, rhs2]))
    except np.linalg.LinAlgError as exc:
        raise InfeasibleTargetError(f"KKT system singular at horizon {T}") from exc
    return sol[:nu, :n], sol[:nu, n:]


def lqr_point_to_point(system: LinearSystem, x1, xT, T: int,
                       state_weight: float) -> np.ndarray:
    """Minimize ||U||^2 + state_weight ||X_2^{T-1}||^2 subject to X_T = xT.

    Solves the KKT system of the equality-constrained quadratic program in
    the stacked input vector.  Returns the inputs as a (T-1, m) array.

    Raises
    ------
    InfeasibleTargetError
        If the terminal constraint map is numerically singular or the
        solved trajectory misses the target by more than 1e-6.
    """
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    xT = np.atleast_1d(np.asarray(xT, dtype=float))
    M1, M2 = lqr_solution_map(system, T, state_weight)
    u = (M1 @ x1 + M2 @ xT).reshape(T - 1, system.m)
    reached = simulate(system, x1, u).states[-1]
    gap = np.linalg.norm(reached - xT)
    if gap > 1e-6 * (1.0 + np.linalg.norm(xT)):
        raise InfeasibleTargetError(f"terminal miss {gap:g} exceeds tolerance")
    return u
