"""One-bit mirroring codec and the eavesdropper's distortion analysis.

A state is either transmitted as-is (key 0) or reflected across an affine
subspace {x : S x = b} (key 1).  The legitimate receiver undoes the
reflection exactly; a Bayesian eavesdropper is left with a two-point
posterior whose variance trace is her minimum mean-square error.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigurationError, UndefinedPosteriorError

_ORTHO_TOL = 1e-10
_QR_BREAKDOWN_TOL = 1e-12


def _expit(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function, tolerant of +-inf."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass(frozen=True)
class KeyBit:
    """Single shared key bit, uniform from the eavesdropper's perspective."""

    value: int

    def __post_init__(self):
        if self.value not in (0, 1):
            raise ConfigurationError(f"key bit must be 0 or 1, got {self.value}")

    def __int__(self):
        return self.value


class AffineMirror:
    """Reflection across the affine subspace {x : S x = b}.

    Any S with linearly independent rows is accepted; rows are orthonormalized
    (QR on S^T) so the reflection formula (I - 2 S'S) x + 2 S'b applies.  The
    resulting map depends only on the subspace, not on the parametrization.
    """

    def __init__(self, S, b):
        S = np.atleast_2d(np.asarray(S, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if S.shape[0] > S.shape[1]:
            raise ConfigurationError(f"S must have full row rank, shape {S.shape}")
        if b.shape[0] != S.shape[0]:
            raise ConfigurationError(
                f"b must have one entry per row of S, got {b.shape[0]} for {S.shape}")
        Q, R = np.linalg.qr(S.T)
        diag = np.abs(np.diag(R))
        if diag.min() <= _QR_BREAKDOWN_TOL * max(1.0, diag.max()):
            raise ConfigurationError("rows of S are numerically dependent")
        self.S = Q.T
        self.b = np.linalg.solve(R.T, b)
        gram = self.S @ self.S.T
        if np.abs(gram - np.eye(S.shape[0])).max() > _ORTHO_TOL:
            raise ConfigurationError("orthonormalization failed")

    @property
    def n(self) -> int:
        return self.S.shape[1]

    @property
    def s(self) -> int:
        return self.S.shape[0]

    def mirror(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x - 2.0 * (x @ self.S.T - self.b) @ self.S

    def residual(self, x: np.ndarray) -> np.ndarray:
        """S x - b, the signed offset from the mirror subspace."""
        return np.asarray(x, dtype=float) @ self.S.T - self.b

    def to_dict(self) -> dict:
        return {"S": self.S.tolist(), "b": self.b.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "AffineMirror":
        return cls(S=doc["S"], b=doc["b"])


class MirrorSchedule:
    """Per-time list of mirrors covering a trajectory."""

    def __init__(self, mirrors):
        mirrors = list(mirrors)
        if not mirrors:
            raise ConfigurationError("schedule needs at least one mirror")
        dims = {m.n for m in mirrors}
        if len(dims) != 1:
            raise ConfigurationError(f"mirrors disagree on state dimension: {dims}")
        self.mirrors = mirrors
        self.dim = mirrors[0].n

    @classmethod
    def constant(cls, mirror: AffineMirror, times: int) -> "MirrorSchedule":
        return cls([mirror] * times)

    def __len__(self):
        return len(self.mirrors)

    def __getitem__(self, t):
        return self.mirrors[t]

    def __iter__(self):
        return iter(self.mirrors)

    @property
    def times(self) -> int:
        return len(self.mirrors)

    def mirror_stacked(self, x: np.ndarray) -> np.ndarray:
        pts = np.asarray(x, dtype=float).reshape(self.times, self.dim)
        out = np.vstack([m.mirror(p) for m, p in zip(self.mirrors, pts)])
        return out.reshape(np.asarray(x).shape)

    def mirror_stacked_many(self, X: np.ndarray) -> np.ndarray:
        """Mirror each row of an (N, times*dim) array."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty_like(X)
        for t, m in enumerate(self.mirrors):
            block = slice(t * self.dim, (t + 1) * self.dim)
            out[:, block] = m.mirror(X[:, block])
        return out

    def residuals(self, x: np.ndarray) -> list:
        pts = np.asarray(x, dtype=float).reshape(self.times, self.dim)
        return [m.residual(p) for m, p in zip(self.mirrors, pts)]

    def to_json(self) -> str:
        return json.dumps([m.to_dict() for m in self.mirrors])

    @classmethod
    def from_json(cls, text: str) -> "MirrorSchedule":
        return cls([AffineMirror.from_dict(doc) for doc in json.loads(text)])


def mirror_point(m: AffineMirror, x) -> np.ndarray:
    """Reflect x across the mirror subspace: (I - 2 S'S) x + 2 S'b."""
    return m.mirror(np.asarray(x, dtype=float))


def encode_mirror(x_t, key, m: AffineMirror) -> np.ndarray:
    """Codeword for one state: the state itself (key 0) or its mirror image."""
    key = int(key)
    if key not in (0, 1):
        raise ConfigurationError(f"key bit must be 0 or 1, got {key}")
    x_t = np.asarray(x_t, dtype=float)
    return x_t.copy() if key == 0 else m.mirror(x_t)


def decode_mirror(z_t, key, m: AffineMirror) -> np.ndarray:
    """Exact inverse of encode_mirror (the mirror is an involution)."""
    return encode_mirror(z_t, key, m)


def encode_stacked(x, key, schedule: MirrorSchedule) -> np.ndarray:
    """Apply one shared key bit to every time block of a stacked trajectory."""
    key = int(key)
    if key not in (0, 1):
        raise ConfigurationError(f"key bit must be 0 or 1, got {key}")
    x = np.asarray(x, dtype=float)
    return x.copy() if key == 0 else schedule.mirror_stacked(x)


def decode_stacked(z, key, schedule: MirrorSchedule) -> np.ndarray:
    return encode_stacked(z, key, schedule)


def _log_pair(dist, z: np.ndarray, schedule: MirrorSchedule):
    mirrored = schedule.mirror_stacked(z)
    lf = dist.log_density(z)
    lfm = dist.log_density(mirrored)
    if lf == -np.inf and lfm == -np.inf:
        raise UndefinedPosteriorError(
            "codeword and its mirror image both lie outside the prior support")
    return lf, lfm


def eve_posterior(z, dist, schedule: MirrorSchedule):
    """Optimal Bayesian posterior given a codeword trajectory.

    Returns (p_Z, estimates): the probability that no mirroring happened,
    p_Z = f(Z) / (f(Z) + f(Z~)), and the conditional-mean state estimates
    E(X_t | Z) = Z_t + 2 (1 - p_Z) S_t'(b_t - S_t Z_t).
    """
    z = np.asarray(z, dtype=float)
    lf, lfm = _log_pair(dist, z, schedule)
    p = float(_expit(np.array([lf - lfm]))[0])
    pts = z.reshape(schedule.times, schedule.dim)
    estimates = np.vstack([
        zt - 2.0 * (1.0 - p) * m.residual(zt) @ m.S
        for m, zt in zip(schedule.mirrors, pts)
    ])
    return p, estimates


def conditional_distortion(z, dist, schedule: MirrorSchedule) -> np.ndarray:
    """Eavesdropper MMSE per time step: D(t, Z) = 4 p (1-p) ||S_t Z_t - b_t||^2."""
    z = np.asarray(z, dtype=float)
    lf, lfm = _log_pair(dist, z, schedule)
    p = float(_expit(np.array([lf - lfm]))[0])
    gaps = np.array([float(r @ r) for r in schedule.residuals(z)])
    return 4.0 * p * (1.0 - p) * gaps


class DistortionEstimate(NamedTuple):
    value: float
    standard_error: float
    method: str


def _cost_matrix(X: np.ndarray, schedule: MirrorSchedule) -> np.ndarray:
    """||S_t x_t - b_t||^2 for each row of X and each time block."""
    N = X.shape[0]
    cost = np.empty((N, schedule.times))
    for t, m in enumerate(schedule.mirrors):
        block = X[:, t * schedule.dim:(t + 1) * schedule.dim]
        resid = block @ m.S.T - m.b
        cost[:, t] = np.sum(resid * resid, axis=1)
    return cost


def average_distortion(dist, schedule: MirrorSchedule, sample_count: int = None,
                       exact: bool = None, rng: np.random.Generator = None
                       ) -> DistortionEstimate:
    """Average eavesdropper distortion D_E for a mirroring schedule.

    Finite-support priors are enumerated exactly by default; continuous
    priors are estimated by Monte Carlo with ``sample_count`` draws and a
    reported standard error.  Both paths evaluate the same integrand,
    (1/T) sum_t E[ 2 f(X~) / (f(X) + f(X~)) * ||S_t X_t - b_t||^2 ].
    """
    if len(schedule) != dist.times:
        raise ConfigurationError(
            f"schedule length {len(schedule)} != prior horizon {dist.times}")
    if exact is None:
        exact = dist.finite_support

    if exact:
        if not dist.finite_support:
            raise ConfigurationError("exact mode needs a finite-support prior")
        total = 0.0
        for x, mass in dist.support():
            if mass == 0.0:
                continue
            fm = dist.density(schedule.mirror_stacked(x))
            weight = 2.0 * fm / (mass + fm)
            if weight == 0.0:
                continue
            cost = _cost_matrix(x[None, :], schedule)[0]
            total += mass * weight * cost.mean()
        return DistortionEstimate(value=total, standard_error=0.0, method="exact")

    if sample_count is None or sample_count < 2:
        raise ConfigurationError("Monte Carlo mode needs sample_count >= 2")
    rng = np.random.default_rng(0) if rng is None else rng
    X = dist.sample_many(rng, sample_count)
    Xm = schedule.mirror_stacked_many(X)
    lf = dist.log_density_many(X)
    lfm = dist.log_density_many(Xm)
    weights = 2.0 * _expit(lfm - lf)
    per_sample = weights * _cost_matrix(X, schedule).mean(axis=1)
    value = float(per_sample.mean())
    se = float(per_sample.std(ddof=1) / np.sqrt(sample_count))
    return DistortionEstimate(value=value, standard_error=se, method="monte-carlo")


def average_distortion_closed_form(per_time_moments, schedule: MirrorSchedule) -> float:
    """Closed-form D_E for priors symmetric under the schedule.

    (1/T) sum_t [ tr(S_t R_t S_t') + ||b_t - S_t mu_t||^2 ].  Meaningful only
    when the prior density is invariant under every mirror (certify with
    symmetry_check); the formula itself is total.
    """
    if len(per_time_moments) != len(schedule):
        raise ConfigurationError("moments and schedule disagree on horizon")
    total = 0.0
    for (mu, R), m in zip(per_time_moments, schedule):
        gap = m.b - m.S @ mu
        total += float(np.trace(m.S @ R @ m.S.T)) + float(gap @ gap)
    return total / len(schedule)


def max_baselines(per_time_moments):
    """No-observation distortion baselines (D_E^max, D_W^max).

    D_E^max averages the prior covariance traces over time; D_W^max takes
    the minimum over time.
    """
    traces = [float(np.trace(R)) for _, R in per_time_moments]
    return sum(traces) / len(traces), min(traces)
