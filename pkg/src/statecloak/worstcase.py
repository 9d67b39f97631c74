"""Shift+mirror scalar codec, its window optimizer, and the trajectory codec.

A k-bit key selects one of 2^k actions: values inside the window
[-theta, theta) are cyclically shifted by key-many sub-windows; values
outside are reflected through the origin when the key's leading bit is set.
The legitimate receiver inverts exactly, while every codeword leaves an
eavesdropper a spread of preimages whose posterior variance never drops
below the worst-case distortion D_W.  Vector states are standardized per
coordinate and keyed independently; whole trajectories need only the
initial state encoded because later codewords evolve by the public
dynamics.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import GaussianSpec, LinearSystem
from .errors import ConfigurationError, ExcludedPointError, UndefinedPosteriorError

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def standard_normal_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class ShiftMirrorCodec:
    """Codec parameters: key bit-count k and window half-width theta."""

    k: int
    theta: float

    def __post_init__(self):
        if self.k < 1:
            raise ConfigurationError(f"k must be >= 1, got {self.k}")
        if not self.theta > 0.0:
            raise ConfigurationError(f"theta must be positive, got {self.theta}")

    @property
    def key_count(self) -> int:
        return 2 ** self.k

    @property
    def sub_width(self) -> float:
        return 2.0 * self.theta / self.key_count

    def to_json(self) -> str:
        return json.dumps({"k": self.k, "theta": self.theta})

    @classmethod
    def from_json(cls, text: str) -> "ShiftMirrorCodec":
        doc = json.loads(text)
        return cls(k=int(doc["k"]), theta=float(doc["theta"]))


@dataclass(frozen=True)
class KeyWord:
    """k-bit key, stored as its decimal value, uniform from Eve's view."""

    decimal: int
    k: int

    def __post_init__(self):
        if not 0 <= self.decimal < 2 ** self.k:
            raise ConfigurationError(
                f"key {self.decimal} out of range for {self.k} bits")

    @property
    def bits(self) -> str:
        return format(self.decimal, f"0{self.k}b")

    def __int__(self):
        return self.decimal


def _key_values(keys, codec: ShiftMirrorCodec) -> np.ndarray:
    vals = np.asarray([int(key) for key in np.atleast_1d(keys)], dtype=np.int64)
    if vals.size and (vals.min() < 0 or vals.max() >= codec.key_count):
        raise ConfigurationError(
            f"keys must lie in [0, {codec.key_count}) for k={codec.k}")
    return vals


def mod_interval(r, a: float, b: float):
    """Reduce r into [a, b) by subtracting an integer number of periods."""
    if a >= b:
        raise ConfigurationError(f"need a < b, got [{a}, {b})")
    r = np.asarray(r, dtype=float)
    width = b - a
    out = r - np.floor((r - a) / width) * width
    # guard against floating rounding that lands just outside [a, b)
    out = np.where(out < a, out + width, out)
    out = np.where(out >= b, a, out)
    return float(out) if out.ndim == 0 else out


def encode_scalar(x, key, codec: ShiftMirrorCodec):
    """Apply the shift+mirror map; vectorized over x (and key, if an array)."""
    x = np.asarray(x, dtype=float)
    key = np.asarray([int(k) for k in np.atleast_1d(key)], dtype=np.int64) \
        if not np.isscalar(key) and not isinstance(key, (int, KeyWord)) else \
        np.int64(int(key))
    if np.any(key < 0) or np.any(key >= codec.key_count):
        raise ConfigurationError(f"key out of range for k={codec.k}")
    if np.any(x == codec.theta):
        raise ExcludedPointError(
            f"x = theta = {codec.theta} is the codec's excluded point")
    outside = np.abs(x) > codec.theta
    reflected = np.where(key >= codec.key_count // 2, -x, x)
    shifted = mod_interval(x + key * codec.sub_width, -codec.theta, codec.theta)
    out = np.where(outside, reflected, shifted)
    return float(out) if out.ndim == 0 else out


def decode_scalar(z, key, codec: ShiftMirrorCodec):
    """Exact inverse of encode_scalar for the matching key."""
    z = np.asarray(z, dtype=float)
    key = np.asarray([int(k) for k in np.atleast_1d(key)], dtype=np.int64) \
        if not np.isscalar(key) and not isinstance(key, (int, KeyWord)) else \
        np.int64(int(key))
    if np.any(key < 0) or np.any(key >= codec.key_count):
        raise ConfigurationError(f"key out of range for k={codec.k}")
    # z = +theta can only come from the reflection branch
    outside = (np.abs(z) > codec.theta) | (z == codec.theta)
    reflected = np.where(key >= codec.key_count // 2, -z, z)
    shifted = mod_interval(z - key * codec.sub_width, -codec.theta, codec.theta)
    out = np.where(outside, reflected, shifted)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PreimageSet:
    """Candidate preimages of one codeword with posterior weights."""

    candidates: tuple

    @property
    def points(self) -> np.ndarray:
        return np.array([c[0] for c in self.candidates])

    @property
    def weights(self) -> np.ndarray:
        return np.array([c[1] for c in self.candidates])


def preimages(z: float, codec: ShiftMirrorCodec, prior=standard_normal_pdf
              ) -> PreimageSet:
    """Deduplicated preimages {decode(z, key)} with weights prop. to the prior.

    Keys are uniform and every duplicate value arises with equal key
    multiplicity, so weighting unique candidates by prior density alone is
    the exact posterior.
    """
    all_keys = np.arange(codec.key_count)
    cands = decode_scalar(np.full(codec.key_count, float(z)), all_keys, codec)
    unique = np.unique(cands)
    dens = np.asarray(prior(unique), dtype=float)
    total = dens.sum()
    if total <= 0.0:
        raise UndefinedPosteriorError(
            f"all preimages of z={z} have zero prior density")
    weights = dens / total
    return PreimageSet(candidates=tuple(zip(unique.tolist(), weights.tolist())))


def posterior_variance(z: float, codec: ShiftMirrorCodec,
                       prior=standard_normal_pdf) -> float:
    """Var(X | Z=z): the eavesdropper's MMSE for one codeword."""
    pre = preimages(z, codec, prior)
    pts, w = pre.points, pre.weights
    mean = float(w @ pts)
    return float(w @ (pts * pts) - mean * mean)


def _posterior_variance_many(zs: np.ndarray, codec: ShiftMirrorCodec,
                             prior=standard_normal_pdf) -> np.ndarray:
    """Vectorized Var(X|Z) over a codeword array.

    Duplicate preimages are left as repeated rows; since duplicates occur
    with equal key multiplicity, density weighting over rows equals the
    deduplicated posterior.
    """
    zs = np.asarray(zs, dtype=float)
    cands = np.empty((codec.key_count, zs.size))
    for key in range(codec.key_count):
        cands[key] = decode_scalar(zs, np.int64(key), codec)
    dens = np.asarray(prior(cands), dtype=float)
    total = dens.sum(axis=0)
    bad = total <= 0.0
    total = np.where(bad, 1.0, total)
    w = dens / total
    mean = np.sum(w * cands, axis=0)
    var = np.sum(w * cands * cands, axis=0) - mean * mean
    var[bad] = np.nan
    return var


def var_profile(zs, codec: ShiftMirrorCodec, prior=standard_normal_pdf) -> np.ndarray:
    """Var(X|Z) evaluated on an array of codewords."""
    return _posterior_variance_many(np.asarray(zs, dtype=float), codec, prior)


@dataclass(frozen=True)
class GridSpec:
    """Codeword search grid: [-zmax, zmax] with the given step, then local
    refinement of the minimizer down to refine_tol in z."""

    zmax: float = 6.0
    step: float = 1e-3
    refine_tol: float = 1e-6

    def __post_init__(self):
        if self.zmax < 6.0:
            raise ConfigurationError("grid must cover at least 6 standard deviations")
        if self.step > 1e-3:
            raise ConfigurationError("grid step must be at most 1e-3")

    def points(self) -> np.ndarray:
        return np.arange(-self.zmax, self.zmax + self.step / 2.0, self.step)


def _golden_section_min(f, lo: float, hi: float, tol: float):
    """Golden-section minimization; returns the best (x, f(x)) evaluated."""
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    best_x, best_f = (x1, f1) if f1 <= f2 else (x2, f2)
    while hi - lo > tol:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = f(x2)
        if f1 < best_f:
            best_x, best_f = x1, f1
        if f2 < best_f:
            best_x, best_f = x2, f2
    return best_x, best_f


def worst_case_distortion(codec: ShiftMirrorCodec, prior=standard_normal_pdf,
                          grid: GridSpec = GridSpec()) -> float:
    """D_W = min over codewords of Var(X|Z).

    Dense grid scan over [-zmax, zmax] followed by golden-section refinement
    around the coarse minimizer (the variance profile has narrow dips that a
    coarse grid alone overestimates).
    """
    zs = grid.points()
    vars_ = _posterior_variance_many(zs, codec, prior)
    idx = int(np.nanargmin(vars_))
    best = float(vars_[idx])
    lo = zs[max(idx - 1, 0)]
    hi = zs[min(idx + 1, zs.size - 1)]
    _, refined = _golden_section_min(
        lambda z: posterior_variance(z, codec, prior), lo, hi, grid.refine_tol)
    return min(best, refined)


def sweep_theta(k: int, thetas, prior=standard_normal_pdf,
                grid: GridSpec = GridSpec()) -> np.ndarray:
    """D_W as a function of theta for fixed k."""
    return np.array([
        worst_case_distortion(ShiftMirrorCodec(k=k, theta=float(th)), prior, grid)
        for th in np.asarray(thetas, dtype=float)
    ])


def optimize_theta(k: int, prior=standard_normal_pdf, grid: GridSpec = GridSpec(),
                   theta_max: float = 10.0, tol: float = 1e-3):
    """Best window half-width for k key bits: argmax_theta D_W(k, theta).

    Coarse scan over (0, theta_max] localizes the global maximum, then
    golden-section search tightens it to the requested tolerance.
    """
    if not 1 <= k <= 8:
        raise ConfigurationError(f"k must be in [1, 8], got {k}")

    def dw(theta: float) -> float:
        return worst_case_distortion(ShiftMirrorCodec(k=k, theta=theta), prior, grid)

    coarse = np.arange(0.25, theta_max + 1e-9, 0.25)
    values = np.array([dw(th) for th in coarse])
    center = int(np.argmax(values))
    lo = coarse[center] - 0.25 if center > 0 else 0.05
    hi = min(coarse[center] + 0.25, theta_max)
    theta_star, neg = _golden_section_min(lambda th: -dw(th), lo, hi, tol)
    if -neg >= values[center]:
        return float(theta_star), float(-neg)
    return float(coarse[center]), float(values[center])


def _check_diagonal(gaussian: GaussianSpec) -> np.ndarray:
    off = gaussian.cov - np.diag(np.diag(gaussian.cov))
    if np.abs(off).max() > 1e-12 * max(1.0, np.abs(gaussian.cov).max()):
        raise ConfigurationError("codec needs a diagonal covariance")
    diag = np.diag(gaussian.cov)
    if diag.min() <= 0.0:
        raise ConfigurationError("covariance diagonal must be strictly positive")
    return np.sqrt(diag)


def encode_vector(x, keys, gaussian: GaussianSpec, codec: ShiftMirrorCodec
                  ) -> np.ndarray:
    """Standardize each coordinate and encode it under its own key word.

    The transmitted codeword is the vector of standardized scalar codewords;
    the moments are public, so the receiver destandardizes after decoding.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    sigma = _check_diagonal(gaussian)
    keys = _key_values(keys, codec)
    if x.shape[0] != gaussian.dim or keys.shape[0] != gaussian.dim:
        raise ConfigurationError("x, keys and the Gaussian must share one dimension")
    v = (x - gaussian.mean) / sigma
    return encode_scalar(v, keys, codec)


def decode_vector(z, keys, gaussian: GaussianSpec, codec: ShiftMirrorCodec
                  ) -> np.ndarray:
    """Invert encode_vector and destandardize back to state units."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    sigma = _check_diagonal(gaussian)
    keys = _key_values(keys, codec)
    v = decode_scalar(z, keys, codec)
    return gaussian.mean + sigma * v


def draw_keys(rng: np.random.Generator, n: int, codec: ShiftMirrorCodec) -> np.ndarray:
    """Sample n independent uniform key words (reproducible stand-in for
    external key material)."""
    return rng.integers(0, codec.key_count, size=n)


def _check_identity_observation(system: LinearSystem) -> None:
    if system.C.shape != (system.n, system.n) or \
            np.abs(system.C - np.eye(system.n)).max() > 1e-12:
        raise ConfigurationError("trajectory codec requires C = I")
    if np.abs(system.obs_noise_cov).max() > 0.0:
        raise ConfigurationError("trajectory codec requires noise-free observation")


def encode_trajectory(system: LinearSystem, states, keys,
                      init_prior: GaussianSpec, codec: ShiftMirrorCodec
                      ) -> np.ndarray:
    """Codeword sequence: encode X_1, then evolve by the public dynamics.

    Z_1 is the destandardized initial codeword (state units, so all-zero
    keys transmit the state unchanged) and
    Z_{t+1} = A Z_t + (X_{t+1} - A X_t) replays each true increment.
    """
    _check_identity_observation(system)
    states = np.atleast_2d(np.asarray(states, dtype=float))
    sigma = _check_diagonal(init_prior)
    z1_std = encode_vector(states[0], keys, init_prior, codec)
    Z = np.empty_like(states)
    Z[0] = init_prior.mean + sigma * z1_std
    for t in range(states.shape[0] - 1):
        Z[t + 1] = system.A @ Z[t] + states[t + 1] - system.A @ states[t]
    return Z


def decode_trajectory(z, keys, system: LinearSystem, init_prior: GaussianSpec,
                      codec: ShiftMirrorCodec) -> np.ndarray:
    """Recover X_1..X_T exactly from the codeword sequence and the keys."""
    _check_identity_observation(system)
    Z = np.atleast_2d(np.asarray(z, dtype=float))
    sigma = _check_diagonal(init_prior)
    v = (Z[0] - init_prior.mean) / sigma
    X = np.empty_like(Z)
    X[0] = decode_vector(v, keys, init_prior, codec)
    for t in range(Z.shape[0] - 1):
        X[t + 1] = Z[t + 1] - system.A @ Z[t] + system.A @ X[t]
    return X


@dataclass(frozen=True)
class EveInfo:
    """What the codeword stream reveals: Z_1 plus the input increments."""

    z1: np.ndarray
    increments: np.ndarray

    @classmethod
    def from_codewords(cls, system: LinearSystem, z) -> "EveInfo":
        Z = np.atleast_2d(np.asarray(z, dtype=float))
        increments = Z[1:] - Z[:-1] @ system.A.T
        return cls(z1=Z[0].copy(), increments=increments)


@dataclass(frozen=True)
class TrajectoryDistortionEstimate:
    """Per-time eavesdropper distortion D(t, E_info) statistics."""

    mean: np.ndarray
    standard_error: np.ndarray
    minimum: float
    min_time: int
    sigma_min_warning: bool


def trajectory_distortion(system: LinearSystem, init_prior: GaussianSpec,
                          codec: ShiftMirrorCodec, input_model=None, T: int = 10,
                          sample_count: int = 2000,
                          rng: np.random.Generator = None
                          ) -> TrajectoryDistortionEstimate:
    """Estimate D(t, E_info) = tr Cov(X_t | E_info) for t = 1..T.

    Conditioned on Eve's information the only uncertainty is which initial
    preimage is true: the increments are a deterministic function of her
    observations and independent of X_1, so they neither reweight the
    posterior nor add spread.  Cov(X_t | E_info) is therefore the initial
    per-coordinate posterior covariance pushed through A^{t-1}, computed
    exactly per coordinate; Monte Carlo averages over X_1 and keys.  When
    ``input_model(rng, T)`` is given, each sample also runs the full
    encode/decode round trip on a simulated trajectory as a self-check.
    """
    _check_identity_observation(system)
    rng = np.random.default_rng(0) if rng is None else rng
    sigma = _check_diagonal(init_prior)
    n = system.n
    sv = np.linalg.svd(system.A, compute_uv=False)
    warn = bool(sv.min() < 1.0 - 1e-12)
    if warn:
        warnings.warn("sigma_min(A) < 1: per-time distortion need not be "
                      "monotone", RuntimeWarning, stacklevel=2)

    # squared column norms of A^(t-1), the push-forward factors per coordinate
    norms2 = np.empty((T, n))
    P = np.eye(n)
    for t in range(T):
        norms2[t] = np.sum(P * P, axis=0)
        P = system.A @ P

    v = rng.standard_normal((sample_count, n))
    keys = rng.integers(0, codec.key_count, size=(sample_count, n))
    z = encode_scalar(v.reshape(-1), keys.reshape(-1), codec)
    var_v = _posterior_variance_many(z, codec).reshape(sample_count, n)
    d_coord = var_v * (sigma * sigma)          # tr contribution per coordinate
    D = d_coord @ norms2.T                     # (samples, T)

    if input_model is not None:
        from .dynamics import simulate
        checks = min(sample_count, 25)
        for i in range(checks):
            x1 = init_prior.mean + sigma * v[i]
            traj = simulate(system, x1, np.asarray(input_model(rng, T), dtype=float))
            Z = encode_trajectory(system, traj.states, keys[i], init_prior, codec)
            back = decode_trajectory(Z, keys[i], system, init_prior, codec)
            if np.abs(back - traj.states).max() > 1e-8:
                raise ConfigurationError("trajectory codec round trip failed")

    mean = D.mean(axis=0)
    se = D.std(axis=0, ddof=1) / np.sqrt(sample_count)
    t_min = int(np.argmin(mean))
    return TrajectoryDistortionEstimate(
        mean=mean, standard_error=se, minimum=float(mean[t_min]),
        min_time=t_min + 1, sigma_min_warning=warn)
