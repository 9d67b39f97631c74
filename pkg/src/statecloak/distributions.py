"""Priors over state trajectories from the eavesdropper's viewpoint.

A trajectory prior lives on stacked vectors: ``times`` consecutive blocks of
``dim`` coordinates each.  Three kinds are provided: analytic Gaussians
(possibly rank-deficient), an exact discrete Markov random walk, and binned
empirical distributions built from simulated corpora.  All are immutable
after construction; sampling takes an explicit generator.
"""

from __future__ import annotations

import json
from fractions import Fraction

import numpy as np

from .dynamics import GaussianSpec, StackedDynamics, Trajectory, propagate_gaussian
from .errors import ConfigurationError

_EPS_FLOOR = 1e-300
_RANK_REL_TOL = 1e-12
_SUPPORT_DIST_TOL = 1e-8


class StateDistribution:
    """Joint prior over a stacked trajectory.

    Subclasses set ``kind``, ``times``, ``dim`` and ``finite_support`` and
    implement ``log_density_many``, ``sample_many`` and ``per_time_moments``.
    Finite-support kinds additionally implement ``support()`` yielding
    (stacked point, mass) pairs.
    """

    kind = "abstract"
    finite_support = False

    def __init__(self, times: int, dim: int):
        self.times = int(times)
        self.dim = int(dim)

    @property
    def total_dim(self) -> int:
        return self.times * self.dim

    def blocks(self, x: np.ndarray) -> np.ndarray:
        """View a stacked vector as a (times, dim) array."""
        return np.asarray(x, dtype=float).reshape(self.times, self.dim)

    def log_density_many(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def log_density(self, x) -> float:
        return float(self.log_density_many(np.asarray(x, dtype=float)[None, :])[0])

    def density_many(self, X: np.ndarray) -> np.ndarray:
        return np.exp(self.log_density_many(X))

    def density(self, x) -> float:
        return float(np.exp(self.log_density(x)))

    def sample_many(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.sample_many(rng, 1)[0]

    def per_time_moments(self):
        """List of (mean, cov) for each time block."""
        raise NotImplementedError

    def support(self):
        raise ConfigurationError(f"{self.kind} prior has no finite support")


class AnalyticGaussianPrior(StateDistribution):
    """Gaussian trajectory prior with pseudo-determinant density.

    Rank-deficient covariances are routine here (noise-free dynamics push a
    low-dimensional input distribution through tall matrices), so the density
    is evaluated on the affine support of the covariance and points farther
    than 1e-8 from that support get density zero.
    """

    kind = "analytic-gaussian"

    def __init__(self, spec: GaussianSpec, times: int, dim: int):
        if spec.dim != times * dim:
            raise ConfigurationError(
                f"moment dimension {spec.dim} != times*dim = {times * dim}")
        super().__init__(times, dim)
        self.spec = spec
        eigvals, eigvecs = np.linalg.eigh(spec.cov)
        cut = max(eigvals.max(), 0.0) * _RANK_REL_TOL
        keep = eigvals > cut
        self._eigvals = eigvals[keep]
        self._basis = eigvecs[:, keep]
        self._rank = int(keep.sum())
        if self._rank:
            self._log_norm = -0.5 * (self._rank * np.log(2.0 * np.pi)
                                     + np.log(self._eigvals).sum())
        else:
            self._log_norm = 0.0

    def log_density_many(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        resid = X - self.spec.mean
        coords = resid @ self._basis
        off = resid - coords @ self._basis.T
        out = np.full(len(X), -np.inf)
        on_support = np.linalg.norm(off, axis=1) <= _SUPPORT_DIST_TOL
        if self._rank:
            quad = np.sum(coords * coords / self._eigvals, axis=1)
            out[on_support] = self._log_norm - 0.5 * quad[on_support]
        else:
            out[on_support] = 0.0
        return out

    def sample_many(self, rng: np.random.Generator, size: int) -> np.ndarray:
        xi = rng.standard_normal((size, self._rank))
        return self.spec.mean + xi @ (self._basis * np.sqrt(self._eigvals)).T

    def per_time_moments(self):
        out = []
        for t in range(self.times):
            idx = slice(t * self.dim, (t + 1) * self.dim)
            out.append((self.spec.mean[idx], self.spec.cov[idx, idx]))
        return out


def gaussian_trajectory_prior(stacked: StackedDynamics, input_prior: GaussianSpec,
                              x1_spec) -> AnalyticGaussianPrior:
    """Gaussian prior over a stacked trajectory of the noise-free system.

    With a fixed ``x1_spec`` vector the prior covers X_2..X_T (the start is
    public knowledge, moments straight from propagate_gaussian).  With a
    GaussianSpec it covers the full X_1..X_T including the cross terms
    Cov(X_1, X_2^T) = Sigma_1 Q_hat'.
    """
    n = stacked.n
    T = stacked.horizon
    if isinstance(x1_spec, GaussianSpec):
        if x1_spec.dim != n:
            raise ConfigurationError(f"x1 prior must have dimension {n}")
        mu1, S1 = x1_spec.mean, x1_spec.cov
        tail_mean = stacked.Q @ input_prior.mean + stacked.Q_hat @ mu1
        tail_cov = stacked.Q @ input_prior.cov @ stacked.Q.T \
            + stacked.Q_hat @ S1 @ stacked.Q_hat.T
        cross = S1 @ stacked.Q_hat.T
        d = n * T
        mean = np.concatenate([mu1, tail_mean])
        cov = np.empty((d, d))
        cov[:n, :n] = S1
        cov[:n, n:] = cross
        cov[n:, :n] = cross.T
        cov[n:, n:] = tail_cov
        spec = GaussianSpec(mean=mean, cov=(cov + cov.T) / 2.0)
        return AnalyticGaussianPrior(spec, times=T, dim=n)
    spec = propagate_gaussian(stacked, input_prior, np.asarray(x1_spec, dtype=float))
    return AnalyticGaussianPrior(spec, times=T - 1, dim=n)


class RandomWalkPrior(StateDistribution):
    """Integer random walk on [-a, a]: uniform start, uniform moves.

    X_1 is uniform on the 2a+1 integers; each step moves to a uniformly
    chosen element of {x-1, x, x+1} intersected with the interval.  All
    masses are exact rationals.
    """

    kind = "discrete-markov"
    finite_support = True

    def __init__(self, a: int, T: int, max_support: int = 2_000_000):
        if a < 1 or T < 1:
            raise ConfigurationError(f"need a >= 1 and T >= 1, got a={a}, T={T}")
        bound = (2 * a + 1) * 3 ** (T - 1)
        if bound > max_support:
            raise ConfigurationError(
                f"support bound {bound} exceeds enumeration budget {max_support}")
        super().__init__(times=T, dim=1)
        self.a = int(a)
        self._states = list(range(-a, a + 1))
        self._init_mass = Fraction(1, 2 * a + 1)
        self._neighbors = {
            s: [v for v in (s - 1, s, s + 1) if -a <= v <= a] for s in self._states
        }
        self._support = None

    def _step_mass(self, prev: int, cur: int) -> Fraction:
        nbrs = self._neighbors[prev]
        return Fraction(1, len(nbrs)) if cur in nbrs else Fraction(0)

    def exact_mass(self, path) -> Fraction:
        """Exact rational mass of an integer path X_1..X_T."""
        path = [int(v) for v in path]
        if len(path) != self.times or any(abs(v) > self.a for v in path):
            return Fraction(0)
        mass = self._init_mass
        for prev, cur in zip(path, path[1:]):
            mass *= self._step_mass(prev, cur)
            if mass == 0:
                break
        return mass

    def exact_support(self):
        """All (path tuple, Fraction mass) pairs, cached after first use."""
        if self._support is None:
            paths = [((s,), self._init_mass) for s in self._states]
            for _ in range(self.times - 1):
                grown = []
                for path, mass in paths:
                    nbrs = self._neighbors[path[-1]]
                    step = Fraction(1, len(nbrs))
                    grown.extend((path + (v,), mass * step) for v in nbrs)
                paths = grown
            self._support = paths
        return self._support

    def support(self):
        for path, mass in self.exact_support():
            yield np.asarray(path, dtype=float), float(mass)

    def log_density_many(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.full(len(X), -np.inf)
        for i, row in enumerate(X):
            rounded = np.rint(row)
            if np.abs(row - rounded).max() > 1e-9:
                continue
            mass = self.exact_mass(rounded.astype(int))
            if mass > 0:
                out[i] = np.log(float(mass))
        return out

    def density(self, x) -> float:
        rounded = np.rint(np.asarray(x, dtype=float))
        if np.abs(np.asarray(x, dtype=float) - rounded).max() > 1e-9:
            return 0.0
        return float(self.exact_mass(rounded.astype(int)))

    def sample_many(self, rng: np.random.Generator, size: int) -> np.ndarray:
        out = np.empty((size, self.times))
        for i in range(size):
            x = int(rng.integers(-self.a, self.a + 1))
            out[i, 0] = x
            for t in range(1, self.times):
                x = int(rng.choice(self._neighbors[x]))
                out[i, t] = x
        return out

    def per_time_marginals(self):
        """Exact rational marginal mass tables, one dict per time step."""
        table = {s: self._init_mass for s in self._states}
        tables = [table]
        for _ in range(self.times - 1):
            nxt = {}
            for s, mass in tables[-1].items():
                nbrs = self._neighbors[s]
                step = Fraction(1, len(nbrs))
                for v in nbrs:
                    nxt[v] = nxt.get(v, Fraction(0)) + mass * step
            tables.append(nxt)
        return tables

    def per_time_moments(self):
        out = []
        for table in self.per_time_marginals():
            mean = sum(Fraction(s) * m for s, m in table.items())
            second = sum(Fraction(s * s) * m for s, m in table.items())
            var = second - mean * mean
            out.append((np.array([float(mean)]), np.array([[float(var)]])))
        return out


class EmpiricalGridPrior(StateDistribution):
    """Binned empirical trajectory distribution from a simulated corpus.

    The joint mass is keyed by the full bin-index sequence (the trajectory
    fingerprint); per-time tables are kept for moments.  Unseen sequences get
    plug-in mass zero, no smoothing.  Density evaluation snaps the queried
    point to its bin, so any point inside a visited cell gets that cell's
    mass.
    """

    kind = "empirical-grid"
    finite_support = True

    def __init__(self, bin_width: float, origin: np.ndarray, times: int, dim: int,
                 joint_counts: dict, per_time_counts: list, total: int):
        super().__init__(times, dim)
        self.bin_width = float(bin_width)
        self.origin = np.asarray(origin, dtype=float)
        self.joint_counts = joint_counts
        self.per_time_counts = per_time_counts
        self.total = int(total)

    def bin_indices(self, x) -> np.ndarray:
        """Componentwise floor((x - origin) / bin_width) on a (times, dim) view."""
        pts = self.blocks(x)
        return np.floor((pts - self.origin) / self.bin_width).astype(np.int64)

    def bin_centers(self, indices: np.ndarray) -> np.ndarray:
        return self.origin + (np.asarray(indices, dtype=float) + 0.5) * self.bin_width

    def _fingerprint(self, x) -> tuple:
        return tuple(self.bin_indices(x).reshape(-1).tolist())

    def mass(self, x) -> float:
        return self.joint_counts.get(self._fingerprint(x), 0) / self.total

    def density(self, x) -> float:
        return self.mass(x)

    def log_density_many(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.full(len(X), -np.inf)
        for i, row in enumerate(X):
            m = self.mass(row)
            if m > 0.0:
                out[i] = np.log(m)
        return out

    def support(self):
        scale = float(self.bin_width)
        for fingerprint, count in self.joint_counts.items():
            idx = np.asarray(fingerprint, dtype=float).reshape(self.times, self.dim)
            centers = self.origin + (idx + 0.5) * scale
            yield centers.reshape(-1), count / self.total

    def sample_many(self, rng: np.random.Generator, size: int) -> np.ndarray:
        keys = list(self.joint_counts.keys())
        weights = np.array([self.joint_counts[k] for k in keys], dtype=float)
        weights /= weights.sum()
        picks = rng.choice(len(keys), size=size, p=weights)
        out = np.empty((size, self.total_dim))
        for i, pick in enumerate(picks):
            idx = np.asarray(keys[pick], dtype=float).reshape(self.times, self.dim)
            out[i] = (self.origin + (idx + 0.5) * self.bin_width).reshape(-1)
        return out

    def per_time_moments(self):
        out = []
        for table in self.per_time_counts:
            centers = np.array([self.bin_centers(np.asarray(k)) for k in table])
            weights = np.array([table[k] for k in table], dtype=float) / self.total
            mean = weights @ centers
            resid = centers - mean
            cov = (resid * weights[:, None]).T @ resid
            out.append((mean, (cov + cov.T) / 2.0))
        return out

    def export_csv(self, path) -> None:
        """Write the per-time bin tables as CSV rows (t, i_1..i_dim, count)."""
        cols = ",".join(f"i_{j + 1}" for j in range(self.dim))
        lines = [f"t,{cols},count"]
        for t, table in enumerate(self.per_time_counts):
            for key in sorted(table):
                idx = ",".join(str(v) for v in key)
                lines.append(f"{t + 1},{idx},{table[key]}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def empirical_from_corpus(trajectories, bin_width: float, projection=None,
                          origin=None) -> EmpiricalGridPrior:
    """Bin a trajectory corpus into an EmpiricalGridPrior.

    ``projection`` selects the transmitted coordinates (defaults to all);
    ``origin`` shifts the grid (defaults to zero).
    """
    if not len(trajectories):
        raise ConfigurationError("empty corpus")
    if bin_width <= 0:
        raise ConfigurationError(f"bin_width must be positive, got {bin_width}")

    first = trajectories[0]
    states0 = first.states if isinstance(first, Trajectory) else np.asarray(first)
    times = states0.shape[0]
    projection = list(range(states0.shape[1])) if projection is None else list(projection)
    dim = len(projection)
    origin = np.zeros(dim) if origin is None else np.asarray(origin, dtype=float)

    joint_counts: dict = {}
    per_time_counts: list = [dict() for _ in range(times)]
    for traj in trajectories:
        states = traj.states if isinstance(traj, Trajectory) else np.asarray(traj)
        if states.shape[0] != times:
            raise ConfigurationError("corpus trajectories must share one horizon")
        pts = states[:, projection]
        bins = np.floor((pts - origin) / bin_width).astype(np.int64)
        fingerprint = tuple(bins.reshape(-1).tolist())
        joint_counts[fingerprint] = joint_counts.get(fingerprint, 0) + 1
        for t in range(times):
            key = tuple(bins[t].tolist())
            table = per_time_counts[t]
            table[key] = table.get(key, 0) + 1
    return EmpiricalGridPrior(bin_width=bin_width, origin=origin, times=times,
                              dim=dim, joint_counts=joint_counts,
                              per_time_counts=per_time_counts,
                              total=len(trajectories))


def symmetry_check(dist: StateDistribution, mirrors, sample_count: int = 1000,
                   rng: np.random.Generator = None) -> float:
    """Max relative density discrepancy between sampled points and their mirrors.

    Values near zero certify empirically that the prior is invariant under
    the schedule, the condition under which one-bit mirroring attains the
    no-observation distortion.  Finite supports are enumerated exactly;
    continuous priors are sampled.
    """
    if dist.finite_support:
        points = np.array([x for x, _ in dist.support()])
    else:
        rng = np.random.default_rng(0) if rng is None else rng
        points = dist.sample_many(rng, sample_count)
    worst = 0.0
    for x in points:
        fx = dist.density(x)
        fm = dist.density(mirrors.mirror_stacked(x))
        disc = abs(fx - fm) / max(fx, fm, _EPS_FLOOR)
        worst = max(worst, disc)
    return worst


def save_corpus(path, trajectories) -> None:
    """One trajectory per line: {"states": [[...]], "inputs": [[...]]}."""
    with open(path, "w") as fh:
        for traj in trajectories:
            fh.write(json.dumps({"states": traj.states.tolist(),
                                 "inputs": traj.inputs.tolist()}) + "\n")


def load_corpus(path):
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            out.append(Trajectory(states=np.asarray(doc["states"], dtype=float),
                                  inputs=np.asarray(doc["inputs"], dtype=float)))
    return out
