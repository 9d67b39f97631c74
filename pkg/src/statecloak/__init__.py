"""Distortion-based encryption of linear dynamical system states.

Two transmitters share short random keys with a legitimate receiver and
publish codewords that the receiver inverts exactly, while an optimal
Bayesian eavesdropper suffers provably large estimation distortion:

* :mod:`statecloak.mirroring` flips states across affine subspaces with a
  one-bit key per time step (average-case guarantees).
* :mod:`statecloak.worstcase` shifts-and-mirrors scalar states with a
  k-bit key (worst-case guarantees), including the trajectory codec for
  expansive dynamics.
* :mod:`statecloak.harness` evaluates schemes against exact or sampled
  priors and packages the results as deterministic reports.
* :mod:`statecloak.cli` exposes experiments as ``statecloak`` subcommands.
"""

from .distributions import (AnalyticGaussianPrior, EmpiricalGridPrior,
                            RandomWalkPrior, StateDistribution,
                            empirical_from_corpus, gaussian_trajectory_prior,
                            load_corpus, save_corpus, symmetry_check)
from .dynamics import (GaussianSpec, LinearSystem, StackedDynamics,
                       Trajectory, lqr_point_to_point, lqr_solution_map,
                       propagate_gaussian, simulate, stacked_matrices)
from .errors import (ConfigurationError, ExcludedPointError,
                     InfeasibleTargetError, UndefinedPosteriorError,
                     ValidationError)
from .harness import (AttackVerdict, DistortionReport, IdentityScheme,
                      MirroringScheme, NoTransmissionScheme, ScenarioConfig,
                      evaluate_scheme, msb_attack_demo, run_quadrotor,
                      run_random_walk)
from .mirroring import (AffineMirror, DistortionEstimate, KeyBit,
                        MirrorSchedule, average_distortion,
                        average_distortion_closed_form, conditional_distortion,
                        decode_mirror, decode_stacked, encode_mirror,
                        encode_stacked, eve_posterior, max_baselines,
                        mirror_point)
from .worstcase import (EveInfo, GridSpec, KeyWord, PreimageSet,
                        ShiftMirrorCodec, TrajectoryDistortionEstimate,
                        decode_scalar, decode_trajectory, decode_vector,
                        draw_keys, encode_scalar, encode_trajectory,
                        encode_vector, mod_interval, optimize_theta,
                        posterior_variance, preimages, sweep_theta,
                        trajectory_distortion, var_profile,
                        worst_case_distortion)

__version__ = "0.1.0"

__all__ = [
    "AffineMirror",
    "AnalyticGaussianPrior",
    "AttackVerdict",
    "ConfigurationError",
    "DistortionEstimate",
    "DistortionReport",
    "EmpiricalGridPrior",
    "EveInfo",
    "ExcludedPointError",
    "GaussianSpec",
    "GridSpec",
    "IdentityScheme",
    "InfeasibleTargetError",
    "KeyBit",
    "KeyWord",
    "LinearSystem",
    "MirrorSchedule",
    "MirroringScheme",
    "NoTransmissionScheme",
    "PreimageSet",
    "RandomWalkPrior",
    "ScenarioConfig",
    "ShiftMirrorCodec",
    "StackedDynamics",
    "StateDistribution",
    "Trajectory",
    "TrajectoryDistortionEstimate",
    "UndefinedPosteriorError",
    "ValidationError",
    "average_distortion",
    "average_distortion_closed_form",
    "conditional_distortion",
    "decode_mirror",
    "decode_scalar",
    "decode_stacked",
    "decode_trajectory",
    "decode_vector",
    "draw_keys",
    "empirical_from_corpus",
    "encode_mirror",
    "encode_scalar",
    "encode_stacked",
    "encode_trajectory",
    "encode_vector",
    "eve_posterior",
    "evaluate_scheme",
    "gaussian_trajectory_prior",
    "load_corpus",
    "lqr_point_to_point",
    "lqr_solution_map",
    "max_baselines",
    "mirror_point",
    "mod_interval",
    "msb_attack_demo",
    "optimize_theta",
    "posterior_variance",
    "preimages",
    "propagate_gaussian",
    "run_quadrotor",
    "run_random_walk",
    "save_corpus",
    "simulate",
    "stacked_matrices",
    "sweep_theta",
    "symmetry_check",
    "trajectory_distortion",
    "var_profile",
    "worst_case_distortion",
    "__version__",
]
