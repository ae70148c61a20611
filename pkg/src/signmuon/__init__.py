"""Sign-Muon: sign-compressed spectral optimizer, simulated data-parallel
aggregation, an alpha-beta communication model and numerical verifiers."""

from .linalg import norms, polar_newton_schulz, polar_svd, power_iter_spectral
from .optim import BlockOptimizer, Hyperparams, OptimizerState
from .collective import SimulatedCluster, distributed_step
from .harness import NoiseModel, matrix_quadratic, run_experiment

__version__ = "0.1.0"

__all__ = [
    "norms",
    "polar_newton_schulz",
    "polar_svd",
    "power_iter_spectral",
    "BlockOptimizer",
    "Hyperparams",
    "OptimizerState",
    "SimulatedCluster",
    "distributed_step",
    "NoiseModel",
    "matrix_quadratic",
    "run_experiment",
]
