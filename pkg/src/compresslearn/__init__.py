"""Density learning by sample compression under clean, noisy and adversarial sampling."""

from .compression import (
    Candidate,
    CandidateList,
    DegenerateSampleError,
    Gaussian1DFamily,
    GaussianIsoFamily,
    MixtureFamily,
    SchemeProfile,
    UniformBoxFamily,
    enumerate_candidates,
)
from .densities import (
    Convolved,
    DensityHandle,
    GaussianNoise,
    IsoGaussian,
    LaplaceNoise,
    Mixture,
    NoiseModel,
    SeededRng,
    UniformBox,
    convolve_noise,
    distance,
)
from .robust import (
    AdversaryBudget,
    AdversaryStrategy,
    CliqueNotFound,
    Fit,
    build_grid,
    corrupt_adversarial,
    find_clique,
    learn_adversarial,
    learn_clean,
    learn_noisy,
)
from .select import ScheffeResult, select_min_distance

__version__ = "0.1.0"
