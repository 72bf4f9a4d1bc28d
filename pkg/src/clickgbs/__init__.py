"""Click-pattern statistics of Gaussian boson sampling with realistic detectors."""

from .detectors import APD, PNR, SNSPD, Click, OnOff, detector_from_spec
from .gaussian import (
    GaussianState,
    Interferometer,
    KernelMatrix,
    assemble_and_propagate,
    haar_random_unitary,
    kernel,
    make_squashed,
    make_thermal,
    make_thermalized_squeezed,
    solve_squeezing,
    vacuum,
)
from .orbits import OrbitId, OrbitTable, characteristic_function, estimate_orbit_direct, inverse_dft
from .probability import brute_force_probability, ideal_distribution, pattern_probability

__version__ = "0.1.0"

__all__ = [
    "APD",
    "PNR",
    "SNSPD",
    "Click",
    "OnOff",
    "detector_from_spec",
    "GaussianState",
    "Interferometer",
    "KernelMatrix",
    "assemble_and_propagate",
    "haar_random_unitary",
    "kernel",
    "make_squashed",
    "make_thermal",
    "make_thermalized_squeezed",
    "solve_squeezing",
    "vacuum",
    "OrbitId",
    "OrbitTable",
    "characteristic_function",
    "estimate_orbit_direct",
    "inverse_dft",
    "brute_force_probability",
    "ideal_distribution",
    "pattern_probability",
]
