"""Certified key-rate bounds for high-dimensional time-bin entanglement.

The pipeline runs click tables through element extraction, interval
completion, witness expectations, a dual bound on the guessing probability
and finally a Devetak-Winter rate.
"""
from hdqkd.kernels import BACKEND
from hdqkd.states import DensityMatrix, IsotropicState, NoiseModelSpec, SubspacePartition, isotropic, max_entangled
from hdqkd.clicks import ClickTables, extract_elements, simulate_clicks
from hdqkd.completion import PartialRealSymmetric, complete
from hdqkd.witnesses import kh1_preset, kh2_preset, khexp_preset, witness_pair
from hdqkd.dual import DualPoint, GuessBound, SolverOptions, minimize, verify_certificate
from hdqkd.keyrate import RateReport, full_pipeline, positive_rate_threshold, sweep

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ClickTables",
    "DensityMatrix",
    "DualPoint",
    "GuessBound",
    "IsotropicState",
    "NoiseModelSpec",
    "PartialRealSymmetric",
    "RateReport",
    "SolverOptions",
    "SubspacePartition",
    "complete",
    "extract_elements",
    "full_pipeline",
    "isotropic",
    "kh1_preset",
    "kh2_preset",
    "khexp_preset",
    "max_entangled",
    "minimize",
    "positive_rate_threshold",
    "simulate_clicks",
    "sweep",
    "verify_certificate",
    "witness_pair",
]
