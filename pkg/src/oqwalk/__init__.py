"""Open quantum walks on the half-line and on segments."""

from .channel import BoundaryCondition, NearestNeighborRule, build_channel, monte_carlo_hitting, transition_probability
from .drift import DensityGrid, LyapunovSpec, foster_check, lamperti_check, pakes_check
from .firstvisit import absorption_stats, build_segment
from .linalg import DensityMatrix, conj_rep, unvec, vec
from .measure import km_model
from .paths import count_paths
from .walkspec import load_rule

__version__ = "0.1.0"

__all__ = [
    "BoundaryCondition",
    "DensityGrid",
    "DensityMatrix",
    "LyapunovSpec",
    "NearestNeighborRule",
    "absorption_stats",
    "build_channel",
    "build_segment",
    "conj_rep",
    "count_paths",
    "foster_check",
    "km_model",
    "lamperti_check",
    "load_rule",
    "monte_carlo_hitting",
    "pakes_check",
    "transition_probability",
    "unvec",
    "vec",
]
