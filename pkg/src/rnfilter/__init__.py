"""Nonlocal neighborhood filtering via the decreasing rearrangement.

The multi-dimensional nonlocal filtering dynamics is reduced to a
one-dimensional system over the image's quantized levels, integrated with a
semi-implicit scheme, and mapped back through the (time-invariant) level-set
structure.  Companion modules verify the reduction against a brute-force
per-pixel oracle, study the small-window shock-filter asymptotics, and run a
histogram-based segmentation workflow.
"""

from .asymptotics import (SmoothProfile, expansion_rhs, expansion_terms,
                          integral_I, ktilde, residual_order_study)
from .direct import EquivalenceReport, compare_equivalence, direct_rhs, direct_run_euler
from .dynamics import (SolverConfig, Trajectory, adaptive_tau, auto_tau0,
                       energy, rhs, run, step_semi_implicit)
from .kernels import KernelSpec, evaluate, evaluate_derivative, lipschitz_bound, phi
from .phantoms import CellPhantom, make_cell_phantom
from .rearrange import (QuantizedImage, RearrangedProfile,
                        decreasing_rearrangement, distribution_function,
                        quantize, reconstruct)
from .segmentation import (SegmentationResult, cluster_levels, dice,
                           mask_from_cluster, segment_pipeline)

__version__ = "0.1.0"

__all__ = [
    "CellPhantom", "EquivalenceReport", "KernelSpec", "QuantizedImage",
    "RearrangedProfile", "SegmentationResult", "SmoothProfile", "SolverConfig",
    "Trajectory", "adaptive_tau", "auto_tau0", "cluster_levels",
    "compare_equivalence", "decreasing_rearrangement", "dice", "direct_rhs",
    "direct_run_euler", "distribution_function", "energy", "evaluate",
    "evaluate_derivative", "expansion_rhs", "expansion_terms", "integral_I",
    "ktilde", "lipschitz_bound", "make_cell_phantom", "mask_from_cluster",
    "phi", "quantize", "reconstruct", "residual_order_study", "rhs", "run",
    "segment_pipeline", "step_semi_implicit",
]
