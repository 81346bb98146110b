"""Aldrich-McKelvey scaling with QR projectors and identification checks."""
from .am_core import (
    EstimatorConfig,
    ScalingReport,
    StimuliSolution,
    accumulate,
    bootstrap_ci,
    projector_naive,
    projector_qr,
    scale,
    solve_stimuli,
)
from .errors import NotIdentified, TooFewStimuli
from .placements import IngestOptions, PlacementMatrix, complete_cases, load_csv

__version__ = "0.1.0"
