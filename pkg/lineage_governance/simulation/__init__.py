"""Platform-intervention simulation."""

from .intervention import (
    GRID_COLUMNS,
    InterventionDesign,
    InterventionOutcome,
    InterventionPolicy,
    SimulationResult,
    apply_intervention,
    run_intervention_grid,
    simulate,
)

__all__ = [
    "GRID_COLUMNS",
    "InterventionDesign",
    "InterventionOutcome",
    "InterventionPolicy",
    "SimulationResult",
    "apply_intervention",
    "run_intervention_grid",
    "simulate",
]
