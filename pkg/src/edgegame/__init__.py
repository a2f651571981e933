"""edgegame: an instrumented simulator for the online edge-coloring game.

Builder adds edges online (degree-capped, null edges allowed), Colorer
assigns colors from a fixed palette.  The package implements first-fit,
random greedy, and the phase/palette variant of random greedy, plus the
martingale instrumentation, bad-event detectors, error-recurrence analysis,
and exact small-instance oracles needed to study them empirically.
"""

from .colorset import ColorSet
from .errors import (
    BuilderProtocolError,
    ConfigurationError,
    DegeneratePaletteError,
    EdgeGameError,
    OracleCapError,
    TrackingError,
)
from .game import (
    ColorerKind,
    EdgeEvent,
    GameConfig,
    GameState,
    StateView,
    StepOutcome,
    Transcript,
    free_intersection,
    new_game,
    run_game,
    step,
)
from .instrument import MartingaleTrace, TrackedSetFamily, run_traced_game
from .phase import PhaseCounter, PhaseKind, is_balanced, phi

__version__ = "0.1.0"

__all__ = [
    "BuilderProtocolError",
    "ColorSet",
    "ColorerKind",
    "ConfigurationError",
    "DegeneratePaletteError",
    "EdgeEvent",
    "EdgeGameError",
    "GameConfig",
    "GameState",
    "MartingaleTrace",
    "OracleCapError",
    "PhaseCounter",
    "PhaseKind",
    "StateView",
    "StepOutcome",
    "TrackedSetFamily",
    "TrackingError",
    "Transcript",
    "free_intersection",
    "is_balanced",
    "new_game",
    "phi",
    "run_game",
    "run_traced_game",
    "step",
]
