"""formctl: distance-based formation control with designed steady motions.

Rigidity analysis of formation graphs, gradient shape controllers, motion
parameter design for steady translation and rotation, heading-controlled
translation, target enclosing with distributed velocity estimators, and a
deterministic fixed-step simulator behind a small CLI.
"""

from ._kernels import BACKEND
from .graphs import FormationGraph, GraphError, incidence_matrix, kron_lift
from .gradient import SingularityError, distance_errors, gradient_flow_rhs, potential
from .maneuver import (
    ConfigurationError,
    EscapeMonitor,
    EstimatorState,
    HeadingTarget,
    enclosing_control_rhs,
    heading_control_rhs,
)
from .motion import (
    DesignError,
    MotionParams,
    design_rotation,
    design_translation,
    rotation_space,
    steady_state_velocity,
    translation_space,
)
from .rigidity import (
    DesiredShape,
    Framework,
    ShapeError,
    classify_rigidity,
    rigidity_matrix,
    shape_library,
)
from .scenario import PRESETS, SchemaError, build_simulation, load_scenario, preset
from .sim import Controller, Event, Simulation, TrajectoryLog, UnicycleModel

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConfigurationError",
    "Controller",
    "DesignError",
    "DesiredShape",
    "EscapeMonitor",
    "EstimatorState",
    "Event",
    "FormationGraph",
    "Framework",
    "GraphError",
    "HeadingTarget",
    "MotionParams",
    "PRESETS",
    "SchemaError",
    "ShapeError",
    "Simulation",
    "SingularityError",
    "TrajectoryLog",
    "UnicycleModel",
    "build_simulation",
    "classify_rigidity",
    "design_rotation",
    "design_translation",
    "distance_errors",
    "enclosing_control_rhs",
    "gradient_flow_rhs",
    "heading_control_rhs",
    "incidence_matrix",
    "kron_lift",
    "load_scenario",
    "potential",
    "preset",
    "rigidity_matrix",
    "rotation_space",
    "shape_library",
    "steady_state_velocity",
    "translation_space",
]
