"""Direct semantic modeling of 1-D dynamical systems.

Train a model that maps an initial condition to a semantic representation
of its trajectory (shape composition + quantitative properties), render
trajectories from that representation with shape-conforming splines and
analytic tails, and edit the representation directly before refitting.
"""

from .cubic import Cubic, CubicSpline, PiecewiseLinear, integral_between, integrate_twice
from .errors import (
    AmbiguityError,
    ConvergenceError,
    DegenerateInputError,
    DomainError,
    NumericError,
    SemodeError,
    StructuralError,
)
from .extract import ExtractedShape, extract_semantics, extract_shape
from .semantics import (
    BOUNDED_MOTIFS,
    MOTIFS,
    UNBOUNDED_MOTIFS,
    Composition,
    Motif,
    PropertySet,
    SemanticRep,
    ValidityReport,
    derivative_range,
    enumerate_compositions,
    successors,
    validate_semantics,
)
from .tails import Tail, measure_tail_props, predict_tail
from .traj_c0 import BoundedTrajectory, predict_c0
from .traj_c2 import C2FitProblem, predict_c2
from .trajectory import PredictedTrajectory, assemble_c0, assemble_c2

__version__ = "0.1.0"
