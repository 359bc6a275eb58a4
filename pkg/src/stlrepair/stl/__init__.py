from .ast import (
    ALWAYS, AND, BOOLEAN, EVENTUALLY, IMPLIES, NOT, OR, PRED, TEMPORAL, UNTIL,
    Interval, LinearPredicate, Node,
    always, apply_interval_repair, apply_predicate_repair, bound, conj, disj,
    eventually, implies, literal_orientation, neg, pred, until,
)
from .parser import ParseError, parse
from .rewrite import TemporalTransform, normalize, transform_temporal
from .semantics import Trace, robustness, satisfies, support, window_steps
