"""Random metric projections and random greedy steps with per-step verification."""

from ._jit import BACKEND, JIT_ENABLED
from .dictionaries import Dictionary, bridge_dictionaries, greedy_step, polar_cone_of_dictionary, select
from .engine import StopRule, Trace, run_greedy, run_projection, segment_functional_check
from .geometry import ConvexSet, distance, is_member, moreau_check, polar, project
from .schedules import Schedule

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "JIT_ENABLED", "ConvexSet", "Dictionary", "Schedule", "StopRule", "Trace",
    "bridge_dictionaries", "distance", "greedy_step", "is_member", "moreau_check", "polar",
    "polar_cone_of_dictionary", "project", "run_greedy", "run_projection",
    "segment_functional_check", "select",
]
