"""Dynamic replanning with a goal-rooted fast-marching tree over a fixed sample set."""

from fmtree.spaces import (
    ConfigurationError,
    SpaceParams,
    StateSpace,
    Trajectory,
    interpolate,
    make_space,
)

__all__ = [
    "ConfigurationError",
    "SpaceParams",
    "StateSpace",
    "Trajectory",
    "interpolate",
    "make_space",
]
