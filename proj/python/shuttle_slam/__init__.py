"""2D LIDAR SLAM, occupancy pyramids, LM scan matching and closed-loop path following."""

from ._core import (
    FrameError,
    ParseError,
    PathSpline,
    SlamSession,
    World,
    cli,
    command_filter,
    default_path,
    fit_path,
    interpolate,
    lateral_dynamics,
    project_to_scan,
    raycast_frame,
    remove_ground,
    run_closed_loop,
    steady_state,
    transform_endpoint,
)

__all__ = [
    "FrameError",
    "ParseError",
    "PathSpline",
    "SlamSession",
    "World",
    "cli",
    "command_filter",
    "default_path",
    "fit_path",
    "interpolate",
    "lateral_dynamics",
    "project_to_scan",
    "raycast_frame",
    "remove_ground",
    "run_closed_loop",
    "steady_state",
    "transform_endpoint",
]
