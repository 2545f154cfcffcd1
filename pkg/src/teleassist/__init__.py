"""Shared-autonomy assembly assist around a simulated bimanual block workspace.

Core pipeline: scene graphs of the placed blocks are compared to goal
structures by exact graph edit distance, an intention estimator scores the
operator's task and per-hand action, and a per-hand behavior machine gates
between free teleoperation and motion support (snapping, plane constraints,
auto-drive). A kinematic harness runs scripted closed-loop trials; the same
loop can be served live over a WebSocket for the browser UI.
"""

from .geometry import BlockShape, Pose, geodesic_angle_deg, relative_pose

__all__ = [
    "BlockShape",
    "Pose",
    "geodesic_angle_deg",
    "relative_pose",
]

__version__ = "0.1.0"
