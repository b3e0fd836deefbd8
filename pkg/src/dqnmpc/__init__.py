"""Dual-quaternion NMPC for quadrotors.

Pose dynamics on the unit dual-quaternion group, an SQP/real-time
iteration solver with a dense active-set QP underneath, a decoupled
position/attitude baseline controller, analytic references with a
differential-flatness feedforward, and a Monte-Carlo simulation harness
with CSV/JSON/SVG reporting.
"""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
