"""Learning-from-demonstration stack for automated dolly-in camera shots.

A deterministic kinematic filming-robot simulator, PPO and GAIL trainers
built on an exact-gradient MLP core, a teleoperation recording service,
and an evaluation kit for framing errors and sim-to-twin rank correlation.
"""

__version__ = "0.1.0"
