"""Software twin of an agile omnidirectional multi-robot platform.

Subpackages:
- canproto:   serial pub/sub transport layered over 8-byte CAN frames
- kinematics: mecanum four-wheel forward/inverse kinematics
- estimator:  constant-velocity Kalman filter for planar pose tracking
- control:    discrete LQR gain synthesis and trajectory tracking
- simworld:   vectorized multi-agent 2D simulator with a PID force layer
- fleetnet:   dual-channel fleet networking, emergency stop, heartbeats
- robot_node: per-robot driver loop (commands in, wheel speeds out)
- runner:     deterministic scenario harness, metrics, replay
- server:     FastAPI gateway for the operator console
"""

__version__ = "0.1.0"
