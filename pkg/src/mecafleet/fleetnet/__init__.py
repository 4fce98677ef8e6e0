"""Dual-channel fleet networking.

The infrastructure channel carries commands and telemetry as canproto
packets over datagrams, with per-sender dedup and estop-first delivery.
The peer channel is best-effort broadcast with no ordering promise.
"""

from .commands import (
    CMD_SET_FLEET,
    CMD_SET_MOTION,
    CMD_SET_TELEMETRY,
    BodyTwistCommand,
    CommandKind,
    FleetCommand,
    PingCommand,
    SetTrajectoryCommand,
    TrajectorySpec,
    WheelSpeedsCommand,
    command_from_packet,
    command_to_packet,
)
from .estop import (
    DEGRADED_AFTER_S,
    HEARTBEAT_RATE_HZ,
    HEARTBEAT_TIMEOUT_S,
    ConnectivityStatus,
    EstopLatch,
    EstopReason,
    EstopState,
    HeartbeatMonitor,
)
from .transport import SimNetwork, SimSocket, UdpTransport
from .channel import CommandChannel, PeerGroup, PeerMessage, PeerPayloadTooLarge

__all__ = [
    "CommandKind",
    "FleetCommand",
    "BodyTwistCommand",
    "WheelSpeedsCommand",
    "SetTrajectoryCommand",
    "TrajectorySpec",
    "PingCommand",
    "command_to_packet",
    "command_from_packet",
    "CMD_SET_FLEET",
    "CMD_SET_MOTION",
    "CMD_SET_TELEMETRY",
    "EstopReason",
    "EstopState",
    "EstopLatch",
    "HeartbeatMonitor",
    "ConnectivityStatus",
    "HEARTBEAT_RATE_HZ",
    "HEARTBEAT_TIMEOUT_S",
    "DEGRADED_AFTER_S",
    "SimNetwork",
    "SimSocket",
    "UdpTransport",
    "CommandChannel",
    "PeerGroup",
    "PeerMessage",
    "PeerPayloadTooLarge",
]
