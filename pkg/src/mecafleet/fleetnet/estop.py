"""Latched emergency stop and the heartbeat watchdog.

Once latched, only an explicit operator release unlatches; while latched
the robot node forces its actuator output to zero. The watchdog expects
operator heartbeats at 10 Hz and latches the stop on a 0.5 s gap.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from enum import Enum

HEARTBEAT_RATE_HZ = 10.0
HEARTBEAT_TIMEOUT_S = 0.5
DEGRADED_AFTER_S = 0.15


class EstopReason(Enum):
    OPERATOR = "operator"
    BUTTON = "button"
    HEARTBEAT_TIMEOUT = "heartbeat_timeout"
    INTERNAL = "internal"


class ConnectivityStatus(Enum):
    CONNECTED = "connected"
    DEGRADED = "degraded"
    LOST = "lost"


@dataclass(frozen=True, slots=True)
class EstopState:
    latched: bool
    reason: EstopReason | None
    since: float


class EstopLatch:
    """Single-writer latch; transitions serialised by an internal lock
    because engage may arrive from a network thread."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._state = EstopState(False, None, 0.0)
        self.spurious_releases = 0

    def engage(self, reason: EstopReason, now: float) -> None:
        with self._lock:
            self._state = EstopState(True, reason, now)

    def release(self, now: float) -> bool:
        """Unlatch; returns False (and warns via counter) if not latched."""
        with self._lock:
            if not self._state.latched:
                self.spurious_releases += 1
                return False
            self._state = EstopState(False, None, now)
            return True

    @property
    def state(self) -> EstopState:
        with self._lock:
            return self._state

    @property
    def latched(self) -> bool:
        return self.state.latched


class HeartbeatMonitor:
    """Tracks operator heartbeats for one robot and trips the estop latch."""

    def __init__(
        self,
        latch: EstopLatch,
        timeout: float = HEARTBEAT_TIMEOUT_S,
        degraded_after: float = DEGRADED_AFTER_S,
        start_time: float = 0.0,
    ):
        self.latch = latch
        self.timeout = timeout
        self.degraded_after = degraded_after
        self.last_heartbeat = start_time
        self.timeouts_tripped = 0

    def beat(self, now: float) -> None:
        self.last_heartbeat = max(self.last_heartbeat, now)

    def status(self, now: float) -> ConnectivityStatus:
        gap = now - self.last_heartbeat
        if gap <= self.degraded_after:
            return ConnectivityStatus.CONNECTED
        if gap <= self.timeout:
            return ConnectivityStatus.DEGRADED
        return ConnectivityStatus.LOST

    def check(self, now: float) -> bool:
        """Engage the estop if the heartbeat gap exceeded the timeout."""
        if now - self.last_heartbeat > self.timeout:
            if not self.latch.latched:
                self.latch.engage(EstopReason.HEARTBEAT_TIMEOUT, now)
                self.timeouts_tripped += 1
            return True
        return False
