"""Topic subscriptions and their emission schedule.

A subscription asks a node to stream one (cmd_set, cmd_id) topic at a
fixed rate. The registry owns the per-subscription deadlines; scheduling
is deterministic given the registration times and ``now``.
"""

from __future__ import annotations

from dataclasses import dataclass

MAX_RATE_HZ = 100.0


class DuplicateSubscriptionError(ValueError):
    """A (subscriber, topic) pair may hold at most one active subscription."""


@dataclass(frozen=True, slots=True)
class Subscription:
    topic: tuple[int, int]  # (cmd_set, cmd_id)
    rate_hz: float
    subscriber: int

    def __post_init__(self) -> None:
        if not 0 < self.rate_hz <= MAX_RATE_HZ:
            raise ValueError(f"rate must be in (0, {MAX_RATE_HZ}] Hz, got {self.rate_hz}")

    @property
    def period(self) -> float:
        return 1.0 / self.rate_hz


def subscription_schedule(
    subs: list[Subscription], now: float
) -> list[tuple[Subscription, float]]:
    """Next emission deadline per subscription, one period from ``now``."""
    return [(sub, now + sub.period) for sub in subs]


class SubscriptionRegistry:
    """Active subscriptions with per-subscription emission deadlines."""

    def __init__(self) -> None:
        self._subs: dict[tuple[int, tuple[int, int]], Subscription] = {}
        # (registration time, emission count); deadline k+1 is t0 + (k+1)/rate,
        # computed by multiplication so deadlines never drift
        self._clock: dict[tuple[int, tuple[int, int]], tuple[float, int]] = {}

    def register(self, sub: Subscription, now: float) -> None:
        key = (sub.subscriber, sub.topic)
        if key in self._subs:
            raise DuplicateSubscriptionError(f"already subscribed: {key}")
        self._subs[key] = sub
        self._clock[key] = (now, 0)

    def unregister(self, subscriber: int, topic: tuple[int, int]) -> None:
        key = (subscriber, topic)
        self._subs.pop(key, None)
        self._clock.pop(key, None)

    def _deadline(self, key: tuple[int, tuple[int, int]]) -> float:
        t0, count = self._clock[key]
        return t0 + (count + 1) / self._subs[key].rate_hz

    def schedule(self, now: float) -> list[tuple[Subscription, float]]:
        """Deadlines in registration order; past-due entries report ``now``."""
        return [(self._subs[k], max(self._deadline(k), now)) for k in self._subs]

    def pop_due(self, now: float) -> list[Subscription]:
        """Subscriptions whose deadline has passed; advances each by one period.

        A subscription that fell far behind emits once per call and
        catches up period by period, so a stalled scheduler produces a
        burst no faster than one emission per poll.
        """
        fired = []
        for key, sub in self._subs.items():
            if self._deadline(key) <= now:
                fired.append(sub)
                t0, count = self._clock[key]
                self._clock[key] = (t0, count + 1)
        return fired

    def __len__(self) -> int:
        return len(self._subs)
