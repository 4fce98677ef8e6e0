"""Retransmission bookkeeping for needs_ack packets.

Policy: after the initial send, up to 3 retransmissions spaced 50 ms
apart; if no ack arrives the delivery is reported failed. The sender is
transport-agnostic: callers pass injected time and move the returned
packets onto the wire themselves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .packet import TransportPacket

RETRY_LIMIT = 3
RETRY_SPACING_S = 0.05


@dataclass(frozen=True, slots=True)
class DeliveryFailure:
    packet: TransportPacket
    attempts: int
    t: float


@dataclass
class _Pending:
    packet: TransportPacket
    attempts: int
    next_retry: float


@dataclass
class ReliableSender:
    retry_limit: int = RETRY_LIMIT
    retry_spacing: float = RETRY_SPACING_S
    _pending: dict[int, _Pending] = field(default_factory=dict)

    def track(self, packet: TransportPacket, now: float) -> None:
        """Start watching an already-sent needs_ack packet."""
        if not packet.needs_ack:
            raise ValueError("only needs_ack packets are tracked")
        self._pending[packet.seq] = _Pending(packet, 1, now + self.retry_spacing)

    def on_ack(self, seq: int) -> bool:
        """Returns True if the ack matched a tracked packet."""
        return self._pending.pop(seq, None) is not None

    def poll(self, now: float) -> tuple[list[TransportPacket], list[DeliveryFailure]]:
        """Packets due for retransmission and deliveries that gave up."""
        resend: list[TransportPacket] = []
        failed: list[DeliveryFailure] = []
        for seq in list(self._pending):
            entry = self._pending[seq]
            if entry.next_retry > now:
                continue
            if entry.attempts > self.retry_limit:
                failed.append(DeliveryFailure(entry.packet, entry.attempts, now))
                del self._pending[seq]
            else:
                resend.append(entry.packet)
                entry.attempts += 1
                entry.next_retry = now + self.retry_spacing
        return resend, failed

    @property
    def in_flight(self) -> int:
        return len(self._pending)
