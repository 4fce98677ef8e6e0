"""Infrastructure command channel and the ad-hoc peer channel.

The command channel serialises FleetCommands as canproto packets, one per
datagram. Receivers deduplicate per sender on the 32-bit command seq and
always surface estop traffic ahead of queued motion commands. The peer
channel is a thin broadcast framing with loss and reordering tolerated by
construction.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

from ..canproto import ReliableSender, StreamDecoder, TransportPacket, ack_for, encode_packet
from .commands import (
    CMD_SET_FLEET,
    CMD_ID_ESTOP,
    CMD_ID_ESTOP_RELEASE,
    CommandKind,
    FleetCommand,
    UnknownCommandError,
    command_from_packet,
    command_to_packet,
)
from .transport import SimSocket


# ack payload marker for packets whose command topic was not understood
ACK_ERROR_UNKNOWN = b"\x01"


@dataclass
class ChannelPoll:
    commands: list[FleetCommand] = field(default_factory=list)
    acks: list[TransportPacket] = field(default_factory=list)
    telemetry: list[TransportPacket] = field(default_factory=list)
    unknown: int = 0


def _is_estop_packet(pkt: TransportPacket) -> bool:
    return pkt.cmd_set == CMD_SET_FLEET and pkt.cmd_id in (CMD_ID_ESTOP, CMD_ID_ESTOP_RELEASE)


class CommandChannel:
    """One endpoint of the infrastructure channel (robot or operator side)."""

    def __init__(self, socket: SimSocket, node_id: int, telemetry_cmd_set: int = 0x20):
        self.socket = socket
        self.node_id = node_id
        self.telemetry_cmd_set = telemetry_cmd_set
        self.reliable = ReliableSender()
        self._next_seq = 1
        self._last_seen: dict[tuple[int, tuple[int, int]], int] = {}
        self.duplicates_dropped = 0

    def next_seq(self) -> int:
        seq = self._next_seq
        self._next_seq = (self._next_seq + 1) & 0xFFFFFFFF
        return seq

    def send_command(
        self,
        kind: CommandKind,
        body: object,
        robot_id: int,
        now: float,
        needs_ack: bool = False,
    ) -> FleetCommand:
        cmd = FleetCommand(robot_id=robot_id, kind=kind, body=body, seq=self.next_seq(), t_sent=now)
        pkt = command_to_packet(cmd, source_id=self.node_id, needs_ack=needs_ack)
        self.socket.send(robot_id, encode_packet(pkt))
        if needs_ack:
            self.reliable.track(pkt, now)
        return cmd

    def send_packet(self, pkt: TransportPacket) -> None:
        self.socket.send(pkt.dest_id, encode_packet(pkt))

    def poll(self, now: float, auto_ack: bool = True) -> ChannelPoll:
        """Drain the socket: decode, dedup, ack, and sort estops first."""
        result = ChannelPoll()
        estops: list[FleetCommand] = []
        motion: list[FleetCommand] = []
        for _, data in self.socket.recv_all():
            # one packet per datagram; a fresh decoder keeps streams independent
            packets, _ = _decode_datagram(data)
            for pkt in packets:
                if pkt.is_ack:
                    self.reliable.on_ack(pkt.seq)
                    result.acks.append(pkt)
                    continue
                if pkt.cmd_set == self.telemetry_cmd_set:
                    result.telemetry.append(pkt)
                    continue
                try:
                    cmd = command_from_packet(pkt)
                except UnknownCommandError:
                    result.unknown += 1
                    if auto_ack and pkt.needs_ack and pkt.dest_id == self.node_id:
                        # acknowledged-with-error: ack payload carries a marker
                        reply = ack_for(pkt, self.node_id)
                        if reply is not None:
                            reply = replace(reply, payload=ACK_ERROR_UNKNOWN)
                            self.socket.send(pkt.source_id, encode_packet(reply))
                    continue
                if self._stale(pkt, cmd):
                    self.duplicates_dropped += 1
                    continue
                if auto_ack and pkt.needs_ack and pkt.dest_id == self.node_id:
                    reply = ack_for(pkt, self.node_id)
                    if reply is not None:
                        self.socket.send(pkt.source_id, encode_packet(reply))
                (estops if _is_estop_packet(pkt) else motion).append(cmd)
        # retransmissions for unacked needs_ack traffic
        resend, _failed = self.reliable.poll(now)
        for pkt in resend:
            self.socket.send(pkt.dest_id, encode_packet(pkt))
        result.commands = estops + motion
        return result

    def _stale(self, pkt: TransportPacket, cmd: FleetCommand) -> bool:
        """Duplicate/stale suppression per (sender, topic); estops always pass.

        Estop engage/release must act regardless of session state, and
        re-applying one is idempotent, so they bypass the monotone check.
        """
        if _is_estop_packet(pkt):
            return False
        key = (pkt.source_id, (pkt.cmd_set, pkt.cmd_id))
        last = self._last_seen.get(key)
        if last is not None and cmd.seq <= last:
            return True
        self._last_seen[key] = cmd.seq
        return False


def _decode_datagram(data: bytes) -> tuple[list[TransportPacket], StreamDecoder]:
    decoder = StreamDecoder()
    packets = decoder.feed(data)
    packets += decoder.flush()
    return packets, decoder


PEER_MAGIC = 0x5A
PEER_MAX_PAYLOAD = 1200
_PEER_HEADER = struct.Struct("<BBdH")  # magic, sender, t, payload length


class PeerPayloadTooLarge(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class PeerMessage:
    sender: int
    t: float
    payload: bytes


class PeerGroup:
    """Best-effort broadcast among peers; loss and reordering permitted."""

    def __init__(self, socket: SimSocket, group_id: int, node_id: int):
        self.socket = socket
        self.group_id = group_id
        self.node_id = node_id
        socket.network.join_group(group_id, node_id)
        self.malformed_dropped = 0

    def broadcast(self, payload: bytes, now: float) -> None:
        if len(payload) > PEER_MAX_PAYLOAD:
            raise PeerPayloadTooLarge(f"{len(payload)} bytes > {PEER_MAX_PAYLOAD}")
        frame = _PEER_HEADER.pack(PEER_MAGIC, self.node_id, now, len(payload)) + payload
        self.socket.send_group(self.group_id, frame)

    def recv(self) -> list[PeerMessage]:
        out = []
        for _, data in self.socket.recv_all():
            if len(data) < _PEER_HEADER.size:
                self.malformed_dropped += 1
                continue
            magic, sender, t, length = _PEER_HEADER.unpack_from(data)
            payload = data[_PEER_HEADER.size :]
            if magic != PEER_MAGIC or len(payload) != length:
                self.malformed_dropped += 1
                continue
            out.append(PeerMessage(sender, t, payload))
        return out
