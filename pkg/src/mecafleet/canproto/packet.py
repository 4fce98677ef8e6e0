"""Packet type, encoder, and resynchronising stream decoder."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from .crc import crc8, crc16_ccitt

MAGIC = 0x55
HEADER_LEN = 13
TRAILER_LEN = 2
MAX_PAYLOAD = 1024
MIN_FRAME = HEADER_LEN + TRAILER_LEN
MAX_FRAME = HEADER_LEN + MAX_PAYLOAD + TRAILER_LEN

ATTR_IS_ACK = 0x01
ATTR_NEEDS_ACK = 0x02

_HEADER = struct.Struct("<BHBBBHBBBH")  # magic, len, crc8, src, dst, seq, attrs, set, id, reserved


class PayloadTooLongError(ValueError):
    """Payload exceeds the 1024-byte transport limit."""


@dataclass(frozen=True, slots=True)
class TransportPacket:
    """Addressed, sequenced, CRC-protected pub/sub message.

    ``seq`` wraps mod 2^16. An ack packet echoes the seq of the packet it
    acknowledges and never itself demands an ack.
    """

    source_id: int
    dest_id: int
    seq: int
    cmd_set: int
    cmd_id: int
    payload: bytes = b""
    is_ack: bool = False
    needs_ack: bool = False

    def __post_init__(self) -> None:
        for name in ("source_id", "dest_id", "cmd_set", "cmd_id"):
            value = getattr(self, name)
            if not 0 <= value <= 0xFF:
                raise ValueError(f"{name} out of range: {value}")
        if not 0 <= self.seq <= 0xFFFF:
            raise ValueError(f"seq out of range: {self.seq}")
        if len(self.payload) > MAX_PAYLOAD:
            raise PayloadTooLongError(f"payload is {len(self.payload)} bytes, max {MAX_PAYLOAD}")
        if self.is_ack and self.needs_ack:
            raise ValueError("ack packets never demand acks")

    @property
    def encoded_length(self) -> int:
        return HEADER_LEN + len(self.payload) + TRAILER_LEN


def encode_packet(p: TransportPacket) -> bytes:
    """Serialise a packet to its wire form."""
    attrs = (ATTR_IS_ACK if p.is_ack else 0) | (ATTR_NEEDS_ACK if p.needs_ack else 0)
    length = p.encoded_length
    prefix = struct.pack("<BH", MAGIC, length)
    header = prefix + bytes([crc8(prefix)]) + struct.pack(
        "<BBHBBBH", p.source_id, p.dest_id, p.seq, attrs, p.cmd_set, p.cmd_id, 0
    )
    body = header + p.payload
    return body + struct.pack("<H", crc16_ccitt(body))


def ack_for(p: TransportPacket, self_id: int) -> TransportPacket | None:
    """Build the acknowledgement for ``p``, or None if it needs none.

    The ack echoes seq and command identity with source/destination
    swapped and an empty payload.
    """
    if p.dest_id != self_id:
        raise ValueError(f"packet addressed to {p.dest_id}, not {self_id}")
    if not p.needs_ack:
        return None
    return TransportPacket(
        source_id=self_id,
        dest_id=p.source_id,
        seq=p.seq,
        cmd_set=p.cmd_set,
        cmd_id=p.cmd_id,
        payload=b"",
        is_ack=True,
        needs_ack=False,
    )


def _parse_frame(buf: bytes) -> TransportPacket:
    _, length, _, src, dst, seq, attrs, cmd_set, cmd_id, _ = _HEADER.unpack_from(buf)
    return TransportPacket(
        source_id=src,
        dest_id=dst,
        seq=seq,
        cmd_set=cmd_set,
        cmd_id=cmd_id,
        payload=bytes(buf[HEADER_LEN : length - TRAILER_LEN]),
        is_ack=bool(attrs & ATTR_IS_ACK),
        needs_ack=bool(attrs & ATTR_NEEDS_ACK),
    )


class StreamDecoder:
    """Stateful decoder that survives corruption, garbage, and splits.

    Emits every packet whose header CRC-8 and trailing CRC-16 verify.
    After a CRC failure the scan resumes one byte past the failed sync
    candidate, so an intact packet that starts anywhere later in the
    stream is always found. Incomplete suffixes stay buffered until more
    bytes arrive; ``flush()`` abandons a stalled candidate at end of
    stream and drains whatever complete packets remain behind it.
    """

    def __init__(self) -> None:
        self._buf = bytearray()
        self.corrupt_count = 0      # sync candidates that failed a CRC or length check
        self.skipped_bytes = 0      # garbage bytes discarded while hunting for sync
        self.decoded_count = 0

    def feed(self, data: bytes) -> list[TransportPacket]:
        self._buf.extend(data)
        return self._scan()

    def flush(self) -> list[TransportPacket]:
        """Drain the buffer at end of stream, abandoning stalled candidates."""
        out: list[TransportPacket] = []
        while True:
            out.extend(self._scan())
            # _scan stops either on an incomplete candidate at buffer start
            # or with nothing decodable left; only the former can make progress.
            if self._stalled_candidate():
                del self._buf[:1]
                self.skipped_bytes += 1
                continue
            return out

    def _stalled_candidate(self) -> bool:
        buf = self._buf
        if len(buf) < 4 or buf[0] != MAGIC:
            return False
        if crc8(bytes(buf[0:3])) != buf[3]:
            return False
        length = buf[1] | (buf[2] << 8)
        return MIN_FRAME <= length <= MAX_FRAME and len(buf) < length

    def _scan(self) -> list[TransportPacket]:
        buf = self._buf
        out: list[TransportPacket] = []
        while True:
            start = buf.find(MAGIC)
            if start < 0:
                self.skipped_bytes += len(buf)
                buf.clear()
                return out
            if start > 0:
                self.skipped_bytes += start
                del buf[:start]
            if len(buf) < 4:
                return out
            if crc8(bytes(buf[0:3])) != buf[3]:
                # not a real header; the 0x55 was payload or noise
                del buf[:1]
                self.skipped_bytes += 1
                continue
            length = buf[1] | (buf[2] << 8)
            if not MIN_FRAME <= length <= MAX_FRAME:
                self.corrupt_count += 1
                del buf[:1]
                self.skipped_bytes += 1
                continue
            if len(buf) < length:
                return out  # incomplete suffix, wait for more bytes
            frame = bytes(buf[:length])
            stored = frame[length - 2] | (frame[length - 1] << 8)
            if crc16_ccitt(frame[: length - TRAILER_LEN]) != stored:
                self.corrupt_count += 1
                del buf[:1]
                self.skipped_bytes += 1
                continue
            out.append(_parse_frame(frame))
            self.decoded_count += 1
            del buf[:length]


def decode_stream(
    data: bytes, state: StreamDecoder | None = None
) -> tuple[list[TransportPacket], StreamDecoder]:
    """Feed bytes through a decoder state, creating one if needed."""
    if state is None:
        state = StreamDecoder()
    return state.feed(data), state
