"""Fragmentation of encoded packets into 8-byte CAN frames.

CAN delivers at most 8 data bytes per frame but guarantees per-sender
frame order, so reassembly is a plain byte-stream decode keyed by
arbitration id (one stream per sender).
"""

from __future__ import annotations

from dataclasses import dataclass

from .packet import StreamDecoder, TransportPacket, encode_packet

FRAME_DATA_MAX = 8
ARBITRATION_ID_MAX = 0x7FF  # 11-bit bus identifier


@dataclass(frozen=True, slots=True)
class CanFrame:
    arbitration_id: int
    data: bytes

    def __post_init__(self) -> None:
        if not 0 <= self.arbitration_id <= ARBITRATION_ID_MAX:
            raise ValueError(f"arbitration_id out of range: {self.arbitration_id}")
        if not 1 <= len(self.data) <= FRAME_DATA_MAX:
            raise ValueError(f"frame data must be 1-8 bytes, got {len(self.data)}")


def fragment(p: TransportPacket, arbitration_id: int) -> list[CanFrame]:
    """Split the encoding of ``p`` into consecutive 8-byte frames."""
    encoded = encode_packet(p)
    return [
        CanFrame(arbitration_id, encoded[i : i + FRAME_DATA_MAX])
        for i in range(0, len(encoded), FRAME_DATA_MAX)
    ]


class BusReassembler:
    """Per-sender packet reassembly from an interleaved frame stream."""

    def __init__(self) -> None:
        self._streams: dict[int, StreamDecoder] = {}

    def push(self, frame: CanFrame) -> list[TransportPacket]:
        decoder = self._streams.get(frame.arbitration_id)
        if decoder is None:
            decoder = self._streams[frame.arbitration_id] = StreamDecoder()
        return decoder.feed(frame.data)

    @property
    def corrupt_count(self) -> int:
        return sum(d.corrupt_count for d in self._streams.values())
