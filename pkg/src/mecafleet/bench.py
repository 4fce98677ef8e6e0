"""Codec throughput measurement and fragmentation overhead accounting."""

from __future__ import annotations

import time
from dataclasses import dataclass

from .canproto import HEADER_LEN, TRAILER_LEN, StreamDecoder, TransportPacket, encode_packet


@dataclass(frozen=True)
class BenchReport:
    n_packets: int
    payload_size: int
    encode_s: float
    decode_s: float
    encode_packets_per_s: float
    decode_packets_per_s: float
    encode_mb_per_s: float
    decode_mb_per_s: float
    overhead_ratio: float


def overhead_ratio(payload_size: int) -> float:
    """Framing overhead as a fraction of the encoded packet."""
    return (HEADER_LEN + TRAILER_LEN) / (HEADER_LEN + TRAILER_LEN + payload_size)


def bench_protocol(n_packets: int, sizes: list[int] | None = None) -> list[BenchReport]:
    """Encode/decode throughput per payload size; empty input, empty report."""
    if n_packets <= 0:
        return []
    reports = []
    for size in sizes or [0]:
        packet = TransportPacket(
            source_id=1, dest_id=2, seq=0, cmd_set=3, cmd_id=4, payload=bytes(size)
        )
        t0 = time.perf_counter()
        encoded = None
        for i in range(n_packets):
            encoded = encode_packet(packet)
        encode_s = time.perf_counter() - t0

        decoder = StreamDecoder()
        t0 = time.perf_counter()
        for i in range(n_packets):
            decoder.feed(encoded)
        decode_s = time.perf_counter() - t0
        assert decoder.decoded_count == n_packets

        wire_bytes = len(encoded) * n_packets
        reports.append(
            BenchReport(
                n_packets=n_packets,
                payload_size=size,
                encode_s=encode_s,
                decode_s=decode_s,
                encode_packets_per_s=n_packets / encode_s if encode_s > 0 else float("inf"),
                decode_packets_per_s=n_packets / decode_s if decode_s > 0 else float("inf"),
                encode_mb_per_s=wire_bytes / 1e6 / encode_s if encode_s > 0 else float("inf"),
                decode_mb_per_s=wire_bytes / 1e6 / decode_s if decode_s > 0 else float("inf"),
                overhead_ratio=overhead_ratio(size),
            )
        )
    return reports
