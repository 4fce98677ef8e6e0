"""Serial pub/sub transport layered over 8-byte CAN frames.

Wire layout (little-endian multi-byte fields):

    offset  size  field
    0       1     magic 0x55
    1       2     total encoded length (header + payload + trailer)
    3       1     CRC-8 over bytes 0..2
    4       1     source node id
    5       1     destination node id
    6       2     sequence counter (wraps mod 2^16)
    8       1     attribute flags (bit 0 is_ack, bit 1 needs_ack)
    9       1     command set
    10      1     command id
    11      2     reserved, zero
    13      n     payload (0..1024 bytes)
    13+n    2     CRC-16/CCITT-FALSE over bytes 0..13+n-1

The header CRC-8 makes resynchronisation cheap: a decoder scans for 0x55
and checks three more bytes before trusting the length field.
"""

from .crc import crc8, crc16_ccitt
from .packet import (
    HEADER_LEN,
    MAGIC,
    MAX_PAYLOAD,
    TRAILER_LEN,
    PayloadTooLongError,
    StreamDecoder,
    TransportPacket,
    ack_for,
    decode_stream,
    encode_packet,
)
from .frames import CanFrame, BusReassembler, fragment
from .subscribe import (
    DuplicateSubscriptionError,
    Subscription,
    SubscriptionRegistry,
    subscription_schedule,
)
from .reliability import DeliveryFailure, ReliableSender

__all__ = [
    "MAGIC",
    "HEADER_LEN",
    "TRAILER_LEN",
    "MAX_PAYLOAD",
    "crc8",
    "crc16_ccitt",
    "TransportPacket",
    "PayloadTooLongError",
    "encode_packet",
    "decode_stream",
    "StreamDecoder",
    "ack_for",
    "CanFrame",
    "fragment",
    "BusReassembler",
    "Subscription",
    "SubscriptionRegistry",
    "subscription_schedule",
    "DuplicateSubscriptionError",
    "ReliableSender",
    "DeliveryFailure",
]
