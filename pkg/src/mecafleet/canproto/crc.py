"""Table-driven CRC-8 (poly 0x31, init 0x77) and CRC-16/CCITT-FALSE.

Both are MSB-first with no reflection and no output XOR. The CRC-8
protects the 3-byte frame prefix (magic + length) so a decoder can
validate a sync candidate before trusting the length field; the CRC-16
covers the whole encoded packet.
"""

CRC8_POLY = 0x31
CRC8_INIT = 0x77

CRC16_POLY = 0x1021
CRC16_INIT = 0xFFFF


def _make_crc8_table(poly: int) -> list[int]:
    table = []
    for byte in range(256):
        crc = byte
        for _ in range(8):
            crc = ((crc << 1) ^ poly) & 0xFF if crc & 0x80 else (crc << 1) & 0xFF
        table.append(crc)
    return table


def _make_crc16_table(poly: int) -> list[int]:
    table = []
    for byte in range(256):
        crc = byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ poly) & 0xFFFF if crc & 0x8000 else (crc << 1) & 0xFFFF
        table.append(crc)
    return table


_CRC8_TABLE = _make_crc8_table(CRC8_POLY)
_CRC16_TABLE = _make_crc16_table(CRC16_POLY)


def crc8(data: bytes, init: int = CRC8_INIT) -> int:
    crc = init
    table = _CRC8_TABLE
    for byte in data:
        crc = table[crc ^ byte]
    return crc


def crc16_ccitt(data: bytes, init: int = CRC16_INIT) -> int:
    crc = init
    table = _CRC16_TABLE
    for byte in data:
        crc = ((crc << 8) & 0xFFFF) ^ table[((crc >> 8) ^ byte) & 0xFF]
    return crc
