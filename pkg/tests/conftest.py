import random

import pytest

from mecafleet.canproto import MAX_PAYLOAD, TransportPacket


def random_packet(rng: random.Random, max_payload: int = MAX_PAYLOAD) -> TransportPacket:
    needs_ack = rng.random() < 0.3
    is_ack = not needs_ack and rng.random() < 0.1
    return TransportPacket(
        source_id=rng.randint(0, 255),
        dest_id=rng.randint(0, 255),
        seq=rng.randint(0, 65535),
        cmd_set=rng.randint(0, 255),
        cmd_id=rng.randint(0, 255),
        payload=rng.randbytes(rng.randint(0, max_payload)),
        is_ack=is_ack,
        needs_ack=needs_ack,
    )


@pytest.fixture
def rng() -> random.Random:
    return random.Random(1234)
