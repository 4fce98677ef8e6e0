"""Datagram transports: a deterministic in-process network and real UDP.

The simulated network queues every send and moves traffic on an explicit
``deliver()`` call, so single-process runs are reproducible. Loss and
reordering are opt-in and driven by a seeded RNG; the ``reverse`` mode is
the adversarial scheduler used by ordering-tolerance tests.
"""

from __future__ import annotations

import random
import socket as _socket
from collections import deque
from dataclasses import dataclass


@dataclass(frozen=True, slots=True)
class Datagram:
    source: int
    dest: int
    data: bytes


class SimSocket:
    def __init__(self, network: "SimNetwork", address: int):
        self.network = network
        self.address = address
        self._inbox: deque[tuple[int, bytes]] = deque()

    def send(self, dest: int, data: bytes) -> None:
        self.network._submit(Datagram(self.address, dest, data))

    def send_group(self, group_id: int, data: bytes) -> None:
        self.network._submit_group(group_id, self.address, data)

    def recv_all(self) -> list[tuple[int, bytes]]:
        out = list(self._inbox)
        self._inbox.clear()
        return out


class SimNetwork:
    """In-process datagram switch with deterministic fault injection."""

    def __init__(self, seed: int = 0, loss_rate: float = 0.0, reorder: str = "none"):
        if reorder not in ("none", "shuffle", "reverse"):
            raise ValueError(f"reorder must be none|shuffle|reverse, got {reorder!r}")
        if not 0.0 <= loss_rate < 1.0:
            raise ValueError("loss_rate must be in [0, 1)")
        self._rng = random.Random(seed)
        self.loss_rate = loss_rate
        self.reorder = reorder
        self._sockets: dict[int, SimSocket] = {}
        self._groups: dict[int, list[int]] = {}
        self._in_flight: list[Datagram] = []
        self.bytes_sent = 0
        self.datagrams_sent = 0
        self.datagrams_dropped = 0

    def socket(self, address: int) -> SimSocket:
        if address in self._sockets:
            raise ValueError(f"address {address} already bound")
        sock = SimSocket(self, address)
        self._sockets[address] = sock
        return sock

    def join_group(self, group_id: int, address: int) -> None:
        members = self._groups.setdefault(group_id, [])
        if address not in members:
            members.append(address)

    def _submit(self, dgram: Datagram) -> None:
        self.bytes_sent += len(dgram.data)
        self.datagrams_sent += 1
        self._in_flight.append(dgram)

    def _submit_group(self, group_id: int, source: int, data: bytes) -> None:
        # local loopback suppressed: the sender never receives its own cast
        for member in self._groups.get(group_id, []):
            if member != source:
                self._submit(Datagram(source, member, data))

    def deliver(self) -> int:
        """Move in-flight traffic to inboxes; returns datagrams delivered."""
        pending = self._in_flight
        self._in_flight = []
        if self.loss_rate > 0.0:
            kept = []
            for dgram in pending:
                if self._rng.random() < self.loss_rate:
                    self.datagrams_dropped += 1
                else:
                    kept.append(dgram)
            pending = kept
        if self.reorder == "shuffle":
            self._rng.shuffle(pending)
        elif self.reorder == "reverse":
            pending.reverse()
        delivered = 0
        for dgram in pending:
            sock = self._sockets.get(dgram.dest)
            if sock is not None:
                sock._inbox.append((dgram.source, dgram.data))
                delivered += 1
        return delivered


class UdpTransport:
    """Real-socket twin of SimSocket for multi-process runs.

    Addressing maps node ids to (host, port) endpoints; reproducibility
    claims do not extend to this transport.
    """

    def __init__(self, bind_port: int, endpoints: dict[int, tuple[str, int]], node_id: int,
                 host: str = "127.0.0.1"):
        self.node_id = node_id
        self.endpoints = dict(endpoints)
        self._sock = _socket.socket(_socket.AF_INET, _socket.SOCK_DGRAM)
        self._sock.bind((host, bind_port))
        self._sock.setblocking(False)
        self._port_to_node = {port: nid for nid, (_, port) in self.endpoints.items()}

    def send(self, dest: int, data: bytes) -> None:
        endpoint = self.endpoints.get(dest)
        if endpoint is None:
            raise KeyError(f"no endpoint for node {dest}")
        self._sock.sendto(data, endpoint)

    def recv_all(self) -> list[tuple[int, bytes]]:
        out = []
        while True:
            try:
                data, addr = self._sock.recvfrom(65536)
            except BlockingIOError:
                return out
            out.append((self._port_to_node.get(addr[1], -1), data))

    def close(self) -> None:
        self._sock.close()
