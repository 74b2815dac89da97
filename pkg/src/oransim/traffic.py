"""QCI-classed downlink traffic: arrivals, RLC queues, HoL aging, expiry.

Three traffic classes are built in (live video, AR, V2X), each with the
standard QCI priority and packet delay budget. A flow is URLLC when its
delay budget is at most 20 ms, which covers AR and V2X but not video.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

URLLC_BUDGET_THRESHOLD_MS = 20.0


@dataclass(frozen=True)
class FlowSpec:
    qci: int
    resource_type: str          # "GBR" | "NonGBR"
    priority: int               # lower number = more important
    delay_budget_ms: float
    mean_rate_bps: float
    packet_size_bits: int
    label: str

    def __post_init__(self):
        if self.delay_budget_ms <= 0:
            raise ValueError("delay budget must be positive")
        if self.mean_rate_bps < 0 or self.packet_size_bits <= 0:
            raise ValueError("bad rate or packet size")

    @property
    def is_urllc(self):
        return self.delay_budget_ms <= URLLC_BUDGET_THRESHOLD_MS


# QCI table rows used by the scenarios: (qci, type, priority, budget, label)
TRAFFIC_CLASSES = {
    "video": dict(qci=2, resource_type="GBR", priority=40,
                  delay_budget_ms=150.0, label="video"),
    "ar": dict(qci=80, resource_type="NonGBR", priority=68,
               delay_budget_ms=10.0, label="ar"),
    "v2x": dict(qci=75, resource_type="GBR", priority=25,
                delay_budget_ms=20.0, label="v2x"),
}

CLASS_ORDER = ("video", "ar", "v2x")


def make_flow(class_name, mean_rate_bps, packet_size_bits=1000):
    spec = TRAFFIC_CLASSES[class_name]
    return FlowSpec(mean_rate_bps=mean_rate_bps,
                    packet_size_bits=packet_size_bits, **spec)


def class_of_qci(qci):
    for name, spec in TRAFFIC_CLASSES.items():
        if spec["qci"] == qci:
            return name
    raise KeyError(f"unknown QCI {qci}")


@dataclass
class Packet:
    size_bits: int
    arrival_tti: int
    qci: int
    remaining_bits: int = field(default=-1)

    def __post_init__(self):
        if self.remaining_bits < 0:
            self.remaining_bits = self.size_bits
        if not (0 <= self.remaining_bits <= self.size_bits):
            raise ValueError("remaining outside [0, size]")

    def age_ms(self, now_tti, tti_ms=1.0):
        return (now_tti - self.arrival_tti) * tti_ms


class RlcQueue:
    """FIFO of packets for one UE, with HoL aging against a delay budget."""

    def __init__(self, flow: FlowSpec, tti_ms=1.0):
        self.flow = flow
        self.tti_ms = tti_ms
        self._packets: deque[Packet] = deque()
        self.arrived_packets = 0
        self.arrived_bits = 0

    def __len__(self):
        return len(self._packets)

    def __iter__(self):
        return iter(self._packets)

    @property
    def queued_bits(self):
        return sum(p.size_bits for p in self._packets)

    @property
    def queued_remaining_bits(self):
        return sum(p.remaining_bits for p in self._packets)

    def head(self):
        return self._packets[0] if self._packets else None

    def hol_delay_ms(self, now_tti, extra_ms=0.0):
        """Effective age of the head packet; 0 for an empty queue."""
        if not self._packets:
            return 0.0
        return self._packets[0].age_ms(now_tti, self.tti_ms) + extra_ms

    def push(self, packet: Packet):
        self._packets.append(packet)
        self.arrived_packets += 1
        self.arrived_bits += packet.size_bits

    def generate_arrivals(self, now_tti, rng, rate_scale=1.0):
        """Poisson packet arrivals for this TTI at the flow's mean bit rate."""
        lam = (self.flow.mean_rate_bps * self.tti_ms / 1000.0
               / self.flow.packet_size_bits) * rate_scale
        if lam <= 0.0:
            return []
        n = int(rng.poisson(lam))
        fresh = [Packet(self.flow.packet_size_bits, now_tti, self.flow.qci)
                 for _ in range(n)]
        for p in fresh:
            self.push(p)
        return fresh

    def drop_expired(self, now_tti, extra_ms=0.0):
        """Remove packets strictly older than the budget; keeps FIFO order.

        `extra_ms` is the placement-dependent processing delay added to
        every packet's effective age.
        """
        budget = self.flow.delay_budget_ms
        kept = deque()
        dropped = []
        for p in self._packets:
            if p.age_ms(now_tti, self.tti_ms) + extra_ms > budget:
                dropped.append(p)
            else:
                kept.append(p)
        self._packets = kept
        return dropped

    def serve(self, budget_bits, now_tti, extra_ms=0.0):
        """Drain head-of-line packets with `budget_bits` of capacity.

        Partial service decrements a packet's remaining bits. A packet
        that completes within its (effective) budget counts as delivered;
        one that completes late is removed but reported as expired.
        Returns (delivered, expired, bits_consumed).
        """
        delivered = []
        expired = []
        consumed = 0
        budget = int(budget_bits)
        if budget < 0:
            raise ValueError("negative service budget")
        while budget > 0 and self._packets:
            head = self._packets[0]
            take = min(head.remaining_bits, budget)
            head.remaining_bits -= take
            budget -= take
            consumed += take
            if head.remaining_bits == 0:
                self._packets.popleft()
                age = head.age_ms(now_tti, self.tti_ms) + extra_ms
                if age <= self.flow.delay_budget_ms:
                    delivered.append(head)
                else:
                    expired.append(head)
        return delivered, expired, consumed
