"""Dynamic scheduler-placement agent: run each DU's scheduler NF at the
DU (low latency, own-cell view) or at the CU (extra processing delay,
cross-DU interference coordination).

A single A2C agent issues one DU/CU action per DU at every epoch
boundary and learns from the epoch-averaged reward tau*(U*D) + lambda*R3
over the packets scheduled in between. The two always-DU / always-CU
baselines bypass the agent entirely.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .a2c import A2cAgent, TransitionRecord, select_action
from .traffic import CLASS_ORDER, class_of_qci

LOCATION_DU = 0
LOCATION_CU = 1
LOCATION_NAMES = ("du", "cu")

N_PLACEMENT_FEATURES = 7


@dataclass
class PlacementConfig:
    epoch_ttis: int = 10
    cu_extra_delay_ttis: int = 2
    tau: float = 0.5
    lam: float = 0.5
    training: bool = True
    action_mode: str = "auto"
    pin: str | None = None      # "du" | "cu": override applied actions, keep learning

    def __post_init__(self):
        if self.epoch_ttis < 1:
            raise ValueError("epoch length must be >= 1 TTI")
        if self.cu_extra_delay_ttis < 0:
            raise ValueError("cu_extra_delay must be >= 0")
        if self.tau < 0 or self.lam < 0:
            raise ValueError("reward weights must be >= 0")

    def resolve_mode(self):
        if self.action_mode == "auto":
            return "sample" if self.training else "greedy"
        return self.action_mode


def dscd_reward_sample(is_urllc, at_du, within_budget, tau, lam):
    """Per-packet placement reward: tau*(U*D) + lambda*R3."""
    return tau * (is_urllc * at_du) + lam * within_budget


def epoch_reward(samples, location, tau, lam):
    """Average the per-packet reward over one epoch's scheduled packets.

    `samples` are (is_urllc, within_budget) pairs collected at scheduling
    time; an epoch without any scheduled packet earns 0.
    """
    if not samples:
        return 0.0
    d = 1 if location == LOCATION_DU else 0
    total = sum(dscd_reward_sample(u, d, ok, tau, lam) for u, ok in samples)
    return total / len(samples)


def queue_mix(queues, now, tti_ms=1.0):
    """Per-class packet shares and budget-pressure ratios for one DU."""
    counts = dict.fromkeys(CLASS_ORDER, 0)
    ratio_sums = dict.fromkeys(CLASS_ORDER, 0.0)
    total = 0
    urllc = 0
    bits = 0
    for q in queues:
        name = class_of_qci(q.flow.qci)
        for p in q:
            age = p.age_ms(now, tti_ms)
            counts[name] += 1
            ratio_sums[name] += min(age / q.flow.delay_budget_ms, 2.0) / 2.0
            total += 1
            bits += p.size_bits
            if q.flow.is_urllc:
                urllc += 1
    shares = {name: (counts[name] / total if total else 0.0)
              for name in CLASS_ORDER}
    ratios = {name: (ratio_sums[name] / counts[name] if counts[name] else 0.0)
              for name in CLASS_ORDER}
    urllc_share = urllc / total if total else 0.0
    return shares, ratios, urllc_share, bits


def build_placement_observation(queues, now, current_location, cu_fraction,
                                tti_ms=1.0, depth_cap_bits=262_144):
    """Fixed 7-feature vector describing one DU's traffic situation."""
    shares, ratios, urllc_share, bits = queue_mix(queues, now, tti_ms)
    obs = np.zeros(N_PLACEMENT_FEATURES)
    obs[0] = urllc_share
    obs[1] = ratios["video"]
    obs[2] = ratios["ar"]
    obs[3] = ratios["v2x"]
    obs[4] = min(bits / depth_cap_bits, 1.0)
    obs[5] = 1.0 if current_location == LOCATION_DU else 0.0
    obs[6] = cu_fraction
    return obs


@dataclass
class PlacementEvent:
    """One epoch decision for one DU, tagged with the queue mix it saw."""
    tti: int
    du_id: int
    location: int
    urllc_share: float
    class_shares: dict


class PlacementController:
    """Owns per-DU locations and the epoch decide/learn cycle.

    `forced` pins every DU to one location with no agent at all (the
    NF-DU / NF-CU baselines); `cfg.pin` keeps the agent running but
    overrides what is applied, which must reproduce a forced run exactly.
    """

    def __init__(self, du_ids, cfg: PlacementConfig, agent: A2cAgent | None,
                 rng, forced: int | None = None, tti_ms=1.0):
        self.du_ids = sorted(du_ids)
        self.cfg = cfg
        self.agent = agent
        self.rng = rng
        self.forced = forced
        self.tti_ms = tti_ms
        if forced is None and agent is None:
            raise ValueError("dynamic placement needs an agent")
        start = forced if forced is not None else LOCATION_DU
        self.locations = {du: start for du in self.du_ids}
        self._pending: dict[int, TransitionRecord] = {}
        self._samples: dict[int, list] = {du: [] for du in self.du_ids}

    def location(self, du_id):
        return self.locations[du_id]

    def age_offset_ms(self, du_id):
        if self.locations[du_id] == LOCATION_CU:
            return self.cfg.cu_extra_delay_ttis * self.tti_ms
        return 0.0

    def cu_dus(self):
        """DU ids currently coordinated at the CU, in id order."""
        return [du for du in self.du_ids
                if self.locations[du] == LOCATION_CU]

    def record_samples(self, du_id, samples):
        self._samples[du_id].extend(samples)

    def is_epoch_boundary(self, tti):
        return tti % self.cfg.epoch_ttis == 0

    def decide_epoch(self, tti, du_queues):
        """Close out the last epoch, learn, and pick this epoch's locations.

        `du_queues` maps each DU id to the RLC queues it schedules.
        Returns the PlacementEvents for the ledger.
        """
        cu_fraction = len(self.cu_dus()) / len(self.du_ids)
        events = []
        for du in self.du_ids:
            shares, _, urllc_share, _ = queue_mix(du_queues[du], tti, self.tti_ms)
            if self.forced is not None:
                applied = self.forced
            else:
                obs = build_placement_observation(
                    du_queues[du], tti, self.locations[du], cu_fraction,
                    self.tti_ms)
                pending = self._pending.pop(du, None)
                if pending is not None and self.cfg.training:
                    pending.reward = epoch_reward(
                        self._samples[du], self.locations[du],
                        self.cfg.tau, self.cfg.lam)
                    pending.next_obs = obs
                    delta = self.agent.update_critic(pending)
                    self.agent.update_actor(pending, delta)
                probs = self.agent.action_distribution(obs)
                action = select_action(probs, self.cfg.resolve_mode(), self.rng)
                applied = action
                if self.cfg.pin is not None:
                    applied = LOCATION_NAMES.index(self.cfg.pin)
                self._pending[du] = TransitionRecord(
                    obs=obs, action_index=action, reward=0.0, next_obs=obs)
            self._samples[du] = []
            self.locations[du] = applied
            events.append(PlacementEvent(
                tti=tti, du_id=du, location=applied,
                urllc_share=urllc_share, class_shares=shares))
        return events


def relocation_ratio(events, class_weights_key=None, urllc_threshold=None,
                     tti_range=None):
    """DU/CU fractions over a set of placement events.

    Optionally restrict to a [start, end) TTI range, weight by a traffic
    class's queued share, or keep only URLLC-dominated events. Returns
    (du_ratio, cu_ratio) or None when nothing qualifies.
    """
    total = 0.0
    at_du = 0.0
    for ev in events:
        if tti_range is not None and not (tti_range[0] <= ev.tti < tti_range[1]):
            continue
        if urllc_threshold is not None and ev.urllc_share <= urllc_threshold:
            continue
        w = 1.0
        if class_weights_key is not None:
            w = ev.class_shares.get(class_weights_key, 0.0)
        if w <= 0.0:
            continue
        total += w
        if ev.location == LOCATION_DU:
            at_du += w
    if total == 0.0:
        return None
    return at_du / total, 1.0 - at_du / total
