"""Channel/delay/priority-aware RBG scheduler driven by an A2C policy.

One decision per RBG per TTI: the actor sees a fixed grid of UE slots
(CQI, HoL pressure, priority, URLLC flag, buffer fill) and picks the
slot to grant. Slots whose UE has no uncovered demand are masked out
and their features zero-filled. Rewards combine above-average channel
quality, URLLC service and budget compliance, each worth one point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .a2c import A2cAgent, TransitionRecord, select_action
from .ran import Cell, UNASSIGNED, rbg_capacity

N_SLOT_FEATURES = 5


@dataclass
class SchedulerConfig:
    slot_count: int = 10
    obs_buffer_cap_bits: int = 65536
    training: bool = True
    action_mode: str = "auto"    # auto: sample while training, greedy otherwise
    masking: bool = True         # off: raw softmax, invalid picks waste the RBG

    def obs_dim(self):
        return self.slot_count * N_SLOT_FEATURES

    def resolve_mode(self):
        if self.action_mode == "auto":
            return "sample" if self.training else "greedy"
        return self.action_mode


@dataclass
class CellTti:
    """One cell's scheduling inputs for one TTI.

    `age_offset_ms` is the placement processing delay added to every
    packet's effective age; `blocked_rbgs` are RBGs a coordinated peer
    cell already claimed this TTI.
    """
    cell: Cell
    ues: list                      # UEs served by this cell
    queues: dict                   # ue_id -> RlcQueue
    now: int
    tti_ms: float = 1.0
    age_offset_ms: float = 0.0
    blocked_rbgs: set = field(default_factory=set)


@dataclass
class TtiSchedule:
    allocation: np.ndarray                 # per RBG: ue_id or UNASSIGNED
    granted_bits: dict                     # ue_id -> bits granted this TTI
    transitions: list
    rewards: list                          # scheduler reward per assignment


def reward_r1(cqi_chosen, candidate_cqis):
    """1 when the granted UE's CQI strictly beats the candidate mean."""
    if len(candidate_cqis) < 1:
        raise ValueError("need at least one candidate")
    mean = sum(candidate_cqis) / len(candidate_cqis)
    return max(int(np.sign(cqi_chosen - mean)), 0)


def reward_r2(flow):
    return 1 if flow.is_urllc else 0


def reward_r3(hol_delay_ms, budget_ms):
    """Budget-compliance term: sinc(pi * floor(delay/budget)).

    The floor is 0 exactly when the packet is inside its budget, where
    sinc is 1; every later integer lands on a sinc zero.
    """
    if budget_ms <= 0:
        raise ValueError("budget must be positive")
    return 1 if math.floor(hol_delay_ms / budget_ms) == 0 else 0


def scheduler_reward(cqi_chosen, candidate_cqis, flow, hol_delay_ms):
    return (reward_r1(cqi_chosen, candidate_cqis)
            + reward_r2(flow)
            + reward_r3(hol_delay_ms, flow.delay_budget_ms))


def select_slot_ues(ctx: CellTti, cfg: SchedulerConfig):
    """Fixed per-TTI slot assignment: one backlogged UE per slot, by id.

    On overflow the most important UEs are kept (lowest QCI priority
    number, longest HoL first on ties).
    """
    backlogged = [ue for ue in ctx.ues
                  if len(ctx.queues[ue.ue_id]) > 0]
    if len(backlogged) > cfg.slot_count:
        backlogged.sort(key=lambda ue: (
            ctx.queues[ue.ue_id].flow.priority,
            -ctx.queues[ue.ue_id].hol_delay_ms(ctx.now, ctx.age_offset_ms),
            ue.ue_id))
        backlogged = backlogged[:cfg.slot_count]
    backlogged.sort(key=lambda ue: ue.ue_id)
    slots = backlogged + [None] * (cfg.slot_count - len(backlogged))
    return slots


def build_observation(ctx: CellTti, rbg, slot_ues, uncovered_bits, cfg):
    """Feature grid for one RBG decision; all entries in [0, 1]."""
    obs = np.zeros(cfg.obs_dim())
    for i, ue in enumerate(slot_ues):
        if ue is None:
            continue
        if uncovered_bits.get(ue.ue_id, 0) <= 0:
            continue  # demand already covered this TTI: slot goes dark
        q = ctx.queues[ue.ue_id]
        flow = q.flow
        hol = q.hol_delay_ms(ctx.now, ctx.age_offset_ms)
        base = i * N_SLOT_FEATURES
        obs[base + 0] = ue.cqi_per_rbg[rbg] / 15.0
        obs[base + 1] = min(hol / flow.delay_budget_ms, 2.0) / 2.0
        obs[base + 2] = 1.0 - flow.priority / 100.0
        obs[base + 3] = 1.0 if flow.is_urllc else 0.0
        obs[base + 4] = min(uncovered_bits[ue.ue_id] / cfg.obs_buffer_cap_bits, 1.0)
    return obs


def schedule_tti(agent: A2cAgent, ctx: CellTti, cfg: SchedulerConfig, rng):
    """Assign each RBG of the TTI and train the agent on the transitions.

    Decisions bootstrap within the TTI: each transition's next state is
    the following offered RBG's observation and the last one is terminal.
    Updates run after the decision loop, in decision order, critic first.
    """
    n_rbg = ctx.cell.n_rbg
    allocation = np.full(n_rbg, UNASSIGNED, dtype=int)
    slot_ues = select_slot_ues(ctx, cfg)
    uncovered = {ue.ue_id: ctx.queues[ue.ue_id].queued_remaining_bits
                 for ue in slot_ues if ue is not None}
    granted = {}
    transitions = []
    rewards = []
    mode = cfg.resolve_mode()

    for rbg in range(n_rbg):
        if rbg in ctx.blocked_rbgs:
            continue
        valid = np.array([ue is not None and uncovered.get(ue.ue_id, 0) > 0
                          for ue in slot_ues])
        if not valid.any():
            continue
        obs = build_observation(ctx, rbg, slot_ues, uncovered, cfg)
        mask = valid if cfg.masking else None
        probs = agent.action_distribution(obs, mask)
        action = select_action(probs, mode, rng)

        if valid[action]:
            ue = slot_ues[action]
            q = ctx.queues[ue.ue_id]
            candidate_cqis = [u.cqi_per_rbg[rbg]
                              for u, ok in zip(slot_ues, valid) if ok]
            hol = q.hol_delay_ms(ctx.now, ctx.age_offset_ms)
            reward = scheduler_reward(ue.cqi_per_rbg[rbg], candidate_cqis,
                                      q.flow, hol)
            allocation[rbg] = ue.ue_id
            cap = rbg_capacity(int(ue.cqi_per_rbg[rbg]))
            granted[ue.ue_id] = granted.get(ue.ue_id, 0) + cap
            uncovered[ue.ue_id] -= cap
        else:
            # only reachable with masking off: the RBG is wasted
            reward = 0

        if transitions:
            transitions[-1].next_obs = obs
        transitions.append(TransitionRecord(
            obs=obs, action_index=action, reward=float(reward),
            next_obs=obs, mask=mask))
        rewards.append(reward)

    if transitions:
        transitions[-1].terminal = True

    if cfg.training:
        for tr in transitions:
            delta = agent.update_critic(tr)
            agent.update_actor(tr, delta)

    return TtiSchedule(allocation=allocation, granted_bits=granted,
                       transitions=transitions, rewards=rewards)
