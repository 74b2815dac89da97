"""The TTI loop: mobility -> arrivals -> placement epoch -> per-cell
scheduling -> service -> expiry -> accounting.

Each run owns one seed, forked into named RNG streams (topology,
channel, traffic, mobility, the two policy streams and the agents'
weight init) so that one module's draw count never perturbs another's.
That isolation is what makes the nf-du / nf-cu baselines bitwise
comparable with a pinned dynamic run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .a2c import A2cAgent
from .config import SimConfig, validate_config
from .metrics import MetricsLedger, aggregate_rows, ledger_rows
from .placement import (
    LOCATION_CU,
    LOCATION_DU,
    N_PLACEMENT_FEATURES,
    PlacementController,
)
from .ran import (
    ChannelConfig,
    InterferenceView,
    UNASSIGNED,
    build_interference_view,
    compute_cqi,
    drop_ues,
    grid_topology,
    step_mobility,
)
from .scheduler import CellTti, schedule_tti
from .traffic import RlcQueue, class_of_qci, make_flow

# spawn keys for the named RNG streams
_STREAMS = {"topology": 0, "channel": 1, "traffic": 2, "mobility": 3,
            "sched_policy": 4, "placement_policy": 5, "sched_init": 6,
            "placement_init": 7}


class AuditError(RuntimeError):
    """A per-TTI simulation invariant failed."""


def named_stream(seed, name, *extra):
    key = (_STREAMS[name],) + tuple(extra)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def stream_seed(seed, name, *extra):
    """Stable integer seed derived from a named stream position."""
    key = (_STREAMS[name],) + tuple(extra)
    return int(np.random.SeedSequence(seed, spawn_key=key).generate_state(1)[0])


def assign_traffic_classes(cfg: SimConfig):
    """Traffic class per UE id, by scenario.

    fixed: an AR share equal to the URLLC density, the rest live video.
    mobile: that density becomes V2X vehicles; non-vehicles split between
    AR and video by the configured AR share.
    """
    n = cfg.n_ues
    if cfg.scenario == "fixed":
        n_ar = round(cfg.urllc_density * n)
        return ["ar"] * n_ar + ["video"] * (n - n_ar)
    n_v2x = round(cfg.urllc_density * n)
    n_ar = round(cfg.traffic.ar_share_nonvehicle * (n - n_v2x))
    return ["v2x"] * n_v2x + ["ar"] * n_ar + ["video"] * (n - n_v2x - n_ar)


class Simulation:
    """One seeded run over cfg.ttis TTIs."""

    def __init__(self, cfg: SimConfig, run_index=0):
        self.cfg = cfg
        self.run_seed = cfg.seed + run_index
        seed = self.run_seed

        self.cells, self.bounds = grid_topology(
            cfg.n_cells, cfg.ran.cell_spacing_m, cfg.n_rbg)
        self.channel_cfg = ChannelConfig(
            path_loss_exponent=cfg.ran.path_loss_exponent,
            ref_distance_m=cfg.ran.ref_distance_m,
            near_snr_db=cfg.ran.near_snr_db,
            max_radius_m=cfg.ran.max_radius_m,
            shadow_sigma_db=cfg.ran.shadow_sigma_db,
            interference_cqi_penalty=cfg.ran.interference_cqi_penalty)

        self.rng_channel = named_stream(seed, "channel")
        self.rng_traffic = named_stream(seed, "traffic")
        self.rng_mobility = named_stream(seed, "mobility")
        self.rng_sched = named_stream(seed, "sched_policy")
        self.rng_placement = named_stream(seed, "placement_policy")

        self.ues = drop_ues(cfg.n_ues, self.cells, self.bounds,
                            named_stream(seed, "topology"))
        classes = assign_traffic_classes(cfg)
        self.queues = {}
        for ue, cls in zip(self.ues, classes):
            flow = make_flow(cls, cfg.traffic.ue_rate_bps,
                             cfg.traffic.packet_size_bits)
            self.queues[ue.ue_id] = RlcQueue(flow, cfg.tti_ms)
            if cfg.scenario == "mobile" and cls == "v2x":
                ue.speed_mps = cfg.ran.vehicle_speed_mps

        # network-wide arrival throttle ("traffic stream per TTI")
        lam_total = sum(q.flow.mean_rate_bps * cfg.tti_ms / 1000.0
                        / q.flow.packet_size_bits for q in self.queues.values())
        cap = cfg.traffic.arrival_cap_events_per_tti
        self.rate_scale = min(1.0, cap / lam_total) if lam_total > cap > 0 else 1.0

        obs_dim = cfg.sched.obs_dim()
        self.sched_agents = {
            cell.du_id: A2cAgent.build(
                obs_dim, cfg.sched.slot_count, cfg.a2c.actor_hidden,
                cfg.a2c.critic_hidden,
                rng_seed=stream_seed(seed, "sched_init", cell.du_id),
                gamma=cfg.a2c.gamma, lr_actor=cfg.a2c.lr_actor,
                lr_critic=cfg.a2c.lr_critic, clip_norm=cfg.a2c.clip_norm)
            for cell in self.cells}

        forced = {"nf-du": LOCATION_DU, "nf-cu": LOCATION_CU}.get(cfg.mode)
        agent = None
        if forced is None:
            agent = A2cAgent.build(
                N_PLACEMENT_FEATURES, 2, cfg.a2c.actor_hidden,
                cfg.a2c.critic_hidden,
                rng_seed=stream_seed(seed, "placement_init"),
                gamma=cfg.a2c.gamma, lr_actor=cfg.a2c.lr_actor,
                lr_critic=cfg.a2c.lr_critic, clip_norm=cfg.a2c.clip_norm)
        self.placement = PlacementController(
            [c.du_id for c in self.cells], cfg.placement, agent,
            self.rng_placement, forced=forced, tti_ms=cfg.tti_ms)

        self.ledger = MetricsLedger(cfg.window_ttis, cfg.tti_ms)
        self.prev_allocations = {}
        self.interference_events = 0

    # ------------------------------------------------------------- helpers

    def cell_ues(self, cell_id):
        return [ue for ue in self.ues if ue.serving_cell_id == cell_id]

    def du_queues(self):
        return {cell.du_id: [self.queues[ue.ue_id]
                             for ue in self.cell_ues(cell.cell_id)]
                for cell in self.cells}

    def _class_of(self, ue_id):
        return class_of_qci(self.queues[ue_id].flow.qci)

    # ----------------------------------------------------------------- TTI

    def step(self, t):
        cfg = self.cfg
        tti_s = cfg.tti_ms / 1000.0

        # mobility (vehicles only; fixed UEs have zero speed)
        for ue in self.ues:
            step_mobility(ue, tti_s, self.bounds, self.cells, self.rng_mobility)

        # arrivals, in UE id order
        for ue in self.ues:
            q = self.queues[ue.ue_id]
            fresh = q.generate_arrivals(t, self.rng_traffic, self.rate_scale)
            if fresh:
                self.ledger.record_arrivals(
                    t, self._class_of(ue.ue_id), len(fresh),
                    sum(p.size_bits for p in fresh))

        # placement epoch
        if self.placement.is_epoch_boundary(t):
            events = self.placement.decide_epoch(t, self.du_queues())
            self.ledger.record_placements(events)

        # channel state from last TTI's allocations
        view = build_interference_view(self.prev_allocations) \
            if self.prev_allocations else InterferenceView.empty()
        self.interference_events += view.collision_count()
        cell_by_id = {c.cell_id: c for c in self.cells}
        for ue in self.ues:
            ue.cqi_per_rbg = compute_cqi(
                ue, cell_by_id[ue.serving_cell_id], view, self.channel_cfg,
                self.rng_channel)

        # per-cell scheduling; CU-placed cells coordinate in DU id order
        cu_group = set(self.placement.cu_dus())
        cu_taken = set()
        allocations = {}
        grants = []   # (cell_id, ue_id, bits) in scheduling order
        for cell in self.cells:
            du = cell.du_id
            ctx = CellTti(
                cell=cell, ues=self.cell_ues(cell.cell_id),
                queues=self.queues, now=t, tti_ms=cfg.tti_ms,
                age_offset_ms=self.placement.age_offset_ms(du),
                blocked_rbgs=set(cu_taken) if du in cu_group else set())
            out = schedule_tti(self.sched_agents[du], ctx, cfg.sched,
                               self.rng_sched)
            allocations[cell.cell_id] = out.allocation
            if du in cu_group:
                cu_taken.update(
                    int(r) for r in np.nonzero(out.allocation != UNASSIGNED)[0])
            for ue_id in sorted(out.granted_bits):
                grants.append((cell.cell_id, ue_id, out.granted_bits[ue_id]))

        # service; every resolved packet scores a placement reward sample:
        # delivered in budget -> R3 1, delivered late or expired -> R3 0
        for cell_id, ue_id, bits in grants:
            du = cell_by_id[cell_id].du_id
            extra = self.placement.age_offset_ms(du)
            delivered, expired, _ = self.queues[ue_id].serve(bits, t, extra)
            cls = self._class_of(ue_id)
            urllc = 1 if self.queues[ue_id].flow.is_urllc else 0
            budget = self.queues[ue_id].flow.delay_budget_ms
            for p in delivered:
                age = p.age_ms(t, cfg.tti_ms) + extra
                if cfg.audit and age > budget:
                    raise AuditError(
                        f"TTI {t}: delivered packet over budget ({age} ms "
                        f"against {budget} ms)")
                self.ledger.record_delivery(t, cls, p.size_bits, age)
            if expired:
                self.ledger.record_drop(t, cls, len(expired),
                                        sum(p.size_bits for p in expired))
            self.placement.record_samples(
                du, [(urllc, 1)] * len(delivered) + [(urllc, 0)] * len(expired))

        # expiry
        for ue in self.ues:
            du = cell_by_id[ue.serving_cell_id].du_id
            dropped = self.queues[ue.ue_id].drop_expired(
                t, self.placement.age_offset_ms(du))
            if dropped:
                self.ledger.record_drop(t, self._class_of(ue.ue_id),
                                        len(dropped),
                                        sum(p.size_bits for p in dropped))
                urllc = 1 if self.queues[ue.ue_id].flow.is_urllc else 0
                self.placement.record_samples(du, [(urllc, 0)] * len(dropped))

        self.prev_allocations = allocations
        if cfg.audit:
            self._audit(t, allocations)

    def _audit(self, t, allocations):
        # conservation per class, in packets and in bits
        queued = {}
        queued_bits = {}
        for ue_id, q in self.queues.items():
            cls = self._class_of(ue_id)
            queued[cls] = queued.get(cls, 0) + len(q)
            queued_bits[cls] = queued_bits.get(cls, 0) + q.queued_bits
        for cls, tot in self.ledger.totals.items():
            settled = tot.delivered_packets + tot.dropped_packets
            if tot.arrived_packets != settled + queued.get(cls, 0):
                raise AuditError(
                    f"TTI {t}: packet conservation broken for {cls}")
            settled_bits = tot.delivered_bits + tot.dropped_bits
            if tot.arrived_bits != settled_bits + queued_bits.get(cls, 0):
                raise AuditError(f"TTI {t}: bit conservation broken for {cls}")
        # every granted RBG belongs to a UE this cell serves
        for cell_id, alloc in allocations.items():
            for ue_id in alloc:
                if ue_id == UNASSIGNED:
                    continue
                if self.ues[ue_id].serving_cell_id != cell_id:
                    raise AuditError(
                        f"TTI {t}: cell {cell_id} granted an RBG to foreign "
                        f"UE {ue_id}")
        # arena containment
        (xmin, ymin), (xmax, ymax) = self.bounds
        for ue in self.ues:
            if not (xmin <= ue.position[0] <= xmax
                    and ymin <= ue.position[1] <= ymax):
                raise AuditError(f"TTI {t}: UE {ue.ue_id} left the arena")

    def run(self):
        for t in range(self.cfg.ttis):
            self.step(t)
        return self.ledger


@dataclass
class BatchResult:
    config: SimConfig
    ledgers: list
    rows_per_run: list
    aggregate: list

    def tail_range(self):
        """The converged-half TTI range used for summary comparisons."""
        return (self.config.ttis // 2, self.config.ttis)


def run_batch(cfg: SimConfig, allow_out_of_envelope=False) -> BatchResult:
    """Execute cfg.runs independent simulations with derived seeds seed+i."""
    validate_config(cfg, allow_out_of_envelope)
    ledgers = []
    for i in range(cfg.runs):
        ledgers.append(Simulation(cfg, run_index=i).run())
    rows = [ledger_rows(led, cfg.mode) for led in ledgers]
    return BatchResult(config=cfg, ledgers=ledgers, rows_per_run=rows,
                       aggregate=aggregate_rows(rows))
