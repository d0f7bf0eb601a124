"""Deterministic synthetic flows and event streams.

Flow features are drawn per class as ``centroid * exp(s * z - s^2 / 2)``
with ``s = noise_level * cv`` so every feature's expected value is exactly
its class centroid. Volume features additionally share one per-flow factor
of the same form (scale ``noise_level * VOLUME_CV``), which keeps byte and
packet ratios informative while raw totals get noisier. After sampling,
``pkt_len_min``/``pkt_len_max`` are clamped around ``pkt_len_mean``.

DOS, OTHER and BRUTEFORCE mimic a SYN flood, a stealth port scan and an SSH
password-guessing run. BENIGN, INJECTION, RCE and HIJACKING are invented
but distinct profiles. None of the numbers are measurements.
"""

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import BadSpec
from .flows import CANONICAL_FEATURES, GROUP_NAMES, AttackGroup, FlowRecord, LabeledDataset
from .sentinel import AuthAttempt, FlowSeen, ResourceSample, event_to_dict

GENERATOR_VERSION = "1.0"
CLASS_CV = 1.5
VOLUME_CV = 1.0
VOLUME_FEATURES = (
    "fwd_pkts", "bwd_pkts", "fwd_bytes", "bwd_bytes",
    "header_len_fwd", "header_len_bwd",
)

# One row per class, columns in CANONICAL_FEATURES order. duration_s puts
# DOS/BRUTEFORCE/OTHER (short), INJECTION/RCE (about 1 s) and
# BENIGN/HIJACKING (long sessions) on three well separated levels.
CENTROIDS = {
    AttackGroup.BENIGN: (
        20.0, 12, 14, 1200, 9000, 40, 1400, 420, 380, 0.40, 0.30, 0.35, 0.30,
        1, 24, 2, 0.2, 6, 0, 1.2, 0.8, 3.0, 400, 460,
    ),
    AttackGroup.DOS: (
        0.05, 40, 1, 2400, 60, 20, 200, 58, 6, 0.0005, 0.0003, 0.01, 0.005,
        40, 0.5, 0.1, 4, 0.1, 1.5, 0.05, 0.005, 0, 1600, 40,
    ),
    AttackGroup.BRUTEFORCE: (
        0.05, 14, 16, 1500, 2600, 40, 700, 150, 120, 0.004, 0.003, 0.003, 0.002,
        1, 28, 2, 0.5, 10, 0, 1.15, 0.02, 0.01, 460, 520,
    ),
    AttackGroup.INJECTION: (
        1.0, 8, 8, 2400, 3500, 40, 1400, 360, 420, 0.15, 0.10, 0.12, 0.10,
        1, 15, 2, 0.2, 4, 0, 1.5, 0.3, 0.6, 260, 260,
    ),
    AttackGroup.HIJACKING: (
        20.0, 60, 58, 30000, 28000, 60, 1500, 480, 300, 0.60, 0.90, 0.60, 3.0,
        1, 110, 1, 1.2, 20, 0, 1.0, 4.0, 20.0, 2000, 1900,
    ),
    AttackGroup.RCE: (
        1.0, 10, 9, 5200, 2200, 40, 1460, 520, 500, 0.25, 0.20, 0.20, 0.20,
        1, 18, 2, 0.3, 6, 0, 0.2, 0.6, 1.2, 330, 300,
    ),
    AttackGroup.OTHER: (
        0.05, 1.5, 1, 60, 40, 12, 160, 48, 4, 0.01, 0.005, 0.01, 0.005,
        1, 0.3, 0.05, 1, 0, 0, 0.7, 0.01, 0, 40, 20,
    ),
}

_COL = {name: i for i, name in enumerate(CANONICAL_FEATURES)}
_VOLUME_IDX = np.array([_COL[n] for n in VOLUME_FEATURES])


def centroid_matrix():
    return np.array([CENTROIDS[g] for g in AttackGroup], dtype=np.float64)


def parameter_table_markdown():
    """The centroid table as Markdown, for the generator documentation."""
    head = "| feature | " + " | ".join(GROUP_NAMES) + " |"
    rule = "|---" * (len(GROUP_NAMES) + 1) + "|"
    cm = centroid_matrix()
    rows = [
        f"| {name} | " + " | ".join(f"{cm[g, j]:g}" for g in range(len(GROUP_NAMES))) + " |"
        for j, name in enumerate(CANONICAL_FEATURES)
    ]
    return "\n".join([head, rule, *rows]) + "\n"


class Scenario(str, enum.Enum):
    Benign = "Benign"
    PortScan = "PortScan"
    SshBruteForce = "SshBruteForce"
    SynFlood = "SynFlood"
    MixedDataset = "MixedDataset"


@dataclass(frozen=True)
class ScenarioSpec:
    scenario: Scenario = Scenario.MixedDataset
    n_per_class: dict = field(default_factory=dict)
    seed: int = 0
    noise_level: float = 0.2
    n_events: int = None
    duration_s: float = None
    start_time: float = 0.0

    def __post_init__(self):
        try:
            object.__setattr__(self, "scenario", Scenario(self.scenario))
        except ValueError:
            raise BadSpec(f"unknown scenario {self.scenario!r}") from None
        counts = {}
        for key, count in dict(self.n_per_class).items():
            try:
                group = AttackGroup[key] if isinstance(key, str) else AttackGroup(key)
            except (KeyError, ValueError):
                raise BadSpec(f"unknown class {key!r} in n_per_class") from None
            if isinstance(count, bool) or not isinstance(count, int) or count < 0:
                raise BadSpec(f"count for {group.name} must be a non-negative integer")
            counts[group] = count
        object.__setattr__(self, "n_per_class", counts)
        if not 0.0 <= float(self.noise_level) <= 1.0:
            raise BadSpec("noise_level must lie in [0, 1]")
        if self.n_events is not None and (not isinstance(self.n_events, int) or self.n_events < 1):
            raise BadSpec("n_events must be a positive integer")
        if self.duration_s is not None and not self.duration_s > 0:
            raise BadSpec("duration_s must be positive")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise BadSpec("seed must be a non-negative integer")

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise BadSpec("scenario spec must be a JSON object")
        allowed = {"scenario", "n_per_class", "seed", "noise_level", "n_events", "duration_s", "start_time"}
        unknown = set(d) - allowed
        if unknown:
            raise BadSpec(f"unknown spec fields {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise BadSpec(str(exc)) from None

    def to_dict(self):
        return {
            "scenario": self.scenario.value,
            "n_per_class": {g.name: c for g, c in sorted(self.n_per_class.items())},
            "seed": self.seed,
            "noise_level": self.noise_level,
            "n_events": self.n_events,
            "duration_s": self.duration_s,
            "start_time": self.start_time,
        }


def sample_features(group, n, rng, noise_level):
    """(n, 24) feature rows for one class."""
    c = np.asarray(CENTROIDS[AttackGroup(group)], dtype=np.float64)
    s = noise_level * CLASS_CV
    rows = c * np.exp(s * rng.standard_normal((n, c.size)) - 0.5 * s * s)
    sv = noise_level * VOLUME_CV
    vol = np.exp(sv * rng.standard_normal(n) - 0.5 * sv * sv)
    rows[:, _VOLUME_IDX] *= vol[:, None]
    mean = rows[:, _COL["pkt_len_mean"]]
    rows[:, _COL["pkt_len_min"]] = np.minimum(rows[:, _COL["pkt_len_min"]], mean)
    rows[:, _COL["pkt_len_max"]] = np.maximum(rows[:, _COL["pkt_len_max"]], mean)
    return rows


def gen_flows(spec):
    """Labelled dataset with ``spec.n_per_class`` rows per class, shuffled."""
    if not any(spec.n_per_class.values()):
        raise BadSpec("n_per_class must request at least one row")
    rng = np.random.default_rng(spec.seed)
    rows, labels = [], []
    for group in AttackGroup:
        n = spec.n_per_class.get(group, 0)
        if n:
            rows.append(sample_features(group, n, rng, spec.noise_level))
            labels.append(np.full(n, int(group)))
    rows, labels = np.vstack(rows), np.concatenate(labels)
    perm = rng.permutation(labels.size)
    return LabeledDataset(CANONICAL_FEATURES, rows[perm], labels[perm])


# -- event streams -------------------------------------------------------------

ATTACKER_IP = "203.0.113.7"
SCANNER_IP = "203.0.113.50"
SERVER_IP = "10.0.0.10"


def _flow(rng, group, t, src, dst_port, noise, seq, protocol="TCP"):
    feats = sample_features(group, 1, rng, noise)[0]
    return FlowRecord(
        flow_id=f"F{seq:07d}",
        src_ip=src,
        dst_ip=SERVER_IP,
        src_port=int(rng.integers(1024, 65536)),
        dst_port=int(dst_port),
        protocol=protocol,
        timestamp=float(t),
        features=feats,
        raw_label=GROUP_NAMES[group],
    )


def _times(rng, n, start, duration, jitter=True):
    base = start + duration * (np.arange(n) + 1) / (n + 1)
    if jitter:
        base = base + rng.uniform(-0.4, 0.4, n) * duration / (n + 1)
    return np.sort(base)


def _benign_events(spec, rng, start, seq):
    n = spec.n_events or 200
    duration = spec.duration_s or 600.0
    times = _times(rng, n, start, duration)
    hosts = [f"10.0.1.{i}" for i in range(2, 22)]
    failed = {h: 0 for h in hosts}
    events = []
    for i, t in enumerate(times):
        kind = i % 4
        if kind == 0:
            events.append(ResourceSample(
                float(t), cpu_pct=float(rng.uniform(15, 60)), mem_pct=float(rng.uniform(30, 55)),
                net_in_bps=float(rng.uniform(1e4, 1e6)), net_out_bps=float(rng.uniform(1e4, 5e5)),
            ))
        elif kind == 1:
            host = hosts[int(rng.integers(len(hosts)))]
            # a user mistypes a password at most twice over the whole stream
            success = bool(failed[host] >= 2 or rng.random() > 0.1)
            failed[host] += not success
            events.append(AuthAttempt(float(t), host, success, "ssh"))
        else:
            host = hosts[int(rng.integers(len(hosts)))]
            port = (80, 443, 53, 22)[int(rng.integers(4))]
            seq += 1
            events.append(FlowSeen(float(t), _flow(rng, AttackGroup.BENIGN, t, host, port, spec.noise_level, seq)))
    return events, seq


def _bruteforce_events(spec, rng, start, seq):
    n = spec.n_events or 8
    duration = spec.duration_s or 60.0
    times = _times(rng, n, start, duration, jitter=False)
    return [AuthAttempt(float(t), ATTACKER_IP, False, "ssh") for t in times], seq


def _portscan_events(spec, rng, start, seq):
    n = spec.n_events or 100
    duration = spec.duration_s or 30.0
    times = _times(rng, n, start, duration)
    ports = rng.permutation(np.arange(1, 1025))[:n] if n <= 1024 else (np.arange(n) % 65535) + 1
    events = []
    for t, port in zip(times, ports):
        seq += 1
        events.append(FlowSeen(float(t), _flow(rng, AttackGroup.OTHER, t, SCANNER_IP, port, spec.noise_level, seq)))
    return events, seq


def _synflood_events(spec, rng, start, seq):
    n = spec.n_events or 300
    duration = spec.duration_s or 20.0
    events = []
    for t in _times(rng, n, start, duration):
        seq += 1
        src = f"198.51.100.{int(rng.integers(1, 255))}"
        events.append(FlowSeen(float(t), _flow(rng, AttackGroup.DOS, t, src, 80, spec.noise_level, seq)))
    n_samples = max(8, int(duration))
    for i, t in enumerate(_times(rng, n_samples, start, duration, jitter=False)):
        level = min(1.0, (i + 1) / (0.3 * n_samples))
        events.append(ResourceSample(
            float(t), cpu_pct=float(min(100.0, 30 + 68 * level + rng.uniform(0, 2))),
            mem_pct=float(min(100.0, 40 + 45 * level)),
            net_in_bps=float(2e6 + 4e7 * level), net_out_bps=float(1e5),
            dropped_pkts=float(500 * level), malformed_pkts=float(50 * level),
        ))
    events.sort(key=lambda e: e.timestamp)
    return events, seq


_BUILDERS = {
    Scenario.Benign: _benign_events,
    Scenario.SshBruteForce: _bruteforce_events,
    Scenario.PortScan: _portscan_events,
    Scenario.SynFlood: _synflood_events,
}


def gen_events(spec):
    """Event list for the scenario; timestamps strictly increase.

    MixedDataset plays benign traffic, then the brute-force, port-scan and
    SYN-flood segments back to back, each with its default size.
    """
    rng = np.random.default_rng(spec.seed)
    if spec.scenario is Scenario.MixedDataset:
        plan = [Scenario.Benign, Scenario.SshBruteForce, Scenario.PortScan, Scenario.SynFlood]
        sub = ScenarioSpec(noise_level=spec.noise_level, seed=spec.seed)
    else:
        plan, sub = [spec.scenario], spec
    events, seq, start = [], 0, float(spec.start_time)
    for scenario in plan:
        part, seq = _BUILDERS[scenario](sub, rng, start, seq)
        events.extend(part)
        start = (events[-1].timestamp if events else start) + 1.0
    out, last = [], None
    for ev in events:
        t = ev.timestamp
        if last is not None and t <= last:
            t = last + 1e-3
            ev = type(ev)(**{**ev.__dict__, "timestamp": t})
        out.append(ev)
        last = t
    return out


def write_events(events, path):
    with open(path, "w", encoding="utf-8") as fh:
        for ev in events:
            fh.write(json.dumps(event_to_dict(ev), sort_keys=True) + "\n")
