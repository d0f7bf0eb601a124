"""Event-time detection rules and the ban state machine.

Events are replayed in timestamp order. Each rule fires at the event that
completes its condition, never later:

* BruteForce: ``maxretry`` failed logins from one IP inside ``findtime_s``
  bans the IP for ``bantime_s * escalation ** (ban_count - 1)``.
* PortScan: one source touching ``portscan_distinct_ports`` distinct
  destination ports inside ``portscan_window_s``.
* SynFlood: total SYNs over ``syn_window_s`` divided by the window length
  exceeds ``syn_rate_threshold_per_s``.
* CpuHigh: ``cpu_consecutive_samples`` samples in a row above
  ``cpu_trigger_pct``.

Threshold rules fire once per episode and re-arm when the condition clears.
Events whose source is banned are recorded as suppressed and feed no rule.
"""

import json
import logging
from collections import Counter, deque
from dataclasses import asdict, dataclass, field, fields
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, DataError, TimeRegression
from .flows import GROUP_NAMES, AttackGroup, FlowRecord

log = logging.getLogger(__name__)

CRITICAL_GROUPS = frozenset({AttackGroup.RCE, AttackGroup.HIJACKING, AttackGroup.DOS})


@dataclass(frozen=True)
class RuleConfig:
    maxretry: int = 5
    findtime_s: float = 600.0
    bantime_s: float = 3600.0
    ban_escalation_factor: float = 2.0
    portscan_distinct_ports: int = 20
    portscan_window_s: float = 60.0
    syn_rate_threshold_per_s: float = 100.0
    syn_window_s: float = 10.0
    cpu_trigger_pct: float = 90.0
    cpu_consecutive_samples: int = 5

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
                raise ConfigError(f"rule {f.name} must be a positive number, got {v!r}")
        if self.ban_escalation_factor < 1.0:
            raise ConfigError("ban_escalation_factor must be >= 1")
        for name in ("maxretry", "portscan_distinct_ports", "cpu_consecutive_samples"):
            if int(getattr(self, name)) != getattr(self, name):
                raise ConfigError(f"rule {name} must be an integer")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown rule settings: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self):
        return asdict(self)


def load_rule_config(path):
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: rule config must be a JSON object")
    return RuleConfig.from_dict(data)


def write_rule_config(cfg, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass(frozen=True)
class AuthAttempt:
    timestamp: float
    source_ip: str
    success: bool
    service: str = "ssh"

    @property
    def source(self):
        return self.source_ip


@dataclass(frozen=True)
class FlowSeen:
    timestamp: float
    flow: FlowRecord

    @property
    def source(self):
        return self.flow.src_ip


@dataclass(frozen=True)
class ResourceSample:
    timestamp: float
    cpu_pct: float
    mem_pct: float
    net_in_bps: float = 0.0
    net_out_bps: float = 0.0
    dropped_pkts: float = 0.0
    malformed_pkts: float = 0.0

    def __post_init__(self):
        for name in ("cpu_pct", "mem_pct"):
            if not 0.0 <= getattr(self, name) <= 100.0:
                raise DataError(f"{name} must lie in [0, 100]")

    @property
    def source(self):
        return None


def event_from_dict(d):
    kind = d.get("kind")
    try:
        if kind == "AuthAttempt":
            return AuthAttempt(
                float(d["timestamp"]), d["source_ip"], bool(d["success"]), d.get("service", "ssh")
            )
        if kind == "FlowSeen":
            return FlowSeen(float(d["timestamp"]), FlowRecord.from_dict(d["flow"]))
        if kind == "ResourceSample":
            keys = [f.name for f in fields(ResourceSample)]
            return ResourceSample(**{k: float(d[k]) for k in keys if k in d})
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed {kind} event: {exc}") from None
    raise DataError(f"unknown event kind {kind!r}")


def event_to_dict(event):
    if isinstance(event, FlowSeen):
        return {"kind": "FlowSeen", "timestamp": event.timestamp, "flow": event.flow.to_dict()}
    d = asdict(event)
    d["kind"] = type(event).__name__
    return d


@dataclass(frozen=True)
class BanEntry:
    ip: str
    banned_at: float
    expires_at: float
    reason: str
    ban_count: int

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class AlertRecord:
    alert_id: str
    rule: str
    source_ip: str
    severity: str
    evidence: dict
    raised_at: float
    detection_latency_events: int = 0
    event_index: int = None

    def to_dict(self):
        return asdict(self)


class IngestResult(NamedTuple):
    alerts: list
    bans: list
    suppressed: bool


@dataclass
class _SourceWindow:
    events: deque = field(default_factory=deque)
    ports: Counter = field(default_factory=Counter)
    alerted: bool = False


class Sentinel:
    """Single-writer state machine over a time-ordered event stream."""

    def __init__(self, config=None):
        self.config = config or RuleConfig()
        self.last_ts = None
        self.n_events = 0
        self.active_bans = {}
        self.ban_counts = Counter()
        self.alerts = []
        self.bans = []
        self.suppressed = []
        self._failures = {}
        self._scans = {}
        self._syn = deque()
        self._syn_total = 0.0
        self._syn_alerted = False
        self._cpu_streak = 0
        self._cpu_alerted = False
        self._last_sample = None

    # -- helpers -----------------------------------------------------------
    def _alert(self, rule, severity, raised_at, evidence, source_ip=None):
        alert = AlertRecord(
            alert_id=f"A{len(self.alerts) + 1:06d}",
            rule=rule,
            source_ip=source_ip,
            severity=severity,
            evidence=evidence,
            raised_at=raised_at,
            detection_latency_events=0,
            event_index=self.n_events - 1,
        )
        self.alerts.append(alert)
        log.info("alert %s %s %s", alert.alert_id, rule, source_ip or "")
        return alert

    def is_banned(self, ip, now):
        ban = self.active_bans.get(ip)
        return ban is not None and ban.expires_at > now

    def expire_bans(self, now):
        """Drop bans with ``expires_at <= now``; returns the removed entries."""
        gone = [ip for ip, ban in self.active_bans.items() if ban.expires_at <= now]
        return [self.active_bans.pop(ip) for ip in gone]

    # -- rules -------------------------------------------------------------
    def _on_auth(self, ev):
        if ev.success:
            return [], []
        cfg = self.config
        window = self._failures.setdefault(ev.source_ip, deque())
        window.append(ev.timestamp)
        while window[0] <= ev.timestamp - cfg.findtime_s:
            window.popleft()
        if len(window) < cfg.maxretry:
            return [], []
        self.ban_counts[ev.source_ip] += 1
        count = self.ban_counts[ev.source_ip]
        duration = cfg.bantime_s * cfg.ban_escalation_factor ** (count - 1)
        ban = BanEntry(
            ip=ev.source_ip,
            banned_at=ev.timestamp,
            expires_at=ev.timestamp + duration,
            reason=f"{len(window)} failed {ev.service} logins within {cfg.findtime_s:g}s",
            ban_count=count,
        )
        first_failure = window[0]
        window.clear()
        self.active_bans[ev.source_ip] = ban
        self.bans.append(ban)
        alert = self._alert(
            "BruteForce", "warning", ev.timestamp,
            {"failures": cfg.maxretry, "first_failure_at": first_failure,
             "service": ev.service, "ban_seconds": duration},
            source_ip=ev.source_ip,
        )
        return [alert], [ban]

    def _on_flow(self, ev):
        cfg = self.config
        flow = ev.flow
        alerts = []
        scan = self._scans.setdefault(flow.src_ip, _SourceWindow())
        scan.events.append((ev.timestamp, flow.dst_port))
        scan.ports[flow.dst_port] += 1
        while scan.events[0][0] <= ev.timestamp - cfg.portscan_window_s:
            _, port = scan.events.popleft()
            scan.ports[port] -= 1
            if not scan.ports[port]:
                del scan.ports[port]
        distinct = len(scan.ports)
        if distinct >= cfg.portscan_distinct_ports:
            if not scan.alerted:
                scan.alerted = True
                alerts.append(self._alert(
                    "PortScan", "warning", ev.timestamp,
                    {"distinct_ports": distinct, "window_s": cfg.portscan_window_s},
                    source_ip=flow.src_ip,
                ))
        else:
            scan.alerted = False

        syn = flow.feature_dict()["syn_count"]
        self._syn.append((ev.timestamp, syn, flow.src_ip))
        self._syn_total += syn
        return alerts

    def _on_sample(self, ev):
        self._last_sample = ev
        if ev.cpu_pct > self.config.cpu_trigger_pct:
            self._cpu_streak += 1
        else:
            self._cpu_streak = 0

    def _prune_syn(self, now):
        while self._syn and self._syn[0][0] <= now - self.config.syn_window_s:
            self._syn_total -= self._syn.popleft()[1]
        if not self._syn:
            self._syn_total = 0.0

    def syn_rate(self):
        return self._syn_total / self.config.syn_window_s

    def check_resource_triggers(self):
        """Fire CpuHigh / SynFlood for conditions that hold now and have not
        fired in the current episode."""
        cfg = self.config
        alerts = []
        now = self.last_ts
        if now is not None:
            self._prune_syn(now)
        if self._cpu_streak >= cfg.cpu_consecutive_samples:
            if not self._cpu_alerted:
                self._cpu_alerted = True
                s = self._last_sample
                alerts.append(self._alert(
                    "CpuHigh", "warning", now,
                    {"cpu_pct": s.cpu_pct, "mem_pct": s.mem_pct,
                     "consecutive_samples": self._cpu_streak,
                     "dropped_pkts": s.dropped_pkts, "malformed_pkts": s.malformed_pkts},
                ))
        else:
            self._cpu_alerted = False
        rate = self.syn_rate()
        if rate > cfg.syn_rate_threshold_per_s:
            if not self._syn_alerted:
                self._syn_alerted = True
                top = Counter()
                for _, syn, src in self._syn:
                    top[src] += syn
                src, _ = min(top.items(), key=lambda kv: (-kv[1], kv[0]))
                alerts.append(self._alert(
                    "SynFlood", "critical", now,
                    {"syn_rate_per_s": rate, "window_s": cfg.syn_window_s,
                     "flows_in_window": len(self._syn), "top_source": src},
                    source_ip=src,
                ))
        else:
            self._syn_alerted = False
        return alerts

    # -- entry points --------------------------------------------------------
    def ingest(self, event):
        """Apply one event; returns the alerts and bans it triggered."""
        t = event.timestamp
        if self.last_ts is not None and t < self.last_ts:
            raise TimeRegression(f"event at t={t} precedes previous t={self.last_ts}")
        self.last_ts = t
        self.n_events += 1
        self.expire_bans(t)
        src = event.source
        if src is not None and self.is_banned(src, t):
            self.suppressed.append(self.n_events - 1)
            return IngestResult([], [], True)
        alerts, bans = [], []
        if isinstance(event, AuthAttempt):
            alerts, bans = self._on_auth(event)
        elif isinstance(event, FlowSeen):
            alerts = self._on_flow(event)
            alerts += self.check_resource_triggers()
        elif isinstance(event, ResourceSample):
            self._on_sample(event)
            alerts = self.check_resource_triggers()
        else:
            raise DataError(f"unsupported event {event!r}")
        return IngestResult(alerts, bans, False)

    def attach_ml_verdict(self, flow, model, threshold=0.8):
        """Classify ``flow`` and raise MlVerdict for a confident attack.

        ``model.predict_proba`` must accept raw canonical feature rows.
        """
        if not 0.0 < threshold < 1.0:
            raise ConfigError("threshold must lie in (0, 1)")
        probs = np.asarray(model.predict_proba(np.asarray(flow.features)[None, :]))[0]
        cls = int(np.argmax(probs))
        if cls == AttackGroup.BENIGN or probs[cls] < threshold:
            return None
        group = AttackGroup(cls)
        return self._alert(
            "MlVerdict",
            "critical" if group in CRITICAL_GROUPS else "warning",
            flow.timestamp if self.last_ts is None else max(self.last_ts, flow.timestamp),
            {"predicted": GROUP_NAMES[cls], "probability": float(probs[cls]), "flow_id": flow.flow_id},
            source_ip=flow.src_ip,
        )


def read_events(path):
    """Yield (line_number, event) from a JSON Lines file."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"line {lineno}: invalid JSON ({exc})") from None
            try:
                yield lineno, event_from_dict(d)
            except DataError as exc:
                raise DataError(f"line {lineno}: {exc}") from None


def replay(events, config=None, model=None, threshold=0.8):
    """Run a sequence of ``(line_number, event)`` through a fresh Sentinel."""
    sentinel = Sentinel(config)
    for lineno, event in events:
        try:
            sentinel.ingest(event)
        except TimeRegression as exc:
            raise TimeRegression(f"line {lineno}: {exc}", line=lineno) from None
        if model is not None and isinstance(event, FlowSeen) and not (
            sentinel.suppressed and sentinel.suppressed[-1] == sentinel.n_events - 1
        ):
            sentinel.attach_ml_verdict(event.flow, model, threshold)
    return sentinel


def summarize(sentinel):
    by_rule = Counter(a.rule for a in sentinel.alerts)
    return {
        "events": sentinel.n_events,
        "alerts": len(sentinel.alerts),
        "bans": len(sentinel.bans),
        "suppressed_events": len(sentinel.suppressed),
        "alerts_by_rule": dict(sorted(by_rule.items())),
        "banned_ips": sorted({b.ip for b in sentinel.bans}),
    }
