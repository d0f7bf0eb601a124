"""Flow records, the 7-group attack taxonomy and dataset CSV I/O."""

import csv
import enum
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyDataset,
    MissingLabelColumn,
    SchemaMismatch,
    UnknownLabel,
)

SCHEMA_VERSION = 1

CANONICAL_FEATURES = (
    "duration_s",
    "fwd_pkts",
    "bwd_pkts",
    "fwd_bytes",
    "bwd_bytes",
    "pkt_len_min",
    "pkt_len_max",
    "pkt_len_mean",
    "pkt_len_std",
    "fwd_iat_mean",
    "fwd_iat_std",
    "bwd_iat_mean",
    "bwd_iat_std",
    "syn_count",
    "ack_count",
    "fin_count",
    "rst_count",
    "psh_count",
    "urg_count",
    "down_up_ratio",
    "active_mean",
    "idle_mean",
    "header_len_fwd",
    "header_len_bwd",
)

# Counters and byte totals that must never be negative.
NONNEGATIVE_FEATURES = frozenset(CANONICAL_FEATURES)


class AttackGroup(enum.IntEnum):
    BENIGN = 0
    DOS = 1
    BRUTEFORCE = 2
    INJECTION = 3
    HIJACKING = 4
    RCE = 5
    OTHER = 6


N_CLASSES = len(AttackGroup)
GROUP_NAMES = tuple(g.name for g in AttackGroup)


class Protocol(str, enum.Enum):
    TCP = "TCP"
    UDP = "UDP"
    ICMP = "ICMP"


# Raw dataset labels grouped into the 7 categories. "DDoS-*" is handled as a
# prefix rule in map_raw_label.
RAW_LABEL_GROUPS = {
    AttackGroup.BENIGN: ("BENIGN",),
    AttackGroup.DOS: (
        "DoS Hulk",
        "DoS Slowhttptest",
        "Slowhttptest",
        "DoS GoldenEye",
        "GoldenEye",
        "DoS Slowloris",
        "Slowloris",
    ),
    AttackGroup.BRUTEFORCE: (
        "Bruteforce-Web",
        "Bruteforce-XSS",
        "FTP-Patator",
        "SSH-Patator",
        "Web Brute Force",
    ),
    AttackGroup.INJECTION: (
        "SQL Injection",
        "LDAP Injection",
        "SIP Injection",
        "Web SQL Injection",
    ),
    AttackGroup.HIJACKING: ("MITM", "Hijacking"),
    AttackGroup.RCE: ("RFI", "Exploit", "Cmd Injection", "Upload", "Backdoor"),
    AttackGroup.OTHER: ("Infiltration", "Bot", "PortScan", "Web XSS"),
}

_SEP = re.compile(r"[\s\-_]+")


def _normalize_label(raw):
    return _SEP.sub(" ", raw.strip()).strip().lower()


_LABEL_INDEX = {}
for _group, _names in RAW_LABEL_GROUPS.items():
    for _name in _names:
        _LABEL_INDEX[_normalize_label(_name)] = _group
# Group names themselves are accepted so saved datasets reload losslessly.
for _group in AttackGroup:
    _LABEL_INDEX.setdefault(_normalize_label(_group.name), _group)


def map_raw_label(raw, fallback_other=False):
    """Map a raw dataset label onto its :class:`AttackGroup`.

    Matching ignores case and treats runs of spaces, hyphens and underscores
    as a single separator. Anything starting with ``DDoS`` is a DOS.
    """
    if not isinstance(raw, str) or not raw.strip():
        raise UnknownLabel(f"empty label {raw!r}")
    key = _normalize_label(raw)
    group = _LABEL_INDEX.get(key)
    if group is not None:
        return group
    if key.startswith("ddos"):
        return AttackGroup.DOS
    if fallback_other:
        return AttackGroup.OTHER
    raise UnknownLabel(f"no attack group for label {raw!r}")


@dataclass(frozen=True)
class FlowRecord:
    flow_id: str
    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int
    protocol: Protocol
    timestamp: float
    features: tuple
    raw_label: str = None

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol(self.protocol))
        object.__setattr__(self, "features", tuple(float(v) for v in self.features))
        if len(self.features) != len(CANONICAL_FEATURES):
            raise SchemaMismatch(
                f"flow {self.flow_id}: expected {len(CANONICAL_FEATURES)} features, "
                f"got {len(self.features)}"
            )
        for port in (self.src_port, self.dst_port):
            if not 0 <= int(port) <= 65535:
                raise SchemaMismatch(f"flow {self.flow_id}: port {port} out of range")
        f = self.feature_dict()
        if any(v < 0 or not math.isfinite(v) for v in self.features):
            raise SchemaMismatch(f"flow {self.flow_id}: negative or non-finite feature")
        if f["fwd_pkts"] + f["bwd_pkts"] > 0 and not (
            f["pkt_len_min"] <= f["pkt_len_mean"] <= f["pkt_len_max"]
        ):
            raise SchemaMismatch(f"flow {self.flow_id}: packet length ordering violated")

    def feature_dict(self):
        return dict(zip(CANONICAL_FEATURES, self.features))

    def to_dict(self):
        return {
            "flow_id": self.flow_id,
            "src_ip": self.src_ip,
            "dst_ip": self.dst_ip,
            "src_port": int(self.src_port),
            "dst_port": int(self.dst_port),
            "protocol": self.protocol.value,
            "timestamp": self.timestamp,
            "features": self.feature_dict(),
            "raw_label": self.raw_label,
        }

    @classmethod
    def from_dict(cls, d):
        feats = d["features"]
        if isinstance(feats, dict):
            missing = [k for k in CANONICAL_FEATURES if k not in feats]
            if missing:
                raise SchemaMismatch(f"flow features missing {missing}")
            feats = [feats[k] for k in CANONICAL_FEATURES]
        return cls(
            flow_id=str(d["flow_id"]),
            src_ip=d["src_ip"],
            dst_ip=d["dst_ip"],
            src_port=int(d["src_port"]),
            dst_port=int(d["dst_port"]),
            protocol=d.get("protocol", "TCP"),
            timestamp=float(d.get("timestamp", 0.0)),
            features=feats,
            raw_label=d.get("raw_label"),
        )


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """An n x d float matrix with one AttackGroup code per row."""

    schema: tuple
    rows: np.ndarray
    labels: np.ndarray
    load_report: dict = field(default=None, compare=False)

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.float64, copy=True)
        if rows.ndim == 1 and rows.size == 0:
            rows = rows.reshape(0, len(self.schema))
        labels = np.array(self.labels, dtype=np.int64, copy=True).reshape(-1)
        if rows.ndim != 2 or rows.shape[1] != len(self.schema):
            raise SchemaMismatch(
                f"rows shape {rows.shape} does not match schema of {len(self.schema)}"
            )
        if rows.shape[0] != labels.shape[0]:
            raise SchemaMismatch("rows and labels differ in length")
        if labels.size and (labels.min() < 0 or labels.max() >= N_CLASSES):
            raise SchemaMismatch("label codes must lie in 0..6")
        if not np.all(np.isfinite(rows)):
            raise SchemaMismatch("dataset contains NaN or infinite values")
        rows.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "schema", tuple(self.schema))
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self):
        return self.rows.shape[0]

    @property
    def d(self):
        return self.rows.shape[1]

    @property
    def class_counts(self):
        counts = np.bincount(self.labels, minlength=N_CLASSES)
        return {AttackGroup(c): int(k) for c, k in enumerate(counts) if k > 0}

    def subset(self, index):
        index = np.asarray(index)
        return LabeledDataset(self.schema, self.rows[index], self.labels[index])

    def __eq__(self, other):
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return (
            self.schema == other.schema
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.labels, other.labels)
        )

    __hash__ = None


def load_dataset(path, schema_mode="canonical", fallback_other=False):
    """Read a labelled flow CSV.

    Rows with NaN/inf or unparsable numbers are dropped and counted in
    ``ds.load_report``.
    """
    if schema_mode not in ("canonical", "infer"):
        raise SchemaMismatch(f"unknown schema_mode {schema_mode!r}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyDataset(f"{path}: no header row") from None
        if "label" not in header:
            raise MissingLabelColumn(f"{path}: no 'label' column")
        label_at = header.index("label")
        feature_cols = [i for i in range(len(header)) if i != label_at]
        schema = tuple(header[i] for i in feature_cols)
        if schema_mode == "canonical" and schema != CANONICAL_FEATURES:
            raise SchemaMismatch(f"{path}: columns do not match the canonical schema")

        rows, labels = [], []
        read = dropped = unknown = 0
        for rec in reader:
            if not rec or all(not c.strip() for c in rec):
                continue
            read += 1
            if len(rec) != len(header):
                dropped += 1
                continue
            try:
                values = [float(rec[i]) for i in feature_cols]
            except ValueError:
                dropped += 1
                continue
            if not all(math.isfinite(v) for v in values):
                dropped += 1
                continue
            raw = rec[label_at]
            try:
                group = map_raw_label(raw)
            except UnknownLabel:
                if not fallback_other or not raw.strip():
                    raise
                group = AttackGroup.OTHER
                unknown += 1
            rows.append(values)
            labels.append(int(group))

    if not rows:
        raise EmptyDataset(f"{path}: no valid rows")
    report = {
        "rows_read": read,
        "rows_kept": len(rows),
        "rows_dropped": dropped,
        "unknown_labels": unknown,
    }
    return LabeledDataset(schema, np.array(rows), np.array(labels), load_report=report)


def save_dataset(ds, path):
    if ds.n == 0:
        raise EmptyDataset("refusing to write an empty dataset")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(ds.schema) + ["label"])
        for row, label in zip(ds.rows, ds.labels):
            writer.writerow([format(v, ".17g") for v in row] + [GROUP_NAMES[label]])
