"""Derive ``x0(phi)`` and ``c(phi)`` from mempool snapshots and arrival logs.

File formats (UTF-8 JSON, unknown fields ignored)::

    snapshot:  {"version": 1, "taken_at_s": <number>,
                "txs": [{"size": <int bytes>, "fee": <int satoshi>}, ...]}

    arrivals:  {"version": 1, "window_start_s": <number>, "window_end_s": <number>,
                "txs": [{"size": ..., "fee": ..., "time_s": <number>}, ...]}

Transactions whose fee density equals the query density are counted as
ahead of the user.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import IO, Iterable

from .model import DEFAULT_SCALE, DomainError, UnitScale, to_block_units, time_to_block_intervals

__all__ = [
    "SCHEMA_VERSION",
    "MempoolParseError",
    "SchemaVersionError",
    "TxRecord",
    "MempoolSnapshot",
    "ArrivalLog",
    "parse_snapshot",
    "parse_arrivals",
    "load_snapshot",
    "load_arrivals",
    "serialize_snapshot",
    "serialize_arrivals",
    "initial_position",
    "arrival_rate",
]

SCHEMA_VERSION = 1


class MempoolParseError(ValueError):
    def __init__(self, message: str, index: int | None = None, line: int | None = None, column: int | None = None):
        self.index = index
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}, column {column}")
        if index is not None:
            where.append(f"record {index}")
        super().__init__(f"{message} ({'; '.join(where)})" if where else message)


class SchemaVersionError(MempoolParseError):
    pass


@dataclass(frozen=True)
class TxRecord:
    size_bytes: int
    fee_satoshi: int
    arrival_time_s: float | None = None

    @property
    def fee_density(self) -> float:
        """Satoshi per byte."""
        return self.fee_satoshi / self.size_bytes


@dataclass(frozen=True)
class MempoolSnapshot:
    taken_at_s: float
    txs: tuple[TxRecord, ...]

    @property
    def total_bytes(self) -> int:
        return sum(tx.size_bytes for tx in self.txs)


@dataclass(frozen=True)
class ArrivalLog:
    window_start_s: float
    window_end_s: float
    txs: tuple[TxRecord, ...]

    @property
    def duration_s(self) -> float:
        return self.window_end_s - self.window_start_s


def _read(source) -> str:
    if isinstance(source, (bytes, bytearray)):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def _load_document(source) -> dict:
    try:
        text = _read(source)
    except UnicodeDecodeError as exc:
        raise MempoolParseError(f"input is not valid UTF-8: {exc.reason}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MempoolParseError(f"invalid JSON: {exc.msg}", line=exc.lineno, column=exc.colno) from None
    if not isinstance(doc, dict):
        raise MempoolParseError("top level must be a JSON object")
    version = doc.get("version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(f"unsupported schema version {version!r}, expected {SCHEMA_VERSION}")
    return doc


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_number(v) -> bool:
    return (isinstance(v, (int, float)) and not isinstance(v, bool)) and math.isfinite(v)


def _number(doc: dict, key: str) -> float:
    v = doc.get(key)
    if not _is_number(v):
        raise MempoolParseError(f"field {key!r} must be a finite number, got {v!r}")
    return float(v)


def _tx(obj, index: int, timed: bool) -> TxRecord:
    if not isinstance(obj, dict):
        raise MempoolParseError("transaction must be an object", index=index)
    size, fee = obj.get("size"), obj.get("fee")
    if not _is_int(size) or size < 1:
        raise MempoolParseError(f"'size' must be a positive integer, got {size!r}", index=index)
    if not _is_int(fee) or fee < 0:
        raise MempoolParseError(f"'fee' must be a nonnegative integer, got {fee!r}", index=index)
    time_s = None
    if timed:
        time_s = obj.get("time_s")
        if not _is_number(time_s) or time_s < 0:
            raise MempoolParseError(f"'time_s' must be a nonnegative number, got {time_s!r}", index=index)
        time_s = float(time_s)
    return TxRecord(size_bytes=size, fee_satoshi=fee, arrival_time_s=time_s)


def _txs(doc: dict, timed: bool) -> tuple[TxRecord, ...]:
    raw = doc.get("txs")
    if not isinstance(raw, list):
        raise MempoolParseError("field 'txs' must be an array")
    return tuple(_tx(obj, i, timed) for i, obj in enumerate(raw))


def parse_snapshot(source: str | bytes | IO) -> MempoolSnapshot:
    doc = _load_document(source)
    return MempoolSnapshot(taken_at_s=_number(doc, "taken_at_s"), txs=_txs(doc, timed=False))


def parse_arrivals(source: str | bytes | IO) -> ArrivalLog:
    doc = _load_document(source)
    start, end = _number(doc, "window_start_s"), _number(doc, "window_end_s")
    if not end > start:
        raise MempoolParseError(f"window_end_s ({end}) must exceed window_start_s ({start})")
    txs = _txs(doc, timed=True)
    prev = start
    for i, tx in enumerate(txs):
        if not start <= tx.arrival_time_s <= end:
            raise MempoolParseError(f"arrival time {tx.arrival_time_s} outside the window", index=i)
        if tx.arrival_time_s < prev:
            raise MempoolParseError("arrival times must be nondecreasing", index=i)
        prev = tx.arrival_time_s
    return ArrivalLog(window_start_s=start, window_end_s=end, txs=txs)


def load_snapshot(path) -> MempoolSnapshot:
    with open(path, "rb") as fh:
        return parse_snapshot(fh)


def load_arrivals(path) -> ArrivalLog:
    with open(path, "rb") as fh:
        return parse_arrivals(fh)


def _tx_json(tx: TxRecord) -> dict:
    out = {"size": tx.size_bytes, "fee": tx.fee_satoshi}
    if tx.arrival_time_s is not None:
        out["time_s"] = tx.arrival_time_s
    return out


def serialize_snapshot(snap: MempoolSnapshot) -> str:
    return json.dumps(
        {"version": SCHEMA_VERSION, "taken_at_s": snap.taken_at_s, "txs": [_tx_json(t) for t in snap.txs]}
    )


def serialize_arrivals(log: ArrivalLog) -> str:
    return json.dumps(
        {
            "version": SCHEMA_VERSION,
            "window_start_s": log.window_start_s,
            "window_end_s": log.window_end_s,
            "txs": [_tx_json(t) for t in log.txs],
        }
    )


def _check_density(phi: float) -> float:
    phi = float(phi)
    if not (math.isfinite(phi) and phi >= 0):
        raise DomainError("phi", f"fee density must be finite and >= 0, got {phi!r}")
    return phi


def _bytes_ahead(txs: Iterable[TxRecord], phi: float) -> int:
    # compare fee >= phi * size rather than dividing, so ties are exact
    return sum(tx.size_bytes for tx in txs if tx.fee_satoshi >= phi * tx.size_bytes)


def initial_position(
    snap: MempoolSnapshot, phi: float, own_size_bytes: int, scale: UnitScale = DEFAULT_SCALE
) -> float:
    """Data ahead of (and including) a transaction paying ``phi`` sat/B, in blocks."""
    phi = _check_density(phi)
    if not _is_int(own_size_bytes) or own_size_bytes < 1:
        raise DomainError("own_size_bytes", f"must be a positive integer, got {own_size_bytes!r}")
    return to_block_units(_bytes_ahead(snap.txs, phi) + own_size_bytes, scale)


def arrival_rate(
    log: ArrivalLog, phi: float, scale: UnitScale = DEFAULT_SCALE, window_s: float | None = None
) -> float:
    """Higher-priority block equivalents arriving per mean block interval.

    ``window_s`` restricts the average to the last ``window_s`` seconds of
    the log's window.
    """
    phi = _check_density(phi)
    start, end = log.window_start_s, log.window_end_s
    if window_s is not None:
        if not (math.isfinite(window_s) and window_s > 0):
            raise DomainError("window_s", f"must be positive, got {window_s!r}")
        start = max(start, end - window_s)
    duration = end - start
    if not duration > 0:
        raise DomainError("window", "arrival window is empty")
    inside = (tx for tx in log.txs if start <= tx.arrival_time_s <= end)
    blocks = to_block_units(_bytes_ahead(inside, phi), scale)
    return blocks / time_to_block_intervals(duration, scale)
