"""Packet traces for the contention benchmark: synthesis and file I/O.

Real traces are not redistributable, so the generator synthesizes one:
flows are drawn from a Zipf-like rank distribution over a fixed flow
population, and each packet is independently marked atomic with a
configurable fraction (default 0.824, a typical share of real traffic).

Two interchangeable file formats:

* binary: little-endian 16-byte records
  (src:4, dst:4, proto:1, flags:1, sport:2, dport:2, pad:2);
  flags bit 0 is the atomic mark.
* CSV: header ``src,dst,proto,atomic,sport,dport``, dotted-quad
  addresses, empty ports for non-port-bearing protocols.
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .selectors import FlowKey, PORT_BEARING_PROTOCOLS

__all__ = [
    "PacketRecord",
    "Trace",
    "TraceFormatError",
    "generate_trace",
    "load_trace",
    "save_trace",
]

RECORD_STRUCT = struct.Struct("<IIBBHHH")
RECORD_SIZE = RECORD_STRUCT.size  # 16 bytes
_ATOMIC_FLAG = 0x01

DEFAULT_ATOMIC_FRACTION = 0.824

CSV_HEADER = ["src", "dst", "proto", "atomic", "sport", "dport"]


class TraceFormatError(ValueError):
    """Trace file cannot be parsed; the message locates the defect."""


@dataclass(frozen=True)
class PacketRecord:
    """One packet: its flow plus whether it was marked atomic.

    Atomic packets still request an IPID in the benchmark; the flag is
    carried for trace realism.
    """

    flow: FlowKey
    atomic: bool = False


@dataclass
class Trace:
    """Ordered packet records plus provenance metadata.

    Equality compares records only; ``source`` describes where the
    trace came from (generator parameters or a file path).
    """

    records: list[PacketRecord]
    source: str = ""

    def __len__(self) -> int:
        return len(self.records)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        return self.records == other.records


def generate_trace(
    n_packets: int,
    n_flows: int,
    skew: float = 1.0,
    atomic_fraction: float = DEFAULT_ATOMIC_FRACTION,
    seed: int = 0,
) -> Trace:
    """Synthesize a trace: ``n_flows`` random flows, packet flow ranks
    Zipf(skew)-distributed (skew=0 is uniform), atomic marks i.i.d."""
    if n_packets < 1:
        raise ValueError(f"n_packets must be >= 1, got {n_packets}")
    if n_flows < 1:
        raise ValueError(f"n_flows must be >= 1, got {n_flows}")
    if not 0.0 <= atomic_fraction <= 1.0:
        raise ValueError(f"atomic_fraction must be in [0, 1], got {atomic_fraction}")
    if skew < 0:
        raise ValueError(f"skew must be non-negative, got {skew}")

    rng = np.random.default_rng(seed)
    protos = rng.choice([6, 17, 1], size=n_flows, p=[0.6, 0.3, 0.1])
    srcs = rng.integers(0, 1 << 32, size=n_flows, dtype=np.uint32)
    dsts = rng.integers(0, 1 << 32, size=n_flows, dtype=np.uint32)
    sports = rng.integers(1024, 1 << 16, size=n_flows, dtype=np.uint32)
    dports = rng.integers(1, 1024, size=n_flows, dtype=np.uint32)
    flows = []
    for i in range(n_flows):
        proto = int(protos[i])
        port_bearing = proto in PORT_BEARING_PROTOCOLS
        flows.append(
            FlowKey(
                src_addr=int(srcs[i]),
                dst_addr=int(dsts[i]),
                protocol=proto,
                src_port=int(sports[i]) if port_bearing else None,
                dst_port=int(dports[i]) if port_bearing else None,
            )
        )

    ranks = np.arange(1, n_flows + 1, dtype=np.float64)
    weights = ranks ** (-skew)
    weights /= weights.sum()
    choice = rng.choice(n_flows, size=n_packets, p=weights)
    atomic = rng.random(n_packets) < atomic_fraction

    records = [
        PacketRecord(flow=flows[int(c)], atomic=bool(a))
        for c, a in zip(choice, atomic)
    ]
    source = (
        f"generated(n_packets={n_packets}, n_flows={n_flows}, skew={skew}, "
        f"atomic_fraction={atomic_fraction}, seed={seed})"
    )
    return Trace(records=records, source=source)


def _format_for_path(path, fmt: str | None) -> str:
    if fmt is not None:
        if fmt not in ("binary", "csv"):
            raise ValueError(f"unknown trace format {fmt!r}")
        return fmt
    return "csv" if str(path).endswith(".csv") else "binary"


def save_trace(trace: Trace, path, fmt: str | None = None) -> None:
    """Write a trace; format from ``fmt`` or the path extension."""
    fmt = _format_for_path(path, fmt)
    path = Path(path)
    if fmt == "binary":
        with path.open("wb") as fh:
            for rec in trace.records:
                f = rec.flow
                fh.write(
                    RECORD_STRUCT.pack(
                        f.src_addr,
                        f.dst_addr,
                        f.protocol,
                        _ATOMIC_FLAG if rec.atomic else 0,
                        f.src_port or 0,
                        f.dst_port or 0,
                        0,
                    )
                )
    else:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER)
            for rec in trace.records:
                f = rec.flow
                writer.writerow(
                    [
                        _addr_str(f.src_addr),
                        _addr_str(f.dst_addr),
                        f.protocol,
                        1 if rec.atomic else 0,
                        "" if f.src_port is None else f.src_port,
                        "" if f.dst_port is None else f.dst_port,
                    ]
                )


def load_trace(path, fmt: str | None = None) -> Trace:
    """Read a trace; raises :class:`TraceFormatError` with the byte
    offset (binary) or line number (CSV) of any malformed record."""
    fmt = _format_for_path(path, fmt)
    path = Path(path)
    if fmt == "binary":
        records = _load_binary(path)
    else:
        records = _load_csv(path)
    if not records:
        raise TraceFormatError(f"{path}: trace is empty")
    return Trace(records=records, source=str(path))


def _load_binary(path: Path) -> list[PacketRecord]:
    data = path.read_bytes()
    if not data:
        raise TraceFormatError(f"{path}: trace is empty")
    if len(data) % RECORD_SIZE:
        raise TraceFormatError(
            f"{path}: truncated record at byte offset "
            f"{len(data) - len(data) % RECORD_SIZE} "
            f"({len(data) % RECORD_SIZE} trailing bytes)"
        )
    records = []
    for off in range(0, len(data), RECORD_SIZE):
        src, dst, proto, flags, sport, dport, _pad = RECORD_STRUCT.unpack_from(
            data, off
        )
        try:
            flow = _make_flow(src, dst, proto, sport, dport)
        except ValueError as exc:
            raise TraceFormatError(f"{path}: byte offset {off}: {exc}") from exc
        records.append(PacketRecord(flow=flow, atomic=bool(flags & _ATOMIC_FLAG)))
    return records


def _load_csv(path: Path) -> list[PacketRecord]:
    records = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceFormatError(f"{path}: trace is empty") from None
        if header != CSV_HEADER:
            raise TraceFormatError(
                f"{path}: line 1: bad header {header!r}, expected {CSV_HEADER!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                if len(row) != len(CSV_HEADER):
                    raise ValueError(f"expected {len(CSV_HEADER)} fields, got {len(row)}")
                src = _parse_addr(row[0])
                dst = _parse_addr(row[1])
                proto = int(row[2])
                atomic = bool(int(row[3]))
                sport = int(row[4]) if row[4] != "" else 0
                dport = int(row[5]) if row[5] != "" else 0
                flow = _make_flow(src, dst, proto, sport, dport)
            except ValueError as exc:
                raise TraceFormatError(f"{path}: line {lineno}: {exc}") from exc
            records.append(PacketRecord(flow=flow, atomic=atomic))
    return records


def _make_flow(src: int, dst: int, proto: int, sport: int, dport: int) -> FlowKey:
    port_bearing = proto in PORT_BEARING_PROTOCOLS
    return FlowKey(
        src_addr=src,
        dst_addr=dst,
        protocol=proto,
        src_port=sport if port_bearing else None,
        dst_port=dport if port_bearing else None,
    )


def _addr_str(addr: int) -> str:
    return ".".join(str((addr >> shift) & 0xFF) for shift in (24, 16, 8, 0))


def _parse_addr(text: str) -> int:
    parts = text.split(".")
    if len(parts) != 4:
        raise ValueError(f"bad address {text!r}")
    value = 0
    for part in parts:
        octet = int(part)
        if not 0 <= octet <= 255:
            raise ValueError(f"bad address {text!r}")
        value = (value << 8) | octet
    return value
