import math

import pytest

from ipidlab.selectors import FlowKey
from ipidlab.trace import (
    PacketRecord,
    Trace,
    TraceFormatError,
    generate_trace,
    load_trace,
    save_trace,
)


def small_trace():
    return Trace(
        records=[
            PacketRecord(FlowKey(0x0A000001, 0x0A000002, 6, 1234, 80), atomic=True),
            PacketRecord(FlowKey(0xC0A80001, 0x08080808, 17, 5353, 53), atomic=False),
            PacketRecord(FlowKey(1, 2, 1), atomic=False),
        ],
        source="handmade",
    )


def test_generate_single_flow():
    trace = generate_trace(n_packets=50, n_flows=1, seed=1)
    flows = {rec.flow for rec in trace.records}
    assert len(flows) == 1
    assert len(trace) == 50


def test_generate_atomic_fraction():
    n = 200_000
    frac = 0.824
    trace = generate_trace(n_packets=n, n_flows=64, atomic_fraction=frac, seed=2)
    atomic = sum(rec.atomic for rec in trace.records)
    sigma = math.sqrt(n * frac * (1 - frac))
    assert abs(atomic - n * frac) <= 3 * sigma


def test_generate_uniform_when_unskewed():
    n = 100_000
    flows = 16
    trace = generate_trace(n_packets=n, n_flows=flows, skew=0.0, seed=3)
    counts = {}
    for rec in trace.records:
        counts[rec.flow] = counts.get(rec.flow, 0) + 1
    expected = n / flows
    sigma = math.sqrt(n * (1 / flows) * (1 - 1 / flows))
    assert len(counts) == flows
    for c in counts.values():
        assert abs(c - expected) <= 4 * sigma


def test_generate_skew_concentrates_head():
    trace = generate_trace(n_packets=50_000, n_flows=256, skew=1.5, seed=4)
    counts = {}
    for rec in trace.records:
        counts[rec.flow] = counts.get(rec.flow, 0) + 1
    top = max(counts.values())
    assert top > 50_000 / 256 * 10  # rank-1 flow dominates a uniform share


def test_generate_deterministic():
    a = generate_trace(1000, 32, seed=9)
    b = generate_trace(1000, 32, seed=9)
    assert a == b


def test_generate_validates():
    with pytest.raises(ValueError):
        generate_trace(0, 1)
    with pytest.raises(ValueError):
        generate_trace(1, 0)
    with pytest.raises(ValueError):
        generate_trace(1, 1, atomic_fraction=1.5)


def test_binary_round_trip(tmp_path):
    trace = small_trace()
    path = tmp_path / "t.bin"
    save_trace(trace, path)
    assert load_trace(path) == trace


def test_csv_round_trip(tmp_path):
    trace = small_trace()
    path = tmp_path / "t.csv"
    save_trace(trace, path)
    assert load_trace(path) == trace


def test_csv_and_binary_agree(tmp_path):
    trace = generate_trace(500, 17, seed=5)
    bin_path = tmp_path / "t.bin"
    csv_path = tmp_path / "t.csv"
    save_trace(trace, bin_path)
    save_trace(trace, csv_path)
    assert load_trace(bin_path) == load_trace(csv_path)


def test_empty_file_rejected(tmp_path):
    path = tmp_path / "empty.bin"
    path.write_bytes(b"")
    with pytest.raises(TraceFormatError, match="empty"):
        load_trace(path)


def test_truncated_binary_names_offset(tmp_path):
    trace = small_trace()
    path = tmp_path / "t.bin"
    save_trace(trace, path)
    data = path.read_bytes()
    path.write_bytes(data[:-7])  # cut into the final record
    with pytest.raises(TraceFormatError, match="byte offset 32"):
        load_trace(path)


def test_malformed_csv_names_line(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("src,dst,proto,atomic,sport,dport\n1.2.3.4,bogus,6,0,1,2\n")
    with pytest.raises(TraceFormatError, match="line 2"):
        load_trace(path)


def test_csv_bad_header_rejected(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("a,b,c\n")
    with pytest.raises(TraceFormatError, match="header"):
        load_trace(path)


def test_missing_file_raises(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_trace(tmp_path / "nope.bin")
