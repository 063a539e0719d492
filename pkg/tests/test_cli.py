import csv

import pytest

from ipidlab.cli import ANALYZE_HEADER, run
from ipidlab.constants import IPID_SPACE
from ipidlab.trace import load_trace


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def analyze_rows(path):
    rows = read_csv(path)
    assert rows[0] == ANALYZE_HEADER
    return [
        {
            "method": m,
            "lambda_log2": float(e),
            "value": float(v),
            "std_err": None if se == "" else float(se),
        }
        for m, e, v, se in rows[1:]
    ]


# ---------------------------------------------------------------- analyze


def test_analyze_correctness_prng_pure_anchor(tmp_path):
    out = tmp_path / "c.csv"
    code = run(
        [
            "analyze",
            "--quantity",
            "correctness",
            "--methods",
            "prng-pure",
            "--lambda-log2",
            "5",
            "5.5",
            "1",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    rows = analyze_rows(out)
    assert len(rows) == 1
    assert rows[0]["value"] == pytest.approx(0.0077795, abs=1e-5)
    assert rows[0]["std_err"] is None


def test_analyze_security_per_connection_constant(tmp_path):
    out = tmp_path / "s.csv"
    code = run(
        [
            "analyze",
            "--quantity",
            "security-uniform",
            "--methods",
            "per-connection",
            "--lambda-log2",
            "-10",
            "10",
            "5",
            "--g",
            "10",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    rows = analyze_rows(out)
    assert len(rows) == 5
    assert all(r["value"] == 10 / IPID_SPACE for r in rows)


def test_analyze_security_prng_constant_across_lambda(tmp_path):
    out = tmp_path / "s2.csv"
    assert (
        run(
            [
                "analyze",
                "--quantity",
                "security-uniform",
                "--methods",
                "prng-queue",
                "--lambda-log2",
                "-10",
                "10",
                "10",
                "--k",
                "8192",
                "--out",
                str(out),
            ]
        )
        == 0
    )
    rows = analyze_rows(out)
    values = {r["value"] for r in rows}
    assert values == {1 / (IPID_SPACE - 8192)}


def test_analyze_security_worst_equals_uniform_for_r1(tmp_path):
    out_u = tmp_path / "u.csv"
    out_w = tmp_path / "w.csv"
    common = ["--methods", "global", "--lambda-log2", "0", "4", "2", "--g", "3"]
    assert run(["analyze", "--quantity", "security-uniform", *common, "--out", str(out_u)]) == 0
    assert run(["analyze", "--quantity", "security-worst", *common, "--out", str(out_w)]) == 0
    assert [r["value"] for r in analyze_rows(out_u)] == [
        r["value"] for r in analyze_rows(out_w)
    ]


def test_analyze_default_r_pairs_labeled(tmp_path):
    out = tmp_path / "d.csv"
    assert (
        run(
            [
                "analyze",
                "--quantity",
                "security-uniform",
                "--methods",
                "per-destination",
                "--lambda-log2",
                "0",
                "1",
                "1",
                "--out",
                str(out),
            ]
        )
        == 0
    )
    labels = {r["method"] for r in analyze_rows(out)}
    assert labels == {"per-destination:r=4096", "per-destination:r=32768"}


def test_analyze_per_bucket_uniform_reports_std_err(tmp_path):
    out = tmp_path / "b.csv"
    assert (
        run(
            [
                "analyze",
                "--quantity",
                "security-uniform",
                "--methods",
                "per-bucket-exclusive",
                "--lambda-log2",
                "2",
                "3",
                "1",
                "--r",
                "2048",
                "--trials",
                "2000",
                "--out",
                str(out),
            ]
        )
        == 0
    )
    rows = analyze_rows(out)
    assert all(r["std_err"] is not None for r in rows)
    assert all(0 <= r["value"] <= 1 for r in rows)


def test_analyze_rejects_bad_grid(tmp_path, capsys):
    code = run(
        [
            "analyze",
            "--quantity",
            "correctness",
            "--lambda-log2",
            "5",
            "1",
            "1",
            "--out",
            str(tmp_path / "x.csv"),
        ]
    )
    assert code == 2
    assert "start" in capsys.readouterr().err


# ------------------------------------------------------------------ bench


def test_bench_smoke(tmp_path):
    out = tmp_path / "bench.csv"
    code = run(
        [
            "bench",
            "--method",
            "global",
            "--cpus",
            "1",
            "--duration",
            "0.1",
            "--trials",
            "1",
            "--packets",
            "1000",
            "--flows",
            "16",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    rows = read_csv(out)
    assert rows[0] == ["method", "workers", "trial", "worker_id", "count", "mean_ns", "throughput"]
    assert float(rows[1][6]) > 0


def test_bench_rejects_zero_cpus(capsys):
    assert run(["bench", "--method", "global", "--cpus", "0"]) == 2
    assert "cpus" in capsys.readouterr().err


# --------------------------------------------------------------- simulate


def test_simulate_collision_single_packet(tmp_path):
    out = tmp_path / "sim.csv"
    code = run(
        [
            "simulate",
            "bucket-collision",
            "--n",
            "1",
            "--lambda",
            "2.0",
            "--trials",
            "500",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    rows = read_csv(out)
    assert rows[0] == ["n", "lambda", "trials", "probability", "std_err"]
    assert float(rows[1][3]) == 0.0


def test_simulate_sumdist_byte_identical(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    args = ["simulate", "sum-dist", "--lambda-i", "256", "--trials", "5000", "--seed", "1"]
    assert run([*args, "--out", str(a)]) == 0
    assert run([*args, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


# -------------------------------------------------------- trace commands


def test_gen_trace_and_convert(tmp_path):
    bin_path = tmp_path / "trace.bin"
    csv_path = tmp_path / "trace.csv"
    assert (
        run(
            [
                "gen-trace",
                "--packets",
                "1000",
                "--flows",
                "1",
                "--seed",
                "3",
                "--out",
                str(bin_path),
            ]
        )
        == 0
    )
    trace = load_trace(bin_path)
    assert len(trace) == 1000
    assert len({r.flow for r in trace.records}) == 1

    assert run(["trace", "convert", "--in", str(bin_path), "--out", str(csv_path)]) == 0
    assert load_trace(csv_path) == trace


def test_gen_trace_deterministic(tmp_path):
    a = tmp_path / "a.bin"
    b = tmp_path / "b.bin"
    args = ["gen-trace", "--packets", "500", "--flows", "7", "--seed", "11"]
    assert run([*args, "--out", str(a)]) == 0
    assert run([*args, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


# -------------------------------------------------------------- recommend


def recommend_lines(capsys, args):
    code = run(["recommend", *args])
    captured = capsys.readouterr()
    return code, captured.out.strip().splitlines(), captured.err


def test_recommend_case_1(capsys):
    code, lines, _ = recommend_lines(capsys, ["--lambda", "0.25", "--lambda-n", "0.25"])
    assert code == 0
    assert lines[-1] == "RECOMMEND 1 prng-based merged-with-non-cb"


def test_recommend_bandwidth_form(capsys):
    code, lines, _ = recommend_lines(
        capsys, ["--bandwidth-bps", "1e9", "--cb-fraction", "0.99"]
    )
    assert code == 0
    # 1 Gbps -> lambda ~ 2^9.7 < 2^10 with lambda_n ~ 2^3.06 -> case 3
    assert lines[-1] == "RECOMMEND 3 per-bucket separate-per-connection"


def test_recommend_requires_one_input_form(capsys):
    code, _, _ = recommend_lines(capsys, [])
    assert code == 2
    code = run(
        [
            "recommend",
            "--lambda",
            "1.0",
            "--lambda-n",
            "0.5",
            "--bandwidth-bps",
            "1e6",
            "--cb-fraction",
            "0.5",
        ]
    )
    assert code == 2


def test_recommend_rejects_excess_lambda_n(capsys):
    code, _, err = recommend_lines(capsys, ["--lambda", "1.0", "--lambda-n", "2.0"])
    assert code == 2
    assert "exceed" in err
