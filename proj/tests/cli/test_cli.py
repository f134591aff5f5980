"""End to end checks of the dmac command line tool.

The binary and fixture locations come from DMAC_BIN and DMAC_DATA so the
suite runs both under ctest and by hand from a build tree.
"""

import json
import os
import pathlib
import subprocess

import pytest

ROOT = pathlib.Path(__file__).resolve().parents[2]
BIN = os.environ.get("DMAC_BIN", str(ROOT / "build" / "dmac"))
DATA = pathlib.Path(os.environ.get("DMAC_DATA", str(ROOT / "data")))

ADDER = ["--channel", str(DATA / "adder_mac.channel.json"),
         "--ensemble", str(DATA / "adder_mac.ensemble.json")]
TINY = ["--channel", str(DATA / "tiny.channel.json"),
        "--ensemble", str(DATA / "tiny.ensemble.json"),
        "--region", str(DATA / "tiny.region.json"),
        "--margin", str(DATA / "tiny.margin.json")]


def run(*args, env=None):
    full_env = dict(os.environ)
    full_env.pop("DMAC_CACHE_DIR", None)
    if env:
        full_env.update(env)
    return subprocess.run([BIN, *args], capture_output=True, text=True,
                          env=full_env)


def fnv1a64(data: bytes) -> str:
    h = 14695981039346656037
    for b in data:
        h = ((h ^ b) * 1099511628211) % 2**64
    return format(h, "016x")


def test_unknown_subcommand_is_usage_error():
    r = run("frobnicate")
    assert r.returncode == 2


def test_missing_required_flag_is_usage_error():
    r = run("region", "check", "--channel", str(DATA / "adder_mac.channel.json"))
    assert r.returncode == 2


def test_help_exits_zero_and_names_subcommands():
    r = run("--help")
    assert r.returncode == 0
    for name in ["validate", "region", "exponent", "gep", "simulate",
                 "oracle", "gaussian"]:
        assert name in r.stdout


def test_region_check_adder_inside():
    r = run("region", "check", *ADDER, "--r", "0.3,0.3")
    assert r.returncode == 0
    doc = json.loads(r.stdout)
    assert doc["member"] is True
    assert all(w["satisfied"] for w in doc["witnesses"])


def test_region_check_adder_outside():
    r = run("region", "check", *ADDER, "--r", "0.8,0.8")
    assert r.returncode == 0
    doc = json.loads(r.stdout)
    assert doc["member"] is False
    rejected = [w for w in doc["witnesses"] if not w["satisfied"]]
    assert rejected and all(w["rejected"] for w in rejected)


def test_region_check_units_bits():
    # 0.9 bits each is outside (sum 1.8 bits > 1.5), 0.4 bits is inside
    out = json.loads(run("region", "check", *ADDER, "--r", "0.9,0.9",
                         "--units", "bits").stdout)
    assert out["member"] is False
    out = json.loads(run("region", "check", *ADDER, "--r", "0.4,0.4",
                         "--units", "bits").stdout)
    assert out["member"] is True


def test_gaussian_example_rejects_point():
    r = run("gaussian", "--K", "2", "--P", "1,1", "--N0", "1",
            "--r", "0.3,0.3")
    assert r.returncode == 0
    assert json.loads(r.stdout)["member"] is False


def test_gaussian_bits_point_is_inside():
    r = run("gaussian", "--P", "1,1", "--N0", "1", "--r", "0.3,0.3",
            "--units", "bits")
    assert json.loads(r.stdout)["member"] is True


def test_malformed_json_reports_line_and_column():
    bad = DATA.parent / "build" / "cli_bad_input.json"
    bad.parent.mkdir(exist_ok=True)
    bad.write_text('{"num_users": 2,\n  "oops"\n')
    r = run("validate", "--channel", str(bad))
    assert r.returncode == 2
    assert f"{bad}:" in r.stderr
    # the location is path:line:column
    tail = r.stderr.split(str(bad) + ":", 1)[1]
    line, col = tail.split(":")[:2]
    assert line.isdigit() and col.isdigit()
    bad.unlink()


def test_invalid_channel_is_domain_error(tmp_path):
    bad = tmp_path / "bad_channel.json"
    bad.write_text(json.dumps({
        "num_users": 1, "input_alphabets": [2], "output_alphabet": 2,
        "transition": [[0.6, 0.3], [0.5, 0.5]],
    }))
    r = run("validate", "--channel", str(bad))
    assert r.returncode == 1
    doc = json.loads(r.stdout)
    assert doc["ok"] is False
    assert doc["channel"]["issues"]


def test_sweep_has_single_transition_and_matches_boundary():
    r = run("region", "sweep", *ADDER, "--axis-user", "0",
            "--start", "0.05", "--stop", "1.2", "--steps", "24")
    assert r.returncode == 0
    lines = r.stdout.strip().splitlines()
    assert lines[0] == "index,rate_nats,member"
    members = [row.split(",")[2] for row in lines[1:]]
    flips = sum(1 for a, b in zip(members, members[1:]) if a != b)
    assert flips == 1
    # the adder MAC admits user 0 alone up to ln 2
    last_inside = max(i for i, m in enumerate(members) if m == "1")
    rate = float(lines[1 + last_inside].split(",")[1])
    assert rate < 0.6931471805599453 < float(lines[2 + last_inside].split(",")[1])


def test_sweep_one_point_grid():
    r = run("region", "sweep", *ADDER, "--start", "0.1", "--stop", "0.9",
            "--steps", "1")
    lines = r.stdout.strip().splitlines()
    assert len(lines) == 2 and lines[1].startswith("0,0.1,")


def test_sweep_zero_step_grid_is_usage_error():
    r = run("region", "sweep", *ADDER, "--start", "0.1", "--stop", "0.9",
            "--steps", "0")
    assert r.returncode == 2


def test_exponent_reports_positive_value(tmp_path):
    args = ["exponent", "--channel", str(DATA / "tiny.channel.json"),
            "--ensemble", str(DATA / "tiny.ensemble.json"),
            "--kind", "misdetect-full", "--D", "0,1", "--S", "0,1",
            "--g", "0,0", "--gt", "0,0", "--gt0", "0",
            "--alpha-g", "0.2", "--alpha-gt", "0.4"]
    r = run(*args)
    assert r.returncode == 0
    doc = json.loads(r.stdout)
    assert doc["report"]["value"] > 0
    # warm cache run must emit the identical document
    cache_dir = tmp_path / "cache"
    cache_dir.mkdir()
    first = run(*args, env={"DMAC_CACHE_DIR": str(cache_dir)})
    assert (cache_dir / "exponent_cache.json").exists()
    second = run(*args, env={"DMAC_CACHE_DIR": str(cache_dir)})
    assert first.stdout == second.stdout == r.stdout


def test_gep_partition_totals_are_consistent(tmp_path):
    out = tmp_path / "gep.json"
    csv = tmp_path / "gep.csv"
    r = run("gep", *TINY, "--N", "8", "--strategy", "exhaustive",
            "--out", str(out), "--csv", str(csv),
            "--sweep-start", "8", "--sweep-stop", "64", "--sweep-steps", "8")
    assert r.returncode == 0
    doc = json.loads(out.read_text())
    assert doc["mode"] == "partition"
    per_decoder_sum = sum(d["total"] for d in doc["per_decoder"])
    assert abs(per_decoder_sum - doc["total"]) < 1e-12
    # every region vector is assigned to exactly one decode set
    region = json.loads((DATA / "tiny.region.json").read_text())["vectors"]
    assert len(doc["assignment"]) == len(region)
    # bound versus N is non-increasing on this fixture
    rows = csv.read_text().strip().splitlines()[1:]
    totals = [float(row.split(",")[1]) for row in rows]
    assert all(a >= b for a, b in zip(totals, totals[1:]))


def test_gep_single_decoder_matches_simulate_bound(tmp_path):
    out = tmp_path / "gep.json"
    r = run("gep", *TINY, "--N", "8", "--D", "0,1", "--out", str(out))
    assert r.returncode == 0
    bound = json.loads(out.read_text())["total"]
    sim = json.loads(run("simulate", *TINY, "--N", "8", "--seed", "5",
                         "--trials", "50").stdout)
    assert abs(sim["analytic_decoder_bound"] - bound) < 1e-12


def test_oracle_is_bounded_by_analytic_gep():
    r = run("oracle", *TINY, "--N", "2", "--seed", "7", "--events")
    assert r.returncode == 0
    doc = json.loads(r.stdout)
    assert doc["exact"] is True
    assert doc["weighted_error_sum"] <= doc["analytic_decoder_bound"] + 1e-12
    assert doc["events"]
    for ev in doc["events"]:
        for field in ("p_message", "p_threshold", "p_misdetect"):
            assert ev[field] <= 1.0 + 1e-12


def test_simulate_fixed_seed_reruns_byte_identical(tmp_path):
    outputs = []
    for tag in ("a", "b"):
        out = tmp_path / f"sim_{tag}.json"
        csv = tmp_path / f"sim_{tag}.csv"
        man = tmp_path / f"sim_{tag}.manifest.json"
        r = run("simulate", *TINY, "--N", "8", "--seed", "11",
                "--trials", "200", "--threads", "2", "--mode", "eq6",
                "--out", str(out), "--csv", str(csv), "--manifest", str(man))
        assert r.returncode == 0
        outputs.append((out.read_bytes(), csv.read_bytes(),
                        json.loads(man.read_text())))
    assert outputs[0][0] == outputs[1][0]
    assert outputs[0][1] == outputs[1][1]
    # manifests reference every artifact with the digest of its bytes
    for (out_bytes, csv_bytes, manifest) in outputs:
        digests = [o["digest"] for o in manifest["outputs"]]
        assert fnv1a64(out_bytes) in digests
        assert fnv1a64(csv_bytes) in digests
    digests_a = [o["digest"] for o in outputs[0][2]["outputs"]]
    digests_b = [o["digest"] for o in outputs[1][2]["outputs"]]
    assert digests_a == digests_b


def test_simulate_csv_with_oracle_column(tmp_path):
    csv = tmp_path / "table.csv"
    r = run("simulate", *TINY, "--N", "8", "--seed", "5", "--trials", "400",
            "--with-oracle", "--csv", str(csv))
    assert r.returncode == 0
    lines = csv.read_text().strip().splitlines()
    assert lines[0] == ("g,zone,alpha,trials,p_error,ci_low,ci_high,"
                        "analytic_bound,oracle_value")
    # the exact message averaged error must sit inside the Wilson interval
    for row in lines[1:]:
        cells = row.rsplit(",", 8)
        ci_low, ci_high, oracle = float(cells[5]), float(cells[6]), cells[8]
        assert oracle != ""
        assert ci_low - 1e-12 <= float(oracle) <= ci_high + 1e-12


def test_policy_out_roundtrips_through_policy_flag(tmp_path):
    policy = tmp_path / "policy.json"
    first = run("simulate", *TINY, "--N", "8", "--seed", "3", "--trials", "60",
                "--policy-out", str(policy))
    assert first.returncode == 0
    again = run("simulate", *TINY, "--N", "8", "--seed", "3", "--trials", "60",
                "--policy", str(policy))
    assert again.returncode == 0
    assert first.stdout == again.stdout


def test_version_flag():
    r = run("--version")
    assert r.returncode == 0
    assert r.stdout.strip() == "dmac 0.1.0"


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
