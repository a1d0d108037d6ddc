import csv
import io
import subprocess
import sys

import pytest

from qudit_distill import cli


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_rates_fig1_columns(capsys):
    code, out, _ = run(["rates", "--d", "7", "--f-points", "5", "--strategies", "hashing,recurrence:1,subspace:3+4,er"], capsys)
    assert code == 0
    table = rows(out)
    assert table[0] == [
        "f",
        "hashing_bits",
        "hashing_norm",
        "recurrence1_total_bits",
        "recurrence1_total_norm",
        "subspace_3+4_bits",
        "subspace_3+4_norm",
        "er_bits",
        "er_norm",
    ]
    assert len(table) == 6
    assert "\r" not in out


def test_rates_extra_flags_and_keep_label(capsys):
    code, out, _ = run(
        ["rates", "--d", "5", "--f-points", "3", "--strategies", "hashing", "--partition", "2,3", "--recurrence-k", "2", "--keep", "single"],
        capsys,
    )
    assert code == 0
    header = rows(out)[0]
    assert "subspace_2+3_bits" in header and "recurrence2_single_bits" in header


def test_rates_pow2_family(capsys):
    code, out, _ = run(["rates", "--d", "16", "--f-points", "2", "--strategies", "hashing,pow2,envelope,qubit,best"], capsys)
    assert code == 0
    header = rows(out)[0]
    for name in ("blocks2", "blocks4", "blocks8", "envelope", "qubit", "best"):
        assert f"{name}_bits" in header and f"{name}_norm" in header


def test_rates_is_byte_identical(tmp_path):
    args = ["rates", "--d", "3", "--f-points", "17", "--strategies", "hashing,er,best"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(args + ["--out", str(a)]) == 0
    assert cli.main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert b"\r\n" not in a.read_bytes()


def test_rates_full_precision(capsys):
    _, out, _ = run(["rates", "--d", "2", "--f-start", "0.9", "--f-stop", "1", "--f-points", "2", "--strategies", "hashing"], capsys)
    value = float(rows(out)[1][1])
    assert len(rows(out)[1][1]) > 10
    assert value == pytest.approx(0.3725, abs=5e-5)


@pytest.mark.parametrize(
    "argv",
    [
        ["rates", "--f-points", "1"],
        ["rates", "--f-start", "0.5", "--f-stop", "0.4"],
        ["rates", "--strategies", "magic"],
        ["rates", "--d", "6", "--strategies", "qubit"],
        ["rates", "--d", "7", "--partition", "3,3"],
    ],
)
def test_rates_invalid_config(argv, capsys):
    code, out, err = run(argv, capsys)
    assert code != 0
    assert err.count("\n") == 1 and err.startswith("error: ")


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "sweep.cfg"
    cfg.write_text("# sweep\nd = 3\nf-points = 4\nstrategies = hashing\n")
    code, out, _ = run(["rates", "--config", str(cfg)], capsys)
    assert code == 0 and len(rows(out)) == 5
    code, out, _ = run(["rates", "--config", str(cfg), "--f-points", "6"], capsys)
    assert code == 0 and len(rows(out)) == 7


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    code, _, err = run(["rates", "--config", str(cfg)], capsys)
    assert code != 0 and "config" in err


def test_simulate_pure_state(capsys):
    code, out, _ = run(["simulate", "--d", "3", "--f", "1.0", "--n", "3", "--trials", "5", "--rounds", "2"], capsys)
    assert code == 0
    table = rows(out)
    assert table[0][:4] == ["rounds", "success_prob", "mean_yield_bits_per_copy", "stderr"]
    assert float(table[1][1]) == 1.0


def test_simulate_is_deterministic(capsys):
    argv = ["simulate", "--mode", "hashing", "--d", "3", "--f", "0.9", "--n", "3", "--trials", "30", "--seed", "5"]
    _, a, _ = run(argv, capsys)
    _, b, _ = run(argv, capsys)
    assert a == b


def test_simulate_composite_hashing_error(capsys):
    code, out, err = run(["simulate", "--mode", "hashing", "--d", "6", "--n", "2", "--trials", "2"], capsys)
    assert code != 0 and out == ""
    assert "prime dimension required" in err
    assert err.count("\n") == 1


def test_simulate_prime_power(capsys):
    code, out, _ = run(["simulate", "--mode", "hashing-prime-power", "--dprime", "2", "--p", "2", "--f", "0.95", "--n", "2", "--trials", "20"], capsys)
    assert code == 0 and len(rows(out)) > 2


def test_lemma1(capsys):
    code, out, _ = run(["lemma1", "--d-list", "2,3,4", "--m-max", "2"], capsys)
    assert code == 0
    table = rows(out)
    verdicts = {(r[0], r[1]): r[-1] for r in table[1:]}
    assert verdicts[("2", "2")] == "pass" and verdicts[("4", "1")] == "counterexample"
    witness = [r for r in table[1:] if r[0] == "4"][0]
    assert witness[5] == "1/2"


def test_lemma1_empty(capsys):
    code, out, _ = run(["lemma1", "--m-max", "0"], capsys)
    assert code == 0
    assert rows(out) == [["d", "m", "prime", "vectors", "min_probability", "max_probability", "witness", "verdict"]]


def test_oracle_verify_refuses_large_d(capsys):
    code, out, err = run(["oracle-verify", "--d-max", "9"], capsys)
    assert code != 0 and "refused" in err


def test_oracle_verify_table(capsys):
    code, out, err = run(["oracle-verify", "--d-max", "2"], capsys)
    table = rows(out)
    status = {(r[0], r[1]): r[4] for r in table[1:]}
    for eq in ("Weyl basis", "twirl", "BCS", "V swap", "mBCS", "u/v rotations", "hashing round", "recurrence f'"):
        assert status[(eq, "2")] == "PASS"
    referee = [r for r in table[1:] if r[0] == "keep probability referee"][0]
    assert "confirmed=total" in referee[5]
    assert status[("cross-dim BCS d'=2", "2")] == "PASS"
    assert code == 0 and err == ""


def test_oracle_verify_reports_crossdim_failure(capsys):
    # the cross-dimension shift with d' > d disagrees with the dense oracle
    code, out, err = run(["oracle-verify", "--d-max", "3"], capsys)
    status = {(r[0], r[1]): r[4] for r in rows(out)[1:]}
    assert status[("cross-dim BCS d'=3", "2")] == "FAIL"
    assert status[("cross-dim BCS d'=3", "3")] == "PASS"
    assert code == 1
    assert err.startswith("error: oracle: cross-dim BCS d'=3 d=2") and err.count("\n") == 1


def test_lowrank(capsys):
    code, out, _ = run(["lowrank", "--d", "5", "--samples", "100", "--seed", "2"], capsys)
    assert code == 0
    header, values = rows(out)
    rep = dict(zip(header, values))
    assert float(rep["uniform_rate"]) == pytest.approx(0.0, abs=1e-12)
    assert float(rep["point_mass_rate"]) == pytest.approx(float(rep["log2_d"]))
    assert rep["equal"] == "True"


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "qudit_distill", "lemma1", "--m-max", "1", "--d-list", "2"], capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.splitlines()[1].endswith("pass")
