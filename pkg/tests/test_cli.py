import json

import pytest

from rascal import cli
from rascal.simulate import REPORTED_DELTA, REPORTED_TAU, simulate_rsm
from rascal.data import write_keys_csv, write_responses_csv


@pytest.fixture()
def dataset(tmp_path):
    raw, _ = simulate_rsm(150, REPORTED_DELTA, REPORTED_TAU, seed=31, item_ids=list("ABCDEFG"), reverse=("G",))
    text = write_responses_csv(raw).splitlines()
    # add a person who chose the top category everywhere (max points after reverse keying)
    text.append("TOP," + ",".join(["4"] * 6 + ["1"]))
    responses = tmp_path / "responses.csv"
    responses.write_text("\n".join(text) + "\n")
    keys = tmp_path / "keys.csv"
    keys.write_text(write_keys_csv(raw.keys))
    return responses, keys


def test_calibrate_trims_all_max_person(dataset, tmp_path):
    responses, keys = dataset
    out = tmp_path / "cal"
    assert cli.main(["calibrate", "--input", str(responses), "--keys", str(keys), "--out", str(out)]) == 0
    payload = json.loads((out / "calibration.json").read_text())
    assert {"id": "TOP", "reason": "perfect"} in payload["trim_log"]["removed_persons"]
    assert "TOP" not in [p["person_id"] for p in payload["persons"]]
    assert payload["converged"] is True
    assert abs(sum(i["measure"] for i in payload["items"])) < 1e-9


def test_parallel_byte_identical(capsys):
    assert cli.main(["parallel", "--n", "4026", "--l", "7", "--reps", "100", "--seed", "1"]) == 0
    first = capsys.readouterr().out
    assert cli.main(["parallel", "--n", "4026", "--l", "7", "--reps", "100", "--seed", "1"]) == 0
    assert capsys.readouterr().out == first
    assert "Philox" in first


def test_seed_from_environment(capsys, monkeypatch):
    monkeypatch.setenv(cli.SEED_ENV, "5")
    cli.main(["parallel", "--n", "50", "--l", "3", "--reps", "5", "--format", "json"])
    assert json.loads(capsys.readouterr().out)["seed"] == 5


def test_malformed_csv_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("person_id,A,B\np1,1,2\np2,x,3\n")
    assert cli.main(["calibrate", "--input", str(bad)]) == cli.EXIT_DATA
    assert "row 3, column A" in capsys.readouterr().err


def test_missing_input_exit_code(capsys):
    assert cli.main(["fit"]) == cli.EXIT_DATA


def test_config_file(dataset, tmp_path):
    responses, keys = dataset
    conf = tmp_path / "run.json"
    conf.write_text(json.dumps({"max_iter": 1}))
    code = cli.main(["calibrate", "--input", str(responses), "--keys", str(keys), "--config", str(conf),
                     "--out", str(tmp_path / "o")])
    assert code == cli.EXIT_NONCONVERGED
    payload = json.loads((tmp_path / "o" / "calibration.json").read_text())
    assert payload["trace"]["iterations"] == 1 and payload["converged"] is False


def test_unknown_config_key(tmp_path):
    conf = tmp_path / "run.json"
    conf.write_text(json.dumps({"speed": 3}))
    assert cli.main(["parallel", "--n", "10", "--l", "2", "--config", str(conf)]) == cli.EXIT_DATA


def test_invalid_option_values(capsys):
    assert cli.main(["parallel", "--n", "10", "--l", "2", "--reps", "0"]) == cli.EXIT_DATA
    with pytest.raises(SystemExit):
        cli.main(["parallel", "--n", "10"])


def test_fit_formats(dataset, tmp_path):
    responses, keys = dataset
    base = ["--input", str(responses), "--keys", str(keys)]
    assert cli.main(["fit", *base, "--format", "csv", "--out", str(tmp_path / "c")]) == 0
    header = (tmp_path / "c" / "item_fit.csv").read_text().splitlines()[0]
    assert header.startswith("entry,total_score,count,measure,se,infit_mnsq")
    assert cli.main(["fit", *base, "--format", "json", "--out", str(tmp_path / "j")]) == 0
    assert len(json.loads((tmp_path / "j" / "item_fit.json").read_text())) == 7
    assert (tmp_path / "j" / "residuals.csv").exists()


def test_map_and_category_stdout(dataset, capsys):
    responses, keys = dataset
    base = ["--input", str(responses), "--keys", str(keys)]
    assert cli.main(["map", *base, "--variant", "thresholds"]) == 0
    assert "50% Cumulative" in capsys.readouterr().out
    assert cli.main(["category", *base]) == 0
    assert "SUMMARY OF CATEGORY STRUCTURE" in capsys.readouterr().out


def test_pca_and_ctt(dataset, tmp_path):
    responses, keys = dataset
    base = ["--input", str(responses), "--keys", str(keys)]
    assert cli.main(["pca", *base, "--pca-on", "scores", "--reps", "10", "--out", str(tmp_path / "p")]) == 0
    payload = json.loads((tmp_path / "p" / "pca.json").read_text())
    assert payload["mode"] == "scores" and len(payload["eigenvalues"]) == 7
    assert cli.main(["ctt", *base, "--out", str(tmp_path / "t")]) == 0
    assert "Cronbach's Alpha" in (tmp_path / "t" / "ctt.txt").read_text()


def test_simulate_round_trip(tmp_path):
    out = tmp_path / "sim"
    assert cli.main(["simulate", "--n", "40", "--seed", "3", "--out", str(out)]) == 0
    assert (out / "keys.csv").read_text().splitlines()[0] == "item_id,direction,min,max"
    assert cli.main(["ctt", "--input", str(out / "responses.csv"), "--keys", str(out / "keys.csv")]) == 0
