import hashlib
import subprocess
import sys

import pytest

from treecost.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def ws(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data, work = root / "data", root / "work"
    assert main(["gen-data", "--data-dir", str(data), "--schema", str(root / "schema.txt"),
                 "--titles", "300", "--infos", "300", "--seed", "1"]) == 0
    assert main(["gen-queries", "--data-dir", str(data), "--workload-dir", str(work),
                 "--n-queries", "80", "--tables", "1-2", "--seed", "2"]) == 0
    ckpt = root / "m.ckpt"
    assert main(["train", "--data-dir", str(data), "--workload-dir", str(work), "--checkpoint", str(ckpt),
                 "--omega", "1", "--epochs", "2", "--sample-size", "50", "--string-dim", "16"]) == 0
    return root


def test_help_lists_defaults(capsys):
    with pytest.raises(SystemExit) as e:
        main(["train", "--help"])
    assert e.value.code == 0
    out = capsys.readouterr().out
    assert "--batch-size" in out and "(default: 64)" in out and "(default: 1000)" in out


@pytest.mark.parametrize("argv", [[], ["train", "--bogus"], ["estimate", "--pool-capacity", "many"], ["fly"]])
def test_usage_errors_exit_1(argv, capsys):
    with pytest.raises(SystemExit) as e:
        main(argv)
    assert e.value.code == 1


def test_missing_data_dir_exits_2(capsys, tmp_path):
    code, _, err = run(capsys, "gen-queries", "--data-dir", tmp_path / "nope", "--workload-dir", tmp_path / "w")
    assert code == 2 and "data error" in err


def test_malformed_plan_exits_2(capsys, ws, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"op": "SeqScan", "table": ')
    code, _, err = run(capsys, "estimate", "--data-dir", ws / "data", "--checkpoint", ws / "m.ckpt", bad)
    assert code == 2 and "line 1" in err


def test_unlabelled_plans_exit_2_for_training(capsys, ws, tmp_path):
    assert main(["gen-queries", "--data-dir", str(ws / "data"), "--workload-dir", str(tmp_path / "u"),
                 "--n-queries", "3", "--no-label"]) == 0
    code, _, err = run(capsys, "train", "--data-dir", ws / "data", "--workload-dir", tmp_path / "u",
                       "--checkpoint", tmp_path / "x.ckpt", "--omega", "1")
    assert code == 2 and "labels" in err


def test_schema_mismatch_exits_2(capsys, ws, tmp_path):
    main(["gen-data", "--data-dir", str(tmp_path / "d2"), "--schema", str(tmp_path / "s2.txt"),
          "--titles", "50", "--infos", "50", "--casts", "20"])
    capsys.readouterr()
    code, _, err = run(capsys, "evaluate", "--data-dir", ws / "data", "--schema", tmp_path / "s2.txt",
                       "--workload-dir", ws / "work", "--oracle")
    assert code == 2 and "does not match" in err


def test_corrupt_checkpoint_exits_3(capsys, ws, tmp_path):
    blob = bytearray((ws / "m.ckpt").read_bytes())
    blob[len(blob) // 2] ^= 0x55
    (tmp_path / "bad.ckpt").write_bytes(bytes(blob))
    code, _, err = run(capsys, "estimate", "--data-dir", ws / "data", "--checkpoint", tmp_path / "bad.ckpt",
                       "--workload-dir", ws / "work")
    assert code == 3 and "model error" in err


def test_missing_checkpoint_exits_3(capsys, ws):
    code, _, _ = run(capsys, "estimate", "--data-dir", ws / "data", "--workload-dir", ws / "work")
    assert code == 3


def test_estimate_uses_pool(capsys, ws):
    plan = sorted((ws / "work").glob("*.json"))[0]
    code, out, err = run(capsys, "estimate", "--data-dir", ws / "data", "--checkpoint", ws / "m.ckpt", plan, plan)
    assert code == 0
    rows = out.strip().splitlines()
    assert rows[0] == "plan\tcost\tcard" and len(rows) == 3 and rows[1] == rows[2]
    assert "pool hits: 1" in err


def test_estimate_without_pool(capsys, ws):
    plan = sorted((ws / "work").glob("*.json"))[0]
    code, out, err = run(capsys, "estimate", "--data-dir", ws / "data", "--checkpoint", ws / "m.ckpt",
                         "--pool-capacity", "0", plan, plan)
    assert code == 0 and "pool hits: 0" in err


def test_evaluate_oracle_rows_are_one(capsys, ws, tmp_path):
    metrics = tmp_path / "metrics.tsv"
    code, out, _ = run(capsys, "evaluate", "--data-dir", ws / "data", "--workload-dir", ws / "work",
                       "--checkpoint", ws / "m.ckpt", "--oracle", "--metrics-out", metrics)
    assert code == 0
    rows = [line.split("\t") for line in out.strip().splitlines()]
    assert rows[0][:3] == ["estimator", "target", "n"]
    names = [(r[0], r[1]) for r in rows[1:]]
    assert names == [("model", "cost"), ("model", "card"), ("oracle", "cost"), ("oracle", "card"),
                     ("baseline", "cost"), ("baseline", "card")]
    for r in rows[1:]:
        if r[0] == "oracle":
            assert all(float(x) == 1.0 for x in r[3:])
    assert metrics.read_text() == out
    assert (tmp_path / "metrics.errors.tsv").exists()


def test_evaluate_is_reproducible(capsys, ws, tmp_path):
    digests = []
    for k in range(2):
        m = tmp_path / f"m{k}.tsv"
        run(capsys, "evaluate", "--data-dir", ws / "data", "--workload-dir", ws / "work",
            "--checkpoint", ws / "m.ckpt", "--metrics-out", m)
        digests.append(hashlib.sha256(m.read_bytes()).hexdigest())
    assert digests[0] == digests[1]


def test_mine_rules_then_train_with_dictionary(capsys, ws, tmp_path):
    d = tmp_path / "sub.dict"
    code, out, _ = run(capsys, "mine-rules", "--data-dir", ws / "data", "--workload-dir", ws / "work",
                       "--dict", d, "--rules-out", tmp_path / "rules.txt", "--dim", "16", "--skipgram-epochs", "1")
    assert code == 0 and d.exists() and "substrings" in out
    ckpt = tmp_path / "e.ckpt"
    code, _, _ = run(capsys, "train", "--data-dir", ws / "data", "--workload-dir", ws / "work", "--dict", d,
                     "--checkpoint", ckpt, "--omega", "1", "--epochs", "1", "--sample-size", "50")
    assert code == 0
    plan = sorted((ws / "work").glob("*.json"))[0]
    code, out, _ = run(capsys, "estimate", "--data-dir", ws / "data", "--checkpoint", ckpt, plan)
    assert code == 0 and len(out.splitlines()) == 2
    # the stored dictionary path is used when --dict is not repeated; a missing file is a data error
    d.rename(tmp_path / "moved.dict")
    code, _, _ = run(capsys, "estimate", "--data-dir", ws / "data", "--checkpoint", ckpt, plan)
    assert code == 2


def test_console_entry_point(ws):
    r = subprocess.run([sys.executable, "-m", "treecost.cli", "estimate", "--data-dir", str(ws / "data")],
                       capture_output=True, text=True)
    assert r.returncode == 2 and "no plan files" in r.stderr
