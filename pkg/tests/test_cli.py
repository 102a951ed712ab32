import csv
import json

from calibloss import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestBounds:
    def test_csv_has_stamp_and_header(self, capsys):
        code, out, _ = run(capsys, "bounds", "--loss", "log,loglog", "--N", "1e6", "--gamma", "0.1", "--delta", "0.05")
        lines = out.splitlines()
        assert code == 0 and lines[0].startswith("# generated")
        rows = list(csv.DictReader(lines[1:]))
        assert [r["loss"] for r in rows] == ["log", "loglog"]
        assert [r["vacuous"] for r in rows] == ["true", "false"]

    def test_round_trip(self, tmp_path, capsys):
        path = tmp_path / "b.csv"
        code, _, _ = run(capsys, "bounds", "--loss", "log,sqlog,powlog:0.5", "--N", "1e4", "--eps", "0.4",
                         "--gamma", "0.1", "--delta", "0.05", "--alpha1", "1e-4", "--alpha2", "1e-5",
                         "--out", str(path))
        assert code == 0
        code, out, _ = run(capsys, "bounds", "--check", str(path))
        assert code == 0 and "reproduce" in out
        text = path.read_text().replace("true", "false")
        path.write_text(text)
        assert run(capsys, "bounds", "--check", str(path))[0] == 2

    def test_json(self, capsys):
        code, out, _ = run(capsys, "bounds", "--N", "100", "--eps", "0.5", "--format", "json")
        doc = json.loads(out)
        assert code == 0 and set(doc) == {"config", "rows", "summary"}

    def test_usage_errors(self, capsys):
        assert run(capsys, "bounds", "--eps", "0.5")[0] == 1
        assert run(capsys, "bounds", "--N", "10", "--eps", "5")[0] == 1
        assert run(capsys, "bounds", "--N", "ten", "--eps", "0.5")[0] == 1
        assert run(capsys, "nonsense")[0] == 1

    def test_missing_file(self, capsys, tmp_path):
        assert run(capsys, "bounds", "--check", str(tmp_path / "absent.csv"))[0] == 3


class TestOtherCommands:
    def test_verify(self, capsys):
        code, out, _ = run(capsys, "verify", "--suite", "strong-properness", "--N", "5", "--trials", "6",
                           "--format", "json")
        assert code == 0 and json.loads(out)["summary"]["passed"]

    def test_demo_l2(self, capsys):
        code, out, _ = run(capsys, "demo", "--name", "l2-counterexample", "--N", "10", "--format", "json")
        assert code == 0 and json.loads(out)["summary"]["gap_times_N"] == 2.0
        assert run(capsys, "demo", "--name", "l2-counterexample", "--N", "9")[0] == 1

    def test_demo_dense_guard(self, capsys):
        assert run(capsys, "demo", "--name", "logloss-nonconcentration", "--N", "10", "--m", "5")[0] == 1

    def test_linear_demo_min_reversal(self, capsys):
        args = ("demo", "--name", "linear-improperness", "--N", "10000", "--m", "100", "--trials", "200")
        assert run(capsys, *args)[0] == 0
        assert run(capsys, *args, "--min-reversal", "0.5")[0] == 2

    def test_calibrate(self, capsys, tmp_path):
        qout, trace = tmp_path / "q.json", tmp_path / "t.json"
        code, out, _ = run(capsys, "calibrate", "--N", "100", "--blocks", "5", "--q-out", str(qout),
                           "--trace", str(trace), "--format", "json")
        assert code == 0 and json.loads(out)["summary"]["certified"]
        assert qout.exists() and "bucket_count" in json.loads(trace.read_text())

    def test_concentrate(self, capsys):
        code, out, _ = run(capsys, "concentrate", "--N", "100", "--loss", "sqlog", "--m", "500",
                           "--trials", "50", "--gamma", "5", "--delta", "0.05", "--format", "json")
        assert code == 0 and json.loads(out)["summary"]["failure_rate"] == 0.0

    def test_sample_proper(self, capsys):
        code, _, _ = run(capsys, "sample-proper", "--N", "50", "--blocks", "50", "--m", "10", "--trials", "5")
        assert code == 0

    def test_trigram(self, capsys, tmp_path):
        curve = tmp_path / "c.csv"
        code, out, _ = run(capsys, "trigram", "--curve", str(curve), "--samples", "3", "--format", "json")
        doc = json.loads(out)
        assert code == 0 and len(doc["rows"]) == 3 and curve.exists()

    def test_scoring(self, capsys):
        code, out, _ = run(capsys, "scoring", "--N", "16", "--trials", "50", "--format", "json")
        assert code == 0 and json.loads(out)["summary"]["passed"]
