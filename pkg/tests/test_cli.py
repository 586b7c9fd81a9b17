import math

import pytest

from phaselock.cli import run
from phaselock.fields import format_trigpoly, parse_harmonics, read_trigpoly
from phaselock.output import CSV_HEADER, RunManifest, slices_svg
from phaselock.tongues import TongueSlice


@pytest.fixture
def files(tmp_path):
    def put(name, *items):
        path = tmp_path / name
        path.write_text(format_trigpoly(parse_harmonics(list(items))))
        return str(path)
    return {
        "zero": put("zero.txt"),
        "sin": put("sin.txt", "s1=1"),
        "cos": put("cos.txt", "c1=1"),
        "sin2": put("sin2.txt", "s2=1"),
        "mixed": put("mixed.txt", "s1=1", "c2=0.5"),
        "dir": tmp_path,
    }


def lines(out):
    return dict(line.split(" = ", 1) for line in out.strip().splitlines() if " = " in line)


def test_rotnum_translation(files, capsys):
    assert run(["rotnum", files["zero"], "-A", "0.25"]) == 0
    out = lines(capsys.readouterr().out)
    assert abs(float(out["rho"]) - 0.25) <= float(out["error_bound"]) <= 1e-9
    assert out["rational"] == "1/4"


def test_rotnum_sin(files, capsys):
    assert run(["rotnum", files["sin"], "-A", "1.5"]) == 0
    out = lines(capsys.readouterr().out)
    assert float(out["rho"]) == pytest.approx(math.sqrt(1.25), abs=1e-6)
    assert out["rational"] == "none"


def test_rotnum_ode_and_map_csv(files, capsys):
    csv = files["dir"] / "map.csv"
    assert run(["rotnum", files["sin"], files["cos"], "-B", "1", "--method", "ode",
                "--map-csv", str(csv), "--n", "32"]) == 0
    assert lines(capsys.readouterr().out)["rational"] == "0/1"
    assert csv.read_text().startswith("x,H\n")
    assert RunManifest.read(str(csv) + ".manifest").subcommand == "rotnum"


def test_missing_file(files, capsys):
    missing = str(files["dir"] / "nope.txt")
    assert run(["rotnum", missing]) == 2
    assert missing in capsys.readouterr().err


def test_bad_file(files, capsys):
    bad = files["dir"] / "bad.txt"
    bad.write_text("harm 1 0 1\n")
    assert run(["rotnum", str(bad)]) == 2
    assert "constant" in capsys.readouterr().err


def test_usage_errors(files):
    with pytest.raises(SystemExit) as exc:
        run(["synth", files["mixed"], "--rho", "1/x", "--out", "x"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        run(["frobnicate"])
    assert exc.value.code == 2
    assert run(["rotnum", files["sin"], "--n", "8"]) == 2


def test_scan_rsj(files):
    out = files["dir"] / "s.csv"
    svg = files["dir"] / "s.svg"
    assert run(["scan", files["sin"], files["cos"], "--B-list", "1.0", "--qmax", "1",
                "--out", str(out), "--svg", str(svg)]) == 0
    rows = out.read_text().strip().splitlines()
    assert rows[0] == CSV_HEADER
    got = {int(r.split(",")[0]): float(r.split(",")[5]) for r in rows[1:]}
    assert {-1, 0, 1} <= set(got) and all(got[p] > 0 for p in (-1, 0, 1))
    text = svg.read_text()
    assert text.startswith("<svg") and "mapping:" in text and text.count("<line") == len(rows) - 1
    # rerun from the manifest reproduces the CSV byte for byte
    again = files["dir"] / "again.csv"
    assert run(["rerun", str(out) + ".manifest", "--out", str(again)]) == 0
    assert again.read_bytes() == out.read_bytes()


def test_scan_empty_B_list(files):
    out = files["dir"] / "e.csv"
    assert run(["scan", files["sin"], files["cos"], "--B-list", "", "--out", str(out)]) == 0
    assert out.read_text() == CSV_HEADER + "\n"


def test_scan_translation_family_points(files):
    out = files["dir"] / "z.csv"
    assert run(["scan", files["zero"], files["cos"], "--A-range", "-0.6", "0.6", "--B-list", "1",
                "--qmax", "2", "--include-points", "--out", str(out)]) == 0
    rows = out.read_text().strip().splitlines()[1:]
    assert rows and all(float(r.split(",")[5]) <= 2e-6 for r in rows)


def test_scan_parallel_matches_serial(files):
    a, b = files["dir"] / "a.csv", files["dir"] / "b.csv"
    common = [files["sin"], files["cos"], "--A-range", "-1.5", "1.5", "--B-list", "0.5,1.0",
              "--qmax", "1"]
    assert run(["scan", *common, "--out", str(a)]) == 0
    assert run(["scan", *common, "--jobs", "2", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.slow
def test_quantize_check_sin2(files, capsys):
    assert run(["quantize-check", files["sin2"], files["cos"], "--A-range", "-1.5", "1.5",
                "--B-list", "1.0", "--qmax", "4"]) == 0
    out = lines(capsys.readouterr().out)
    assert out["verdict"] == "PASS" and out["m"] == "2"


def test_quantize_check_not_applicable(files, capsys):
    assert run(["quantize-check", files["mixed"], files["cos"]]) == 0
    assert lines(capsys.readouterr().out)["verdict"] == "N/A"


def test_word_eval(files, capsys):
    w = files["dir"] / "w.txt"
    w.write_text(f"k 1\n{math.pi!r} {2 * math.pi!r}\n")
    assert run(["word-eval", str(w), files["sin"]]) == 0
    out = lines(capsys.readouterr().out)
    assert out["rational"] == "1/2"
    # consistent with the same composition evaluated as an autonomous flow then a shift
    assert run(["rotnum", files["sin"], "--n", "1024"]) == 0


def test_word_eval_bad_word(files):
    w = files["dir"] / "w.txt"
    w.write_text("k 2\n0 1\n")
    assert run(["word-eval", str(w), files["sin"]]) == 2


def test_word_search_not_found(files, capsys):
    assert run(["word-search", files["sin"], "--rho", "1/2", "--budget", "10"]) == 4
    assert "not found" in capsys.readouterr().out


def test_word_search_found(files):
    out = files["dir"] / "w.txt"
    assert run(["word-search", files["mixed"], "--rho", "0/1", "--out", str(out)]) == 0
    assert out.read_text().startswith("k 2\n")
    m = RunManifest.read(str(out) + ".manifest")
    assert m.seed == 0 and m.params["rho"] == [0, 1]


def test_synth_special_form(files, capsys):
    prefix = str(files["dir"] / "sx")
    assert run(["synth", files["sin"], "--rho", "1/2", "--out", prefix]) == 4
    report = open(prefix + ".report").read()
    assert "stage = special-form" in report
    assert "special-form" in capsys.readouterr().out


def test_synth_half(files, capsys):
    prefix = str(files["dir"] / "syn")
    assert run(["synth", files["mixed"], "--rho", "1/2", "--seed", "0", "--out", prefix]) == 0
    f = read_trigpoly(prefix + ".forcing")
    assert f.degree > 0
    report = lines(open(prefix + ".report").read())
    assert report["stage"] == "done" and report["rho"] == "1/2"
    assert abs(float(report["multiplier"]) - 1) > 1e-2


def test_manifest_roundtrip():
    m = RunManifest("scan", {"A_range": [-3.0, 3.0], "tol": 1e-10, "x": 0.1 + 0.2, "name": "a b",
                             "flag": True, "none": None}, 7, "0.1.0", 1.5)
    back = RunManifest.from_text(m.to_text())
    assert back == m
    with pytest.raises(ValueError):
        RunManifest.from_text("nonsense\n")
    with pytest.raises(ValueError):
        RunManifest.from_text("version = 1\n")


def test_svg_degenerate_ranges():
    s = TongueSlice(0, 1, 1.0, -0.5, 0.5)
    text = slices_svg([s], (0.0, 0.0), [1.0])
    assert "<line" in text
    assert "<line" not in slices_svg([TongueSlice(0, 1, 1.0, float("nan"), float("nan"))],
                                     (-1, 1), [1.0])
