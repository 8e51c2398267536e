import json

import numpy as np
import pytest

from morphlab.cli import dispatch
from morphlab.pipeline import read_manifest
from morphlab.raster import Raster, load_image, save_image

from conftest import face_landmarks, noise_image, rng
from test_pipeline import write_class_dir


def write_landmarks(path, landmarks):
    path.write_text(json.dumps({"points": landmarks.points.tolist()}))


def write_annotation(path, w, h):
    path.write_text(
        json.dumps(
            {
                "left_eye": [w / 2 - 75.0, h / 2 - 40.0],
                "right_eye": [w / 2 + 75.0, h / 2 - 40.0],
                "nose_tip": [(w - 1) / 2.0, (h - 1) / 2.0],
            }
        )
    )


def test_no_arguments_usage_exit_1(capsys):
    assert dispatch([]) == 1
    assert "usage" in capsys.readouterr().err


def test_unknown_subcommand_exit_1(capsys):
    assert dispatch(["frobnicate"]) == 1
    assert "usage" in capsys.readouterr().err.lower()


def test_unknown_flag_exit_1(capsys):
    assert dispatch(["evaluate", "--nope"]) == 1
    err = capsys.readouterr().err
    assert "usage" in err


def test_help_exit_0(capsys):
    assert dispatch(["--help"]) == 0
    assert "morphlab" in capsys.readouterr().out


def test_missing_input_file_exit_1(tmp_path, capsys):
    out = tmp_path / "o.png"
    code = dispatch(["pns", "--in", str(tmp_path / "missing.png"), "--out", str(out), "--seed", "1"])
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_evaluate_prints_summary(tmp_path, capsys):
    scores = tmp_path / "s.csv"
    scores.write_text(
        "label,score,group_id\nbonafide,0.1,\nbonafide,0.2,\nattack,0.8,\nattack,0.9,\n"
    )
    assert dispatch(["evaluate", "--scores", str(scores)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "accuracy=100.000000"
    assert out[1] == "eer=0.000000"
    assert out[2] == "bpcer@apcer10=0.000000"
    assert len(out) == 5


def test_pns_deterministic_bytes(tmp_path):
    src = tmp_path / "in.png"
    save_image(noise_image(50, height=40, width=40, channels=3), src)
    out1, out2 = tmp_path / "a.png", tmp_path / "b.png"
    base = ["pns", "--in", str(src), "--seed", "7"]
    assert dispatch(base + ["--out", str(out1)]) == 0
    assert dispatch(base + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_pns_seed_changes_output(tmp_path):
    src = tmp_path / "in.png"
    save_image(noise_image(51, height=40, width=40), src)
    out1, out2 = tmp_path / "a.png", tmp_path / "b.png"
    assert dispatch(["pns", "--in", str(src), "--out", str(out1), "--seed", "1"]) == 0
    assert dispatch(["pns", "--in", str(src), "--out", str(out2), "--seed", "2"]) == 0
    assert out1.read_bytes() != out2.read_bytes()


def test_pns_params_file_and_flag_override(tmp_path):
    src = tmp_path / "in.png"
    save_image(noise_image(52, height=30, width=30), src)
    cfg = tmp_path / "p.cfg"
    cfg.write_text("omega=1\nbeta_x=0\nbeta_k=0\ngamma=1\nk1=1\nk2=1\n"
                   "edge_noise_std=0\ndark_noise_scale=0\njitter=0\n")
    out = tmp_path / "o.png"
    assert dispatch(["pns", "--in", str(src), "--out", str(out), "--seed", "0",
                     "--params", str(cfg)]) == 0
    assert load_image(out).data.tobytes() == load_image(src).data.tobytes()
    # flag overrides the file: gamma!=1 breaks the identity
    out2 = tmp_path / "o2.png"
    assert dispatch(["pns", "--in", str(src), "--out", str(out2), "--seed", "0",
                     "--params", str(cfg), "--gamma", "0.5"]) == 0
    assert load_image(out2).data.tobytes() != load_image(src).data.tobytes()


def test_morph_cli_endpoint(tmp_path):
    w, h = 36, 40
    i0, i1 = tmp_path / "a.png", tmp_path / "b.png"
    save_image(noise_image(53, height=h, width=w), i0)
    save_image(noise_image(54, height=h, width=w), i1)
    lm = face_landmarks(w, h)
    lm0, lm1 = tmp_path / "a.json", tmp_path / "b.json"
    write_landmarks(lm0, lm)
    write_landmarks(lm1, lm)
    out = tmp_path / "m.png"
    assert dispatch(["morph", "--i0", str(i0), "--i1", str(i1), "--lm0", str(lm0),
                     "--lm1", str(lm1), "--alpha", "0.5", "--out", str(out)]) == 0
    blend = load_image(out).data.astype(float)
    total = load_image(i0).data.astype(float) + load_image(i1).data.astype(float)
    # even sums quantize exactly; odd sums sit on the rounding boundary and
    # the identity warp's ~1e-13 fuzz may tip them either way
    even = total % 2 == 0
    assert np.array_equal(blend[even], total[even] / 2)
    assert np.all(np.abs(blend - total / 2) <= 0.5)


def test_morph_cli_inner_only_flag(tmp_path):
    w, h = 36, 40
    i0, i1 = tmp_path / "a.png", tmp_path / "b.png"
    save_image(Raster(np.full((h, w, 1), 10, np.uint8)), i0)
    save_image(Raster(np.full((h, w, 1), 250, np.uint8)), i1)
    lm = face_landmarks(w, h)
    write_landmarks(tmp_path / "a.json", lm)
    write_landmarks(tmp_path / "b.json", lm)
    out = tmp_path / "m.png"
    assert dispatch(["morph", "--i0", str(i0), "--i1", str(i1), "--lm0", str(tmp_path / "a.json"),
                     "--lm1", str(tmp_path / "b.json"), "--alpha", "0.5", "--out", str(out),
                     "--inner-only"]) == 0
    data = load_image(out).data
    assert data[0, 0, 0] == 10  # outside hull: first image only
    assert data[h // 2, w // 2, 0] == 130  # inside: blended


def test_normalize_cli(tmp_path):
    src = tmp_path / "face.png"
    save_image(noise_image(55, height=400, width=350), src)
    write_annotation(tmp_path / "face.json", 350, 400)
    out = tmp_path / "norm.png"
    assert dispatch(["normalize", "--in", str(src), "--ann", str(tmp_path / "face.json"),
                     "--out", str(out)]) == 0
    norm = load_image(out)
    assert (norm.width, norm.height) == (350, 400)
    assert np.array_equal(norm.data, load_image(src).data)  # identity geometry


def test_augment_cli_counts(tmp_path):
    src = tmp_path / "n.png"
    save_image(noise_image(56, height=400, width=350), src)
    write_annotation(tmp_path / "n.json", 350, 400)
    out_dir = tmp_path / "aug"
    manifest = tmp_path / "aug.csv"
    assert dispatch(["augment", "--in", str(src), "--ann", str(tmp_path / "n.json"),
                     "--scheme", "mc", "--crop-size", "224x224",
                     "--out-dir", str(out_dir), "--manifest", str(manifest)]) == 0
    files = list(out_dir.glob("*.png"))
    assert len(files) == 30
    assert len(read_manifest(manifest)) == 30


def test_build_set_cli_threads_identical(tmp_path):
    write_class_dir(tmp_path / "genuine", 2, 57)
    write_class_dir(tmp_path / "morphed", 2, 58)

    def run(tag, threads):
        out_dir = tmp_path / f"out{tag}"
        manifest = tmp_path / f"m{tag}.csv"
        code = dispatch(["build-set", "--genuine", str(tmp_path / "genuine"),
                         "--morphed", str(tmp_path / "morphed"), "--scheme", "mc",
                         "--seed", "3", "--out-dir", str(out_dir),
                         "--manifest", str(manifest), "--threads", str(threads)])
        assert code == 0
        blobs = {p.relative_to(out_dir).as_posix(): p.read_bytes()
                 for p in sorted(out_dir.rglob("*.png"))}
        return manifest.read_bytes(), blobs

    m1, b1 = run("a", 1)
    m4, b4 = run("b", 4)
    assert m1 == m4 and b1 == b4
    assert len(b1) == 4 * 30


def test_spectrum_cli_csv_and_plot(tmp_path):
    src = tmp_path / "t.png"
    save_image(noise_image(59, height=24, width=20), src)
    csv = tmp_path / "spec.csv"
    png = tmp_path / "spec.png"
    assert dispatch(["spectrum", "--in", str(src), "--out-csv", str(csv),
                     "--plot", str(png), "--log-display"]) == 0
    lines = csv.read_text().splitlines()
    assert len(lines) == 24 and len(lines[0].split(",")) == 20
    assert png.exists() and png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_spectrum_compare_cli(tmp_path, capsys):
    a, b = tmp_path / "a.png", tmp_path / "b.png"
    save_image(noise_image(60, height=32, width=32), a)
    save_image(noise_image(60, height=32, width=32), b)
    assert dispatch(["spectrum-compare", "--a", str(a), "--b", str(b)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "angle=0.000000"
    assert out[1] == "correlation=1.000000"


def test_train_score_evaluate_round_trip(tmp_path, capsys):
    g = rng(61)
    lines = []
    for _ in range(30):
        v = g.normal(0.0, 0.3, 4); v[:2] += 1.0
        lines.append("genuine," + ",".join(f"{x:.6f}" for x in v))
    for _ in range(30):
        v = g.normal(0.0, 0.3, 4); v[2:] += 1.0
        lines.append("morphed," + ",".join(f"{x:.6f}" for x in v))
    features = tmp_path / "f.csv"
    features.write_text("\n".join(lines) + "\n")

    for kind in ("svm", "crc"):
        model = tmp_path / f"{kind}.bin"
        scores = tmp_path / f"{kind}_scores.csv"
        assert dispatch(["train", "--kind", kind, "--features", str(features),
                         "--model-out", str(model)]) == 0
        assert dispatch(["score", "--model", str(model), "--features", str(features),
                         "--scores-out", str(scores)]) == 0
        assert dispatch(["evaluate", "--scores", str(scores)]) == 0
        out = dict(line.split("=") for line in capsys.readouterr().out.splitlines())
        assert float(out["accuracy"]) >= 99.0


def test_fuse_cli(tmp_path):
    scores = tmp_path / "s.csv"
    scores.write_text(
        "label,score,group_id\nattack,0.8,g1\nattack,0.6,g1\nbonafide,0.3,\n"
    )
    out = tmp_path / "fused.csv"
    assert dispatch(["fuse", "--scores", str(scores), "--group-by", "group_id",
                     "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[1] == "attack,0.700000,g1"
    assert lines[2] == "bonafide,0.300000,"


def test_fuse_rejects_unknown_column(tmp_path, capsys):
    scores = tmp_path / "s.csv"
    scores.write_text("label,score,group_id\nattack,0.8,g1\n")
    assert dispatch(["fuse", "--scores", str(scores), "--group-by", "other",
                     "--out", str(tmp_path / "o.csv")]) == 1


def test_det_cli_writes_csv_and_figure(tmp_path):
    scores = tmp_path / "s.csv"
    scores.write_text("label,score,group_id\nbonafide,0.1,\nattack,0.9,\n")
    csv = tmp_path / "det.csv"
    assert dispatch(["det", "--scores", str(scores), "--out-csv", str(csv)]) == 0
    assert csv.exists()
    figure = tmp_path / "det.png"  # default: alongside the CSV
    assert figure.exists() and figure.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_det_cli_no_plot(tmp_path):
    scores = tmp_path / "s.csv"
    scores.write_text("label,score,group_id\nbonafide,0.1,\nattack,0.9,\n")
    csv = tmp_path / "det2.csv"
    assert dispatch(["det", "--scores", str(scores), "--out-csv", str(csv), "--no-plot"]) == 0
    assert csv.exists() and not (tmp_path / "det2.png").exists()


def test_internal_error_exit_2(tmp_path, capsys, monkeypatch):
    import morphlab.cli as cli

    def boom(args):
        raise RuntimeError("unexpected")

    monkeypatch.setitem(cli._HANDLERS, "evaluate", boom)
    scores = tmp_path / "s.csv"
    scores.write_text("label,score,group_id\nbonafide,0.1,\nattack,0.9,\n")
    assert dispatch(["evaluate", "--scores", str(scores)]) == 2
    assert "internal error" in capsys.readouterr().err


def test_console_script_installed():
    import subprocess

    proc = subprocess.run(["morphlab", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "morph" in proc.stdout


def test_det_figure_deterministic(tmp_path):
    scores = tmp_path / "s.csv"
    scores.write_text("label,score,group_id\nbonafide,0.1,\nbonafide,0.6,\nattack,0.5,\nattack,0.9,\n")
    p1, p2 = tmp_path / "d1.png", tmp_path / "d2.png"
    assert dispatch(["det", "--scores", str(scores), "--out-csv", str(tmp_path / "d1.csv"),
                     "--plot", str(p1)]) == 0
    assert dispatch(["det", "--scores", str(scores), "--out-csv", str(tmp_path / "d2.csv"),
                     "--plot", str(p2)]) == 0
    assert p1.read_bytes() == p2.read_bytes()
