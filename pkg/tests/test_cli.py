import numpy as np
import pytest

from polsar_gan.checkpoint import read_tensors, write_tensors
from polsar_gan.cli import CSV_HEADER, main
from polsar_gan.data import is_psd, load_raster

TRAIN_FLAGS = ["--patch", "8", "--stride", "4", "--epochs", "2", "--batch", "4", "--m", "2",
               "--latent", "8", "--g-channels", "4,2", "--d-channels", "4,8"]


@pytest.fixture
def scene(tmp_path):
    ctm, lbl = tmp_path / "scene.ctm", tmp_path / "scene.lbl"
    assert main(["synth", "--classes", "2", "--height", "16", "--width", "32", "--layout",
                 "stripes", "--seed", "7", "--out", str(ctm), "--labels", str(lbl)]) == 0
    return ctm, lbl


@pytest.fixture
def trained(tmp_path, scene, capsys):
    ctm, lbl = scene
    model = tmp_path / "model.ckpt"
    assert main(["train", "--data", str(ctm), "--labels", str(lbl), "--per-class-count", "3",
                 "--unlabeled-fraction", "0.5", "--seed", "1", "--out", str(model),
                 *TRAIN_FLAGS]) == 0
    capsys.readouterr()
    return model


def test_synth_files_load_and_are_psd(scene):
    raster = load_raster(*scene)
    assert raster.pixels.shape == (16, 32, 9)
    assert set(np.unique(raster.labels).tolist()) == {1, 2}
    assert is_psd(raster.pixels).all()


def test_synth_is_deterministic(tmp_path, scene):
    again = tmp_path / "again.ctm"
    main(["synth", "--classes", "2", "--height", "16", "--width", "32", "--layout", "stripes",
          "--seed", "7", "--out", str(again), "--labels", str(tmp_path / "again.lbl")])
    assert again.read_bytes() == scene[0].read_bytes()


def test_synth_rejects_single_class(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["synth", "--classes", "1", "--out", str(tmp_path / "a"), "--labels",
              str(tmp_path / "b")])
    assert info.value.code == 2


def test_train_prints_loss_csv(tmp_path, scene, capsys):
    ctm, lbl = scene
    code = main(["train", "--data", str(ctm), "--labels", str(lbl), "--per-class-count", "3",
                 "--unlabeled-fraction", "0.5", "--out", str(tmp_path / "m.ckpt"), *TRAIN_FLAGS])
    lines = capsys.readouterr().out.splitlines()
    assert code == 0
    assert lines[0] == CSV_HEADER
    assert [line.split(",")[0] for line in lines[1:]] == ["1", "2"]
    assert (tmp_path / "m.ckpt").read_bytes()[:4] == b"CVG1"


def test_train_supervised_zero_terms(tmp_path, scene, capsys):
    ctm, lbl = scene
    main(["train", "--data", str(ctm), "--labels", str(lbl), "--per-class-count", "3",
          "--mode", "supervised", "--out", str(tmp_path / "m.ckpt"), *TRAIN_FLAGS])
    for line in capsys.readouterr().out.splitlines()[1:]:
        _, _, l_unl, l_gen, _ = line.split(",")
        assert float(l_unl) == 0.0 and float(l_gen) == 0.0


def test_train_is_deterministic(tmp_path, scene, capsys):
    ctm, lbl = scene
    for name in ("a", "b"):
        main(["train", "--data", str(ctm), "--labels", str(lbl), "--per-class-ratio", "0.3",
              "--seed", "4", "--out", str(tmp_path / f"{name}.ckpt"), *TRAIN_FLAGS])
    assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()


def test_train_quota_needs_exactly_one_flag(tmp_path, scene):
    ctm, lbl = scene
    with pytest.raises(SystemExit) as info:
        main(["train", "--data", str(ctm), "--labels", str(lbl), "--out", str(tmp_path / "m")])
    assert info.value.code == 2


def test_train_unmet_quota_is_one_line_error(tmp_path, scene, capsys):
    ctm, lbl = scene
    code = main(["train", "--data", str(ctm), "--labels", str(lbl), "--per-class-count", "500",
                 "--out", str(tmp_path / "m.ckpt"), *TRAIN_FLAGS])
    err = capsys.readouterr().err.strip().splitlines()
    assert code == 1
    assert err[-1].startswith("error: class 1")


def test_evaluate(tmp_path, scene, trained, capsys):
    ctm, lbl = scene
    assert main(["evaluate", "--data", str(ctm), "--labels", str(lbl), "--model", str(trained),
                 "--out", str(tmp_path / "cm.csv")]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "class,support,correct,accuracy"
    assert [line.split("=")[0] for line in out[-3:]] == ["# oa", "# aa", "# kappa"]
    oa = float(out[-3].split("=")[1])
    assert 0.0 <= oa <= 1.0
    assert (tmp_path / "cm.csv").read_text().startswith("class,pred_1,pred_2")


def test_evaluate_missing_model(tmp_path, scene, capsys):
    ctm, lbl = scene
    code = main(["evaluate", "--data", str(ctm), "--labels", str(lbl),
                 "--model", str(tmp_path / "nope.ckpt"), "--out", str(tmp_path / "cm.csv")])
    errors = [l for l in capsys.readouterr().err.splitlines() if l.startswith("error:")]
    assert code == 1 and len(errors) == 1
    assert "nope.ckpt" in errors[0]


def test_generate_tiles_one_row(tmp_path, trained):
    out = tmp_path / "gen.ctm"
    assert main(["generate", "--model", str(trained), "--count", "4", "--seed", "3",
                 "--out", str(out)]) == 0
    assert load_raster(out).pixels.shape == (8, 32, 9)
    again = tmp_path / "gen2.ctm"
    main(["generate", "--model", str(trained), "--count", "4", "--seed", "3", "--out", str(again)])
    assert again.read_bytes() == out.read_bytes()


def test_compare_dist_with_itself(tmp_path, scene, capsys):
    hist = tmp_path / "hist.csv"
    assert main(["compare-dist", "--real", str(scene[0]), "--gen", str(scene[0]),
                 "--bins", "16", "--out", str(hist)]) == 0
    ks_lines = [l for l in hist.read_text().splitlines() if l.startswith("# ks=")]
    assert len(ks_lines) == 4
    assert all(float(l.split("=")[1]) == 0.0 for l in ks_lines)
    stdout = capsys.readouterr().out.splitlines()
    assert stdout[0] == "channel,plane,ks" and len(stdout) == 5


def test_compare_dist_bad_file(tmp_path, scene, capsys):
    junk = tmp_path / "junk.ctm"
    junk.write_bytes(b"JUNK" + bytes(40))
    code = main(["compare-dist", "--real", str(scene[0]), "--gen", str(junk),
                 "--out", str(tmp_path / "h.csv")])
    assert code == 1
    assert "expected magic" in capsys.readouterr().err


def test_pcolor_dimensions(tmp_path, scene):
    out = tmp_path / "x.ppm"
    assert main(["pcolor", "--data", str(scene[0]), "--out", str(out)]) == 0
    assert out.read_bytes().startswith(b"P6\n32 16\n255\n")
    assert len(out.read_bytes()) == len(b"P6\n32 16\n255\n") + 16 * 32 * 3


def test_help_lists_defaults(capsys):
    with pytest.raises(SystemExit):
        main(["train", "--help"])
    text = capsys.readouterr().out
    assert "0.0005" in text and "0.999" in text and "semisup" in text


@pytest.mark.parametrize("command, defaults", [
    ("train", ["--lr", "--beta1", "--beta2", "--epochs", "--batch", "--mode", "--seed",
               "--unlabeled-fraction"]),
    ("synth", ["--height", "--width", "--looks", "--layout", "--seed"]),
    ("generate", ["--count", "--seed"]),
    ("compare-dist", ["--bins", "--channels"]),
])
def test_help_shows_default_for_every_flag(capsys, command, defaults):
    with pytest.raises(SystemExit):
        main([command, "--help"])
    body = capsys.readouterr().out.split("\n\n", 1)[1]
    text = " ".join(body.split())
    for flag in defaults:
        tail = text.split(flag, 1)[1]
        assert "(default:" in tail.split("--", 1)[0], flag


def test_stride_help_has_single_default(capsys):
    with pytest.raises(SystemExit):
        main(["train", "--help"])
    body = capsys.readouterr().out.split("\n\n", 1)[1]
    text = " ".join(body.split())
    stride = text.split("--stride STRIDE", 1)[1].split("--", 1)[0]
    assert stride.count("(default:") == 1


def test_evaluate_rejects_class_count_mismatch(tmp_path, trained, capsys):
    ctm, lbl = tmp_path / "k3.ctm", tmp_path / "k3.lbl"
    main(["synth", "--classes", "3", "--height", "16", "--width", "48", "--layout",
          "stripes", "--seed", "2", "--out", str(ctm), "--labels", str(lbl)])
    capsys.readouterr()
    code = main(["evaluate", "--data", str(ctm), "--labels", str(lbl), "--model", str(trained),
                 "--out", str(tmp_path / "cm.csv")])
    errors = [l for l in capsys.readouterr().err.splitlines() if l.startswith("error:")]
    assert code == 1 and len(errors) == 1
    assert "K = 2" in errors[0] and "K = 3" in errors[0]
    assert not (tmp_path / "cm.csv").exists()


def test_generate_with_corrupted_config_is_one_line_error(tmp_path, trained, capsys):
    tensors = read_tensors(trained)
    tensors["config.mode"] = np.asarray(7.0)
    write_tensors(tensors, tmp_path / "bad.ckpt")
    code = main(["generate", "--model", str(tmp_path / "bad.ckpt"), "--out",
                 str(tmp_path / "g.ctm")])
    errors = [l for l in capsys.readouterr().err.splitlines() if l.startswith("error:")]
    assert code == 1 and len(errors) == 1
    assert "config.mode" in errors[0]
