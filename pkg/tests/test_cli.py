import json
from argparse import Namespace

import numpy as np
import pytest

from sdrain import corpus
from sdrain.cli import RunConfig, dispatch, resolve_config
from sdrain.dictionary import load_dictionary, save_dictionary
from sdrain.images import load_image, save_image, save_mask


@pytest.fixture(scope="module")
def files(tmp_path_factory, desk_dicts):
    d = tmp_path_factory.mktemp("cli")
    save_dictionary(desk_dicts.nonrain, d / "nonrain.sdic")
    save_dictionary(desk_dicts.rain, d / "rain.sdic")
    img, _ = corpus.rain_corpus(1, (40, 40), seed=11)[0]
    save_image(img, d / "rainy.png")
    return d


def test_run_config_defaults():
    cfg = RunConfig()
    assert (cfg.m, cfg.K, cfg.L, cfg.th_s, cfg.th_c, cfg.eps) == (16, 1024, 3, 0.25, 0.8, None)
    assert cfg.derain_config().eps is None
    assert RunConfig(eps=3.0).derain_config().eps == 3.0 / 255


def test_config_precedence(tmp_path, monkeypatch):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"th_s": 0.3, "L": 4, "threads": 2}))
    cfg = resolve_config(Namespace(config=str(path), L=5, th_c=None))
    assert (cfg.th_s, cfg.L, cfg.th_c, cfg.threads) == (0.3, 5, 0.8, 2)
    monkeypatch.setenv("SD_THREADS", "3")
    assert resolve_config(Namespace(config=None)).threads == 3
    assert resolve_config(Namespace(config=None, threads=6)).threads == 6
    path.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(ValueError, match="bogus"):
        resolve_config(Namespace(config=str(path)))


def test_derain_happy_path(files, capsys):
    out, smap = files / "y.png", files / "s.png"
    code = dispatch(["derain", "--in", str(files / "rainy.png"), "--dn",
                     str(files / "nonrain.sdic"), "--dr", str(files / "rain.sdic"),
                     "--out", str(out), "--map-out", str(smap)])
    assert code == 0
    assert load_image(out).shape == (40, 40) and load_image(smap).shape == (40, 40)
    assert "eps=" in capsys.readouterr().out


def test_missing_dictionary_names_path(files, capsys):
    missing = files / "absent.sdic"
    code = dispatch(["derain", "--in", str(files / "rainy.png"), "--dn", str(missing),
                     "--dr", str(files / "rain.sdic"), "--out", str(files / "z.png")])
    assert code != 0
    assert str(missing) in capsys.readouterr().err
    assert not (files / "z.png").exists()


def test_missing_image(files, capsys):
    code = dispatch(["map", "--in", str(files / "nothere.png"), "--dr",
                     str(files / "rain.sdic"), "--out", str(files / "m.png")])
    assert code != 0 and "nothere.png" in capsys.readouterr().err


def test_corr_reports_count(files, capsys, desk_dicts, tmp_path):
    code = dispatch(["corr", "--dn", str(files / "nonrain.sdic"), "--dr",
                     str(files / "rain.sdic"), "--th", "0.8", "--figures", str(tmp_path)])
    assert code == 0
    last = capsys.readouterr().out.strip().splitlines()[-1].split("\t")
    C = desk_dicts.nonrain.atoms.T @ desk_dicts.rain.atoms
    assert last[0] == "above_threshold"
    assert int(last[2]) == int((C.max(axis=1) >= 0.8).sum())
    assert (tmp_path / "correlation.png").stat().st_size > 0


def test_synth_map_eval_chain(files, capsys, tmp_path):
    src, mask = corpus.rain_image((40, 40), seed=4, coverage=0.9)
    save_mask(mask, tmp_path / "mask.png")
    save_image(src, tmp_path / "src.png")
    clean = tmp_path / "clean.png"
    save_image(corpus.texture("brick", (40, 40)), clean)
    rainy = tmp_path / "rainy.png"
    assert dispatch(["synth", "--clean", str(clean), "--rain", str(tmp_path / "src.png"),
                     "--mask", str(tmp_path / "mask.png"), "--out", str(rainy),
                     "--patch", "8", "--count", "4"]) == 0
    assert dispatch(["map", "--in", str(rainy), "--dr", str(files / "rain.sdic"),
                     "--out", str(tmp_path / "map.png")]) == 0
    capsys.readouterr()
    assert dispatch(["eval", "--pair", str(clean), str(rainy), "--pair", str(clean),
                     str(clean), "--figures", str(tmp_path / "fig")]) == 0
    rows = [line.split("\t") for line in capsys.readouterr().out.strip().splitlines()]
    assert [r[0] for r in rows] == ["rainy", "clean"]
    assert float(rows[1][1]) == 99.0 and float(rows[1][2]) == 1.0
    assert float(rows[0][1]) < 99.0
    assert (tmp_path / "fig" / "eval.png").exists()


def test_train_dict_and_corpus(tmp_path, capsys):
    root = tmp_path / "corpus"
    assert dispatch(["make-corpus", "--out", str(root), "--n-rain", "2", "--n-clean", "1",
                     "--size", "40"]) == 0
    out = tmp_path / "dr.sdic"
    assert dispatch(["train-dict", "--corpus", str(root / "rain"), "--masks",
                     str(root / "masks"), "-m", "4", "-K", "20", "--patches", "200",
                     "--iters", "2", "--out", str(out), "--figures", str(tmp_path)]) == 0
    D = load_dictionary(out)
    assert (D.kind, D.m, D.K) == ("rain", 4, 20)
    assert (tmp_path / "dr_atoms.png").exists()
    out2 = tmp_path / "dn.sdic"
    assert dispatch(["train-dict", "--corpus", str(root / "clean"), "-m", "4", "-K", "20",
                     "--patches", "200", "--iters", "2", "--out", str(out2)]) == 0
    assert load_dictionary(out2).kind == "nonrain"
    # masks directory without the matching file
    (root / "masks" / "rain_00.png").unlink()
    assert dispatch(["train-dict", "--corpus", str(root / "rain"), "--masks",
                     str(root / "masks"), "-m", "4", "-K", "20", "--out", str(out)]) != 0


def test_threads_byte_identical(files):
    outs = []
    for t in ("1", "8"):
        out = files / f"t{t}.png"
        assert dispatch(["derain", "--in", str(files / "rainy.png"), "--dn",
                         str(files / "nonrain.sdic"), "--dr", str(files / "rain.sdic"),
                         "--out", str(out), "--threads", t]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_bad_usage():
    with pytest.raises(SystemExit) as exc:
        dispatch(["frobnicate"])
    assert exc.value.code != 0
    with pytest.raises(SystemExit):
        dispatch(["derain", "--in", "x.png"])


def test_flags_reach_config(files, tmp_path):
    out = tmp_path / "fixed.png"
    cfgfile = tmp_path / "c.json"
    cfgfile.write_text(json.dumps({"eps": 5.0, "th_c": 0.9}))
    assert dispatch(["derain", "--in", str(files / "rainy.png"), "--dn",
                     str(files / "nonrain.sdic"), "--dr", str(files / "rain.sdic"),
                     "--out", str(out), "--config", str(cfgfile), "--stride", "2"]) == 0
    assert np.isfinite(load_image(out).luma).all()
