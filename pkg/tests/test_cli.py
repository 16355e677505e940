import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import planted_bank_corpus, planted_distill_corpus, write_manifest
from srdistill.cli import RunConfig, build_parser, main, resolve_config
from srdistill.imageio import encode_png, load_image, quantize, save_image
from srdistill.metrics import psnr, ssim
from srdistill.tensorio import read_tensor, write_tensor


def _tree(root):
    return sorted((p.relative_to(root).as_posix(), p.read_bytes()) for p in root.rglob("*") if p.is_file())


@pytest.fixture(scope="module")
def planted(tmp_path_factory):
    root = tmp_path_factory.mktemp("planted")
    target, aux, ids = planted_distill_corpus()
    write_manifest(root / "t" / "m.json", "tgt", target)
    write_manifest(root / "a" / "m.json", "aux", aux)
    return root, ids


def test_degrade_sizes(tmp_path, rng):
    save_image(rng.random((256, 256, 3)).astype(np.float32), tmp_path / "in.png")
    assert main(["degrade", "--in", str(tmp_path / "in.png"), "--out", str(tmp_path / "o"), "--scale", "4"]) == 0
    assert load_image(tmp_path / "o" / "hr" / "in.png").shape == (64, 64, 3)
    assert load_image(tmp_path / "o" / "lr" / "in.png").shape == (16, 16, 3)
    doc = json.loads((tmp_path / "o" / "degrade.json").read_text())
    assert doc["config"]["scale"] == 4 and doc["version"] == 1


def test_degrade_scale_one(tmp_path, rng):
    img = rng.random((20, 30, 3)).astype(np.float32)
    save_image(img, tmp_path / "x.png")
    assert main(["degrade", "--in", str(tmp_path), "--out", str(tmp_path / "o"), "--scale", "1"]) == 0
    for sub in ("hr", "lr"):
        assert (tmp_path / "o" / sub / "x.png").read_bytes() == encode_png(load_image(tmp_path / "x.png"))
    assert np.array_equal(quantize(load_image(tmp_path / "o" / "lr" / "x.png")), quantize(img))


def test_degrade_corrupt_png(tmp_path, capsys):
    (tmp_path / "bad.png").write_bytes(b"\x89PNG\r\n\x1a\n garbage")
    rc = main(["degrade", "--in", str(tmp_path / "bad.png"), "--out", str(tmp_path / "o")])
    assert rc != 0
    assert "bad.png" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_bank_planted_and_rerun(tmp_path):
    imgs, planted = planted_bank_corpus()
    m = write_manifest(tmp_path / "ds" / "m.json", "ds", imgs)
    args = ["bank", "--dataset", str(m), "--patch-size", "16", "--bottom-frac", "0.02", "--workers", "1"]
    assert main(args + ["--out", str(tmp_path / "b1")]) == 0
    doc = json.loads((tmp_path / "b1" / "bank.json").read_text())
    got = [(e["source_id"], *e["origin"]) for e in doc["entries"]]
    assert got == sorted(("ds/" + sid, r, c) for sid, r, c in planted)
    assert doc["config"] == {"scale": 4, "patch_size": 16, "bottom_frac": 0.02, "seed": 0}
    assert main(args + ["--out", str(tmp_path / "b2")]) == 0
    assert _tree(tmp_path / "b1") == _tree(tmp_path / "b2")
    # rerunning over an existing bank replaces it
    assert main(args + ["--out", str(tmp_path / "b1")]) == 0
    assert _tree(tmp_path / "b1") == _tree(tmp_path / "b2")


def test_bank_empty_dataset(tmp_path, capsys):
    (tmp_path / "m.json").write_text(json.dumps({"dataset_id": "e", "images": []}))
    assert main(["bank", "--dataset", str(tmp_path / "m.json"), "--out", str(tmp_path / "o")]) != 0
    assert "empty dataset" in capsys.readouterr().err
    (tmp_path / "d").mkdir()
    assert main(["bank", "--dataset", str(tmp_path / "d"), "--out", str(tmp_path / "o")]) != 0


def test_distill_no_aux(planted, tmp_path):
    root, _ = planted
    rc = main(["distill", "--target", str(root / "t" / "m.json"), "--out", str(tmp_path / "o"),
               "--patch-size", "16", "--bottom-frac", "0.04", "--scale", "2", "--workers", "1"])
    assert rc == 0
    doc = json.loads((tmp_path / "o" / "pairs.json").read_text())
    assert len(doc["pairs"]) == 3 and doc["aux"] is None


def test_distill_planted(planted, tmp_path):
    root, ids = planted
    rc = main(["distill", "--target", str(root / "t" / "m.json"), "--aux", str(root / "a" / "m.json"),
               "--out", str(tmp_path / "o"), "--patch-size", "16", "--bottom-frac", "0.04", "--scale", "2",
               "--workers", "1"])
    assert rc == 0
    doc = json.loads((tmp_path / "o" / "pairs.json").read_text())
    aux = [p["image_id"] for p in doc["pairs"] if p["origin_dataset"] == "aux"]
    assert aux == ids
    assert doc["config"] == {"scale": 2, "patch_size": 16, "bottom_frac": 0.04, "seed": 0, "inject": False}


def test_distill_workers_byte_identical(planted, tmp_path):
    root, _ = planted
    trees = []
    for w in ("1", "8"):
        out = tmp_path / f"w{w}"
        rc = main(["distill", "--target", str(root / "t" / "m.json"), "--aux", str(root / "a" / "m.json"),
                   "--out", str(out), "--patch-size", "16", "--bottom-frac", "0.04", "--scale", "2",
                   "--seed", "17", "--inject", "--workers", w])
        assert rc == 0
        trees.append(_tree(out))
    assert trees[0] == trees[1]


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"scale": 3, "seed": 5}))
    args = build_parser().parse_args(["distill", "--target", "x", "--out", "y", "--config", str(cfg), "--seed", "9"])
    rc = resolve_config(args)
    assert (rc.scale, rc.seed, rc.patch_size) == (3, 9, 64)
    assert "workers" not in rc.echo()
    assert RunConfig().bottom_frac == 0.02


def test_config_rejects_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"scael": 3}))
    assert main(["bank", "--dataset", str(tmp_path), "--out", str(tmp_path / "o"), "--config", str(cfg)]) != 0
    assert "unknown config keys" in capsys.readouterr().err


def test_metrics_identical_and_mismatch(tmp_path, rng, capsys):
    for d in ("r", "t"):
        (tmp_path / d).mkdir()
    for i in range(2):
        img = rng.random((16, 16, 3)).astype(np.float32)
        save_image(img, tmp_path / "r" / f"{i}.png")
        save_image(img, tmp_path / "t" / f"{i}.png")
    assert main(["metrics", "--ref-dir", str(tmp_path / "r"), "--test-dir", str(tmp_path / "t"),
                 "--out", str(tmp_path / "rep.jsonl")]) == 0
    lines = [json.loads(x) for x in (tmp_path / "rep.jsonl").read_text().splitlines()]
    assert "header" in lines[0]
    assert all(r["psnr_db"] == "inf" and abs(r["ssim"] - 1) <= 1e-9 for r in lines[1:])
    save_image(np.zeros((16, 16, 3), np.float32), tmp_path / "t" / "extra.png")
    assert main(["metrics", "--ref-dir", str(tmp_path / "r"), "--test-dir", str(tmp_path / "t")]) != 0


def test_metrics_seeded_corruption(tmp_path, rng, capsys):
    for d in ("r", "t"):
        (tmp_path / d).mkdir()
    ref = rng.random((20, 20, 3)).astype(np.float32)
    noisy = np.clip(ref + rng.normal(0, 0.05, ref.shape), 0, 1).astype(np.float32)
    save_image(ref, tmp_path / "r" / "a.png")
    save_image(noisy, tmp_path / "t" / "a.png")
    assert main(["metrics", "--ref-dir", str(tmp_path / "r"), "--test-dir", str(tmp_path / "t")]) == 0
    rec = json.loads(capsys.readouterr().out.splitlines()[1])
    a, b = load_image(tmp_path / "r" / "a.png"), load_image(tmp_path / "t" / "a.png")
    assert rec["psnr_db"] == psnr(a, b) and rec["ssim"] == ssim(a, b)


def test_edl_mask(tmp_path):
    write_tensor(np.zeros((4, 5, 3), np.float32), tmp_path / "z.ngdc")
    rc = main(["edl", "mask", "--in", str(tmp_path / "z.ngdc"), "--out", str(tmp_path / "m.ngdc"),
               "--complement", str(tmp_path / "c.ngdc")])
    assert rc == 0
    assert np.allclose(read_tensor(tmp_path / "m.ngdc"), 1 / 3, atol=1e-7)
    assert np.allclose(read_tensor(tmp_path / "c.ngdc"), 2 / 3, atol=1e-7)


def test_edl_mask_non_finite(tmp_path, capsys):
    t = np.zeros((2, 2, 3), np.float32)
    t[1, 1, 2] = np.nan
    write_tensor(t, tmp_path / "n.ngdc")
    assert main(["edl", "mask", "--in", str(tmp_path / "n.ngdc"), "--out", str(tmp_path / "m.ngdc")]) != 0
    assert "non-finite" in capsys.readouterr().err


def test_edl_check_grads(capsys):
    assert main(["edl", "check-grads", "--seed", "3", "--instances", "2"]) == 0
    out = capsys.readouterr().out
    assert "max rel err" in out and "composite" in out


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "srdistill", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("srdistill ")


def test_refuses_foreign_output_dir(tmp_path, rng, capsys):
    save_image(rng.random((16, 16, 3)).astype(np.float32), tmp_path / "in.png")
    out = tmp_path / "o"
    out.mkdir()
    (out / "notes.txt").write_text("keep me")
    assert main(["degrade", "--in", str(tmp_path / "in.png"), "--out", str(out), "--scale", "2"]) != 0
    assert (out / "notes.txt").read_text() == "keep me"
    assert not any(p.name.startswith(".o.tmp-") for p in tmp_path.iterdir())
