import filecmp
import os

import numpy as np
import pytest

from meshsal import cli
from meshsal.features import gaussian_curvature
from meshsal.gaze import SaliencyMap, read_saliency, write_saliency
from meshsal.mesh import TexturedMesh, read_ply_colored, save_mesh, save_mtl
from meshsal.shapes import cube, grid, icosphere, spherical_uv
from meshsal.texture import TextureImage, write_ppm

OUTPUTS = {
    "synth-gaze": ["gaze_log.csv", "dwells.csv"],
    "saliency": ["saliency.csv", "fixations.csv"],
    "metrics": ["metrics.txt"],
    "features": ["features.csv"],
    "analyze": ["analysis.txt"],
    "simplify": ["simplified.obj", "simplified.mtl"],
    "heatmap": ["heatmap.ply"],
}


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def ws(tmp_path_factory):
    d = tmp_path_factory.mktemp("ws")
    s = icosphere(2)
    s = s.with_geometry(uv_corners=spherical_uv(s))
    tex = TextureImage.from_function(lambda u, v: np.stack([u, v, (u * 7 % 1)], -1), 32, 32)
    write_ppm(d / "tex.ppm", tex)
    save_mtl(d / "s.mtl", "tex.ppm")
    save_mesh(s, d / "s.obj", mtllib="s.mtl")
    g = grid(20, 20, size=(2.0, 2.0))
    save_mesh(g.with_geometry(g.vertices - [1.0, 1.0, 0.0]), d / "board.obj")
    save_mesh(cube(), d / "cube.obj")
    assert run("synth-gaze", "--mesh", d / "s.obj", "--targets", 3, "--seed", 5, "--out-dir", d / "g") == 0
    assert run("saliency", "--mesh", d / "s.obj", "--log", d / "g" / "gaze_log.csv", "--out-dir", d / "g") == 0
    return d


def _argv(ws, sub, out, threads):
    m, log, sal = ws / "s.obj", ws / "g" / "gaze_log.csv", ws / "g" / "saliency.csv"
    common = ["--out-dir", out, "--threads", threads]
    return {
        "synth-gaze": ["synth-gaze", "--mesh", m, "--targets", 3, "--seed", 11, "--noise-deg", 0.1],
        "saliency": ["saliency", "--mesh", m, "--log", log],
        "metrics": ["metrics", "--pred", sal, "--truth", sal],
        "features": ["features", "--mesh", m, "--rotate", "--seed", 3, "--with-grid"],
        "analyze": ["analyze", "--mesh", m, "--repeats", 10, "--samples", 200, "--seed", 2],
        "simplify": ["simplify", "--mesh", m, "--saliency", sal, "--target-faces", 120],
        "heatmap": ["heatmap", "--mesh", m, "--map", sal],
    }[sub] + common


@pytest.mark.parametrize("sub", sorted(OUTPUTS))
def test_determinism_and_threads(ws, tmp_path, sub):
    dirs = []
    for k, threads in enumerate((1, 1, 8)):
        out = tmp_path / f"run{k}"
        assert run(*_argv(ws, sub, out, threads)) == 0
        dirs.append(out)
    for name in OUTPUTS[sub] + [f"{sub}.config"]:
        for other in dirs[1:]:
            assert filecmp.cmp(dirs[0] / name, other / name, shallow=False), name


@pytest.mark.parametrize("sub", sorted(OUTPUTS))
def test_sidecar_reproduces(ws, tmp_path, sub):
    a = tmp_path / "a"
    assert run(*_argv(ws, sub, a, 2)) == 0
    side = a / f"{sub}.config"
    assert side.read_text().startswith(f"subcommand={sub}\n")
    b = tmp_path / "b"
    assert run(sub, "--config", side, "--out-dir", b) == 0
    for name in OUTPUTS[sub]:
        assert filecmp.cmp(a / name, b / name, shallow=False), name


def test_flags_override_config(ws, tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(f"mesh={ws / 's.obj'}\ntarget-faces=200\nlambda=4\n")
    assert run("simplify", "--config", cfg, "--target-faces", 100, "--out-dir", tmp_path) == 0
    side = (tmp_path / "simplify.config").read_text()
    assert "target_faces=100\n" in side and "lam=4.0\n" in side


def test_unknown_config_key(ws, tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(f"mesh={ws / 's.obj'}\n\nbogus=1\n")
    assert run("heatmap", "--config", cfg, "--map", "x") == 2
    assert "c.cfg:3" in capsys.readouterr().err


def test_config_for_other_subcommand(ws, tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("subcommand=metrics\n")
    assert run("heatmap", "--config", cfg, "--mesh", "a", "--map", "b") == 2


def test_metrics_identical(ws, capsys):
    sal = ws / "g" / "saliency.csv"
    assert run("metrics", "--pred", sal, "--truth", sal) == 0
    assert capsys.readouterr().out.splitlines()[0] == "cc=1.000000000,sim=1.000000000,kld=0,se=0"


def test_metrics_uniform_vs_delta(tmp_path, capsys):
    delta = np.zeros(100)
    delta[3] = 1
    write_saliency(tmp_path / "u.csv", SaliencyMap(np.ones(100)))
    write_saliency(tmp_path / "d.csv", SaliencyMap(delta))
    assert run("metrics", "--pred", tmp_path / "u.csv", "--truth", tmp_path / "d.csv") == 0
    assert ",sim=0.010000000," in capsys.readouterr().out


def test_metrics_length_mismatch(tmp_path, capsys):
    write_saliency(tmp_path / "a.csv", SaliencyMap(np.ones(3)))
    write_saliency(tmp_path / "b.csv", SaliencyMap(np.ones(4)))
    assert run("metrics", "--pred", tmp_path / "a.csv", "--truth", tmp_path / "b.csv") == 2
    assert "mismatch" in capsys.readouterr().err


def test_saliency_aimed_at_face(ws, tmp_path):
    sc = tmp_path / "sc.txt"
    sc.write_text("eye=0,0,2\nface,duration_ms\n42,600\n")
    flags = ["--speed", 0, "--out-dir", tmp_path]
    assert run("synth-gaze", "--mesh", ws / "board.obj", "--scenario", sc, *flags) == 0
    assert run("saliency", "--mesh", ws / "board.obj", "--log", tmp_path / "gaze_log.csv", *flags) == 0
    assert int(np.argmax(read_saliency(tmp_path / "saliency.csv").values)) == 42


def test_saliency_two_logs_pool(ws, tmp_path):
    board = ws / "board.obj"
    logs = []
    for k, face in enumerate((42, 517)):
        d = tmp_path / f"l{k}"
        (tmp_path / f"sc{k}.txt").write_text(f"eye=0,0,2\n{face},{400 + 200 * k}\n")
        assert run("synth-gaze", "--mesh", board, "--scenario", tmp_path / f"sc{k}.txt", "--speed", 0, "--out-dir", d) == 0
        assert run("saliency", "--mesh", board, "--log", d / "gaze_log.csv", "--speed", 0, "--no-normalize",
                   "--out-dir", d) == 0
        logs.append(d)
    both = tmp_path / "both"
    assert run("saliency", "--mesh", board, "--log", logs[0] / "gaze_log.csv", logs[1] / "gaze_log.csv",
               "--speed", 0, "--out-dir", both) == 0
    raw = read_saliency(logs[0] / "saliency.csv").values + read_saliency(logs[1] / "saliency.csv").values
    np.testing.assert_allclose(read_saliency(both / "saliency.csv").values, raw / raw.sum(), rtol=1e-8, atol=1e-15)


def test_saliency_empty_log(ws, tmp_path, capsys):
    (tmp_path / "empty.csv").write_text("")
    assert run("saliency", "--mesh", ws / "s.obj", "--log", tmp_path / "empty.csv", "--out-dir", tmp_path) == 2
    assert "no samples" in capsys.readouterr().err


def test_bad_obj_names_line(tmp_path, capsys):
    (tmp_path / "bad.obj").write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n")
    assert run("features", "--mesh", tmp_path / "bad.obj", "--out-dir", tmp_path) == 2
    assert "bad.obj:4" in capsys.readouterr().err


def test_heatmap_zero_map_all_blue(ws, tmp_path):
    write_saliency(tmp_path / "z.csv", SaliencyMap(np.zeros(12)))
    assert run("heatmap", "--mesh", ws / "cube.obj", "--map", tmp_path / "z.csv", "--out-dir", tmp_path) == 0
    _, _, colors = read_ply_colored(tmp_path / "heatmap.ply")
    assert np.all(colors == [0, 0, 255])


def test_colormap_stops():
    np.testing.assert_array_equal(cli.colormap([0, 0.25, 0.5, 0.75, 1]),
                                  [[0, 0, 255], [0, 128, 128], [0, 255, 0], [128, 128, 0], [255, 0, 0]])


def test_heatmap_vertex_average(ws, tmp_path):
    m = cube()
    vals = np.arange(12.0)
    write_saliency(tmp_path / "m.csv", SaliencyMap(vals))
    assert run("heatmap", "--mesh", ws / "cube.obj", "--map", tmp_path / "m.csv", "--out-dir", tmp_path) == 0
    _, _, colors = read_ply_colored(tmp_path / "heatmap.ply")
    ref = np.array([np.mean(vals[(m.faces == v).any(1)]) / 11.0 for v in range(8)])
    np.testing.assert_array_equal(colors, cli.colormap(ref))


def test_simplify_cube_identity(ws, tmp_path):
    assert run("simplify", "--mesh", ws / "cube.obj", "--target-faces", 12, "--out-dir", tmp_path) == 0
    assert (tmp_path / "simplified.obj").read_bytes() == (ws / "cube.obj").read_bytes()


def test_analyze_curvature_map(tmp_path, capsys):
    m = icosphere(3)
    m = m.with_geometry(m.vertices * (1 + 0.05 * np.random.default_rng(1).standard_normal((m.n_vertices, 1))))
    save_mesh(m, tmp_path / "bumpy.obj")
    from meshsal.mesh import load_mesh
    m = load_mesh(tmp_path / "bumpy.obj")
    K = gaussian_curvature(m)
    write_saliency(tmp_path / "k.csv", SaliencyMap(K - K.min()))
    assert run("analyze", "--mesh", tmp_path / "bumpy.obj", "--map", tmp_path / "k.csv", "--out-dir", tmp_path) == 0
    line = (tmp_path / "analysis.txt").read_text()
    conc = float(line.split(",")[0].split("=")[1])
    assert conc >= 0.99


def test_features_columns(ws, tmp_path):
    assert run("features", "--mesh", ws / "s.obj", "--out-dir", tmp_path) == 0
    header = (tmp_path / "features.csv").read_text().splitlines()[0].split(",")
    assert header[-4:] == ["mean_r", "mean_g", "mean_b", "color_variance"]
    assert header[0] == "face"


def test_internal_error_exit_3(ws, tmp_path, monkeypatch):
    def boom(args):
        raise cli.InvariantError("broken")
    monkeypatch.setattr(cli, "cmd_heatmap", boom)
    assert run("heatmap", "--mesh", ws / "cube.obj", "--map", "x", "--out-dir", tmp_path) == 3


def test_usage_error_exit_2(capsys):
    assert run("simplify") == 2
    assert run() == 2


def test_module_entry_point(ws, tmp_path):
    import subprocess
    import sys
    sal = ws / "g" / "saliency.csv"
    r = subprocess.run([sys.executable, "-m", "meshsal", "metrics", "--pred", sal, "--truth", sal],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("cc=1.000000000")
