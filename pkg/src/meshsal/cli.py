"""``meshsal`` command line: one binary with subcommands.

Every subcommand accepts ``--config FILE`` (``key=value`` lines, keys are the
long flag names with dashes or underscores); explicit flags override the file.
The effective configuration is written next to the outputs as
``<subcommand>.config`` and can be fed back through ``--config``.
"""

from __future__ import annotations

import argparse
import logging
import os
import shutil
import sys

import numpy as np

from . import __version__
from .features import face_features, fibonacci_bases
from .gaze import (
    GazeError, IVTParams, KernelParams, RotationSchedule, SaliencyMap, Scenario,
    classify_fixations, intersect_log, random_scenario, read_gaze_log, read_saliency,
    read_scenario, smooth_fixations, synth_gaze, write_dwells, write_fixations,
    write_gaze_log, write_saliency,
)
from .mesh import LoadOptions, MeshError, TexturedMesh, load_mesh, save_mesh, save_mtl, save_ply_colored
from .metrics import baseline_predict, compare_maps, sampling_analysis
from .raycast import build_bvh
from .shapes import random_rotation
from .simplify import SimplifyError, SimplifyParams, simplify
from .texture import TextureError, load_texture
from .texture_align import face_texture_features

log = logging.getLogger("meshsal")

EXIT_OK, EXIT_USER, EXIT_INTERNAL = 0, 2, 3


class ConfigError(ValueError):
    pass


class InvariantError(RuntimeError):
    pass


USER_ERRORS = (ConfigError, MeshError, TextureError, GazeError, SimplifyError, ValueError,
               IndexError, OSError)


# --------------------------------------------------------------- helpers


def _vec3(s):
    parts = [float(x) for x in str(s).split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated numbers")
    return tuple(parts)


def _bool(s):
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {s!r}")


def _fmt_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _out_path(args, name):
    d = args.out_dir or "."
    os.makedirs(d, exist_ok=True)
    return os.path.join(d, name)


def _load_mesh(path, uv_wrap=False, need_texture=False):
    mesh = load_mesh(path, LoadOptions(uv_wrap=uv_wrap, load_texture=need_texture))
    return mesh


def _invariant(cond, msg):
    if not cond:
        raise InvariantError(msg)


def _schedule(args):
    return RotationSchedule(axis=args.axis, angular_speed=args.speed, sign=args.sign, t0=args.t0)


# --------------------------------------------------------------- commands


def cmd_saliency(args):
    mesh = _load_mesh(args.mesh, args.uv_wrap)
    bvh = build_bvh(mesh)
    schedule = _schedule(args)
    ivt = IVTParams(args.velocity_threshold, args.min_fixation_ms, args.merge_angle, args.merge_gap_ms)
    fixations = []
    for path in args.log:
        glog = read_gaze_log(path)
        hits = intersect_log(glog, mesh, bvh, schedule, threads=args.threads)
        fx = classify_fixations(hits, mesh, ivt)
        log.info("%s: %d samples, %d fixations", path, len(glog), len(fx))
        fixations.extend(fx)
    kp = KernelParams(args.sigma_deg, args.truncate, not args.no_normalize)
    smap = smooth_fixations(fixations, mesh, kp)
    _invariant(len(smap) == mesh.n_faces, "saliency map length differs from face count")
    write_saliency(_out_path(args, "saliency.csv"), smap)
    write_fixations(_out_path(args, "fixations.csv"), fixations)
    print(f"{len(fixations)} fixations; argmax face {int(np.argmax(smap.values))}")


def cmd_metrics(args):
    pred = read_saliency(args.pred)
    truth = read_saliency(args.truth)
    rep = compare_maps(pred, truth)
    _invariant(-1 <= rep.cc <= 1 and 0 <= rep.sim <= 1 + 1e-9 and rep.kld >= 0 and rep.se >= 0,
               "metric out of range")
    print(rep.line())
    if args.pretty:
        print(rep.pretty())
    if args.out_dir:
        with open(_out_path(args, "metrics.txt"), "w", encoding="utf-8") as fh:
            fh.write(rep.line() + "\n")


def _write_table(path, columns, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(str(int(x)) if k == 0 else f"{x:.9g}" for k, x in enumerate(row)) + "\n")


def _texture_for(args, mesh):
    path = getattr(args, "texture", None) or mesh.texture_path
    return load_texture(path) if path else None


def cmd_features(args):
    mesh = _load_mesh(args.mesh, args.uv_wrap)
    rot = random_rotation(np.random.default_rng(args.seed)) if args.rotate else None
    table = face_features(mesh, fibonacci_bases(args.bases), rotation=rot)
    cols, rows = table.columns(), table.rows()
    tex = _texture_for(args, mesh)
    if tex is not None and mesh.has_uv:
        tt = face_texture_features(mesh, tex, args.grid_size)
        cols = cols + tt.columns(args.with_grid)
        rows = np.column_stack([rows, tt.rows(args.with_grid)])
    else:
        log.warning("no texture/UVs: texture columns omitted")
    _invariant(rows.shape == (mesh.n_faces, len(cols)), "feature table shape mismatch")
    _write_table(_out_path(args, "features.csv"), cols, rows)
    print(f"{mesh.n_faces} faces x {len(cols) - 1} features")


def _variance(args, mesh):
    tex = _texture_for(args, mesh)
    if tex is None or not mesh.has_uv:
        log.warning("no texture/UVs: color variance treated as constant 0")
        return np.zeros(mesh.n_faces)
    return face_texture_features(mesh, tex, args.grid_size).color_variance


def cmd_analyze(args):
    from .features import gaussian_curvature

    mesh = _load_mesh(args.mesh, args.uv_wrap)
    curv = gaussian_curvature(mesh)
    var = _variance(args, mesh)
    if args.map:
        smap = read_saliency(args.map)
        if len(smap) != mesh.n_faces:
            raise ConfigError(f"{args.map}: {len(smap)} values for {mesh.n_faces} faces")
    else:
        smap = baseline_predict(curv, var, (args.w_curvature, args.w_variance))
    rep = sampling_analysis(smap, curv, var, args.repeats, args.samples, args.quantile,
                            areas=mesh.face_areas, seed=args.seed)
    with open(_out_path(args, "analysis.txt"), "w", encoding="utf-8") as fh:
        fh.write(rep.line() + "\n")
    print(rep.line())
    print(rep.pretty())


def cmd_simplify(args):
    mesh = _load_mesh(args.mesh, args.uv_wrap)
    sal = read_saliency(args.saliency) if args.saliency else None
    params = SimplifyParams(args.lam, args.gamma, args.allow_seam_collapse, args.strict, args.support)
    res = simplify(mesh, sal, args.target_faces, params)
    out = res.mesh
    _invariant(out.n_faces <= args.target_faces, "output exceeds target face count")
    mtl = None
    if mesh.texture_path:
        tex_name = os.path.basename(mesh.texture_path)
        dst = _out_path(args, tex_name)
        if os.path.abspath(dst) != os.path.abspath(mesh.texture_path):
            shutil.copyfile(mesh.texture_path, dst)
        mtl = "simplified.mtl"
        save_mtl(_out_path(args, mtl), tex_name)
    save_mesh(out, _out_path(args, "simplified.obj"), mtllib=mtl)
    print(f"{mesh.n_faces} -> {out.n_faces} faces ({res.collapses} collapses)")


def cmd_synth(args):
    mesh = _load_mesh(args.mesh, args.uv_wrap)
    schedule = _schedule(args)
    rng = np.random.default_rng(args.seed)
    if args.scenario:
        sc = read_scenario(args.scenario)
    else:
        sc = random_scenario(mesh, rng, schedule, n_targets=args.targets, saccade_ms=args.saccade_ms,
                             noise_deg=args.noise_deg, eye=args.eye)
    glog, dwells = synth_gaze(sc, mesh, schedule, args.rate, rng)
    write_gaze_log(_out_path(args, "gaze_log.csv"), glog)
    write_dwells(_out_path(args, "dwells.csv"), dwells)
    print(f"{len(glog)} samples, {len(dwells)} dwells")


COLOR_STOPS = np.array([[0, 0, 255], [0, 255, 0], [255, 0, 0]], dtype=np.float64)


def colormap(t) -> np.ndarray:
    """Blue -> green -> red over [0, 1], uint8 RGB."""
    t = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
    x = 2.0 * t
    i = np.minimum(np.floor(x).astype(int), 1)
    f = (x - i)[..., None]
    rgb = (1 - f) * COLOR_STOPS[i] + f * COLOR_STOPS[i + 1]
    return np.rint(rgb).astype(np.uint8)


def vertex_values(mesh: TexturedMesh, face_values) -> np.ndarray:
    fv = np.asarray(face_values, dtype=np.float64)
    s = np.bincount(mesh.faces.ravel(), weights=np.repeat(fv, 3), minlength=mesh.n_vertices)
    n = np.bincount(mesh.faces.ravel(), minlength=mesh.n_vertices)
    return np.where(n > 0, s / np.maximum(n, 1), 0.0)


def cmd_heatmap(args):
    mesh = _load_mesh(args.mesh, args.uv_wrap)
    smap = read_saliency(args.map)
    if len(smap) != mesh.n_faces:
        raise ConfigError(f"{args.map}: {len(smap)} values for {mesh.n_faces} faces")
    colors = colormap(vertex_values(mesh, smap.max_normalized()))
    save_ply_colored(_out_path(args, "heatmap.ply"), mesh.vertices, mesh.faces, colors)
    print(f"wrote {mesh.n_vertices} colored vertices")


# --------------------------------------------------------------- parser


def _common(p, seed=True):
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--out-dir", dest="out_dir", default=None, help="output directory (default: .)")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    if seed:
        p.add_argument("--seed", type=int, default=0)
    p.add_argument("--uv-wrap", dest="uv_wrap", type=_bool, nargs="?", const=True, default=False)


def _rotation_flags(p):
    p.add_argument("--axis", type=_vec3, default=(0.0, 1.0, 0.0))
    p.add_argument("--speed", type=float, default=15.0, help="turntable speed, deg/s")
    p.add_argument("--sign", type=int, choices=(-1, 1), default=-1)
    p.add_argument("--t0", type=float, default=0.0, help="rotation start, ms")


def build_parser():
    ap = argparse.ArgumentParser(prog="meshsal", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("saliency", help="gaze logs -> fixations -> per-face saliency map")
    _common(p)
    p.add_argument("--mesh", required=True)
    p.add_argument("--log", required=True, nargs="+", type=str)
    _rotation_flags(p)
    p.add_argument("--velocity-threshold", type=float, default=30.0)
    p.add_argument("--min-fixation-ms", type=float, default=100.0)
    p.add_argument("--merge-angle", type=float, default=0.5)
    p.add_argument("--merge-gap-ms", type=float, default=75.0)
    p.add_argument("--sigma-deg", type=float, default=1.0)
    p.add_argument("--truncate", type=float, default=3.0)
    p.add_argument("--no-normalize", type=_bool, nargs="?", const=True, default=False)
    p.set_defaults(func=cmd_saliency)

    p = sub.add_parser("metrics", help="compare two saliency maps")
    _common(p, seed=False)
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--pretty", type=_bool, nargs="?", const=True, default=False)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("features", help="per-face geometric and texture feature table")
    _common(p)
    p.add_argument("--mesh", required=True)
    p.add_argument("--texture", default=None)
    p.add_argument("--grid-size", type=int, default=8)
    p.add_argument("--bases", type=int, default=64)
    p.add_argument("--with-grid", type=_bool, nargs="?", const=True, default=False)
    p.add_argument("--rotate", type=_bool, nargs="?", const=True, default=False,
                   help="apply a seeded random rotation before extraction")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("analyze", help="salient vs non-salient curvature/variance sampling analysis")
    _common(p)
    p.add_argument("--mesh", required=True)
    p.add_argument("--map", default=None, help="saliency map; default: curvature/variance baseline")
    p.add_argument("--texture", default=None)
    p.add_argument("--grid-size", type=int, default=8)
    p.add_argument("--repeats", type=int, default=100)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--quantile", type=float, default=0.2)
    p.add_argument("--w-curvature", type=float, default=1.0)
    p.add_argument("--w-variance", type=float, default=1.0)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simplify", help="saliency-guided quadric simplification")
    _common(p)
    p.add_argument("--mesh", required=True)
    p.add_argument("--saliency", default=None)
    p.add_argument("--target-faces", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=9.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--support", choices=("ring", "edge"), default="ring")
    p.add_argument("--allow-seam-collapse", type=_bool, nargs="?", const=True, default=False)
    p.add_argument("--strict", type=_bool, nargs="?", const=True, default=False)
    p.set_defaults(func=cmd_simplify)

    p = sub.add_parser("synth-gaze", help="synthetic gaze log for a scripted or random scenario")
    _common(p)
    p.add_argument("--mesh", required=True)
    p.add_argument("--scenario", default=None)
    p.add_argument("--targets", type=int, default=3)
    p.add_argument("--rate", type=float, default=120.0)
    p.add_argument("--saccade-ms", type=float, default=50.0)
    p.add_argument("--noise-deg", type=float, default=0.0)
    p.add_argument("--eye", type=_vec3, default=(0.0, 0.0, -4.0))
    _rotation_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("heatmap", help="vertex-colored PLY of a saliency map")
    _common(p, seed=False)
    p.add_argument("--mesh", required=True)
    p.add_argument("--map", required=True)
    p.set_defaults(func=cmd_heatmap)
    return ap


_SKIP = {"config", "func", "verbose", "subcommand"}


def _subparser(ap, name):
    for action in ap._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def read_config(path) -> dict:
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            k, v = (s.strip() for s in line.split("=", 1))
            out[k.replace("-", "_")] = (lineno, v)
    return out


def _apply_config(ap, sub, argv, path):
    cfg = read_config(path)
    actions = {}
    for a in sub._actions:
        if a.dest in _SKIP or a.dest == "help":
            continue
        actions[a.dest] = a
        for opt in a.option_strings:
            if opt.startswith("--"):
                actions[opt[2:].replace("-", "_")] = a
    name = argv[0] if argv else None
    extra = []
    for key, (lineno, raw) in cfg.items():
        if key == "subcommand":
            if raw != name:
                raise ConfigError(f"{path}:{lineno}: config is for {raw!r}, not {name!r}")
            continue
        if key not in actions:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        act = actions[key]
        dest = act.dest
        try:
            if act.nargs == "+":
                val = [act.type(x) if act.type else x for x in raw.split(",")]
            elif act.type is not None:
                val = act.type(raw)
            else:
                val = raw
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
        if act.choices is not None and val not in act.choices:
            raise ConfigError(f"{path}:{lineno}: {key} must be one of {list(act.choices)}")
        extra.append((dest, val))
    sub.set_defaults(**dict(extra))
    # config may satisfy required flags
    for a in sub._actions:
        if a.dest in dict(extra):
            a.required = False


def write_sidecar(args):
    path = _out_path(args, f"{args.subcommand}.config")
    lines = [f"subcommand={args.subcommand}"]
    for k in sorted(vars(args)):
        if k in _SKIP or k in ("threads", "out_dir"):
            continue
        v = getattr(args, k)
        if v is None:
            continue
        lines.append(f"{k}={_fmt_value(v)}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def parse_args(argv):
    ap = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        cmd = next((a for a in argv if not a.startswith("-")), None)
        if cmd is None:
            ap.error("a subcommand is required")
        try:
            sub = _subparser(ap, cmd)
        except KeyError:
            ap.error(f"unknown subcommand {cmd!r}")
        rest = argv[argv.index(cmd):]
        _apply_config(ap, sub, rest, known.config)
    return ap.parse_args(argv)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except ConfigError as exc:
        print(f"meshsal: error: {exc}", file=sys.stderr)
        return EXIT_USER
    except OSError as exc:
        print(f"meshsal: error: {exc}", file=sys.stderr)
        return EXIT_USER
    except SystemExit as exc:
        return EXIT_USER if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
        if args.out_dir or args.subcommand != "metrics":
            write_sidecar(args)
    except InvariantError as exc:
        print(f"meshsal: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except USER_ERRORS as exc:
        print(f"meshsal: error: {exc}", file=sys.stderr)
        return EXIT_USER
    except Exception as exc:  # noqa: BLE001
        if args.verbose:
            raise
        print(f"meshsal: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
