"""Command-line pipeline over a KITTI-layout dataset.

Layout: ``root/{calib,label_2,depth,detections}/<frame>.{txt,png}`` with
6-digit frame ids. Subcommands: synth, gen-instances, propose, refine, eval, viz.

Any flag can also be given in a ``--config`` file of ``key = value`` lines
(key is the flag name without dashes); flags on the command line win.
"""

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .camera import Proposal, make_proposal, theta_from_beta, viewing_angles
from .errors import EmptyDepth, EmptyInstance, MonoPropError
from .evaluation import (DIFFICULTIES, EvalFrame, box2d_iou, bev_iou, depth_error_stats,
                         evaluate_frames, format_depth_error, iou_3d)
from .frames import build_T_CO
from .grid import InstanceGrid
from .instance_data import densify_depth, depth_to_scene, generate_instance
from .kitti_io import (Box3D, KittiObject, parse_calib, parse_labels, read_depth_png,
                       write_calib, write_depth_png, write_detections)
from .losses import LossWeights, class_mean_dims, projection_errors
from .refine import OptimizerConfig, refine_pose
from .svg import pr_curve_svg, scene_svg
from .synth import IMAGE_SIZE, SceneSpec, generate_scene, jitter_box, split_seeds

CLASSES = ("Car", "Pedestrian", "Cyclist")
IOU_FUNCS = {"bev": bev_iou, "3d": iou_3d}


class CommandError(Exception):
    """Fatal error reported on stderr with a nonzero exit."""


@dataclass
class RunConfig:
    root: Path
    frames: list
    class_means: dict = field(default_factory=dict)
    weights: LossWeights = field(default_factory=LossWeights)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    difficulties: tuple = ("easy", "moderate", "hard")
    out: Path | None = None

    def __post_init__(self):
        for cls, dims in self.class_means.items():
            if min(dims) <= 0:
                raise ValueError(f"class mean for {cls} must be positive")


# -- dataset access ----------------------------------------------------------

def frame_name(i):
    return f"{i:06d}"


def list_frames(root, subdir="label_2", only=None):
    d = Path(root) / subdir
    if not d.is_dir():
        raise CommandError(f"missing directory {d}")
    frames = sorted(p.stem for p in d.glob("*.txt"))
    if only:
        wanted = set(only)
        frames = [f for f in frames if f in wanted]
    return frames


def read_text(path):
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise CommandError(f"{path}: {exc.strerror or exc}") from None


def load_labels(path):
    try:
        return parse_labels(read_text(path))
    except MonoPropError as exc:
        raise CommandError(f"{path}: {exc}") from None


def load_camera(root, frame):
    path = Path(root) / "calib" / f"{frame}.txt"
    try:
        return parse_calib(read_text(path))
    except MonoPropError as exc:
        raise CommandError(f"{path}: {exc}") from None


def write_file(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, bytes):
        path.write_bytes(data)
    else:
        path.write_text(data)


def run_jobs(fn, items, jobs):
    """Map ``fn`` over ``items`` keeping input order."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def warn(msg):
    print(f"warning: {msg}", file=sys.stderr)


def parse_frames(text):
    if not text:
        return None
    path = Path(text)
    if path.is_file():
        return path.read_text().split()
    return [t.strip() for t in text.split(",") if t.strip()]


def parse_list(text):
    return [t.strip() for t in text.split(",") if t.strip()]


# -- synth -------------------------------------------------------------------

def _synth_one(task):
    root, index, seed, spec_kwargs = task
    scene = generate_scene(SceneSpec(seed=seed, **spec_kwargs))
    name = frame_name(index)
    write_file(root / "calib" / f"{name}.txt", write_calib(scene.camera))
    write_file(root / "label_2" / f"{name}.txt", scene.labels_text())
    write_file(root / "depth" / f"{name}.png", write_depth_png(scene.depth))
    return len(scene.objects)


def cmd_synth(args):
    if not 0 < args.z_min < args.z_max:
        raise CommandError(f"invalid depth range [{args.z_min}, {args.z_max}]")
    if args.scenes < 0 or args.objects < 0:
        raise CommandError("--scenes and --objects must be non-negative")
    root = Path(args.root)
    spec_kwargs = dict(num_objects=args.objects, z_range=(args.z_min, args.z_max),
                       classes=tuple(parse_list(args.classes)))
    for cls in spec_kwargs["classes"]:
        if cls not in CLASSES:
            raise CommandError(f"unknown class {cls}; choose from {', '.join(CLASSES)}")
    seeds = split_seeds(args.seed, args.scenes)
    tasks = [(root, i, s, spec_kwargs) for i, s in enumerate(seeds)]
    counts = run_jobs(_synth_one, tasks, args.jobs)
    print(f"wrote {len(counts)} frames with {sum(counts)} objects to {root}")
    return 0


# -- gen-instances -----------------------------------------------------------

def instance_name(frame, index, kind):
    return f"{frame}_{index:03d}.{kind}.grid"


def _instances_one(task):
    root, out, frame, margin = task
    result = {"frame": frame, "written": 0, "skipped": 0, "errors": [], "warnings": [],
              "max_proj": 0.0}
    try:
        camera = load_camera(root, frame)
        labels = load_labels(Path(root) / "label_2" / f"{frame}.txt")
        depth_path = Path(root) / "depth" / f"{frame}.png"
        try:
            depth = read_depth_png(depth_path.read_bytes())
        except OSError as exc:
            raise CommandError(f"{depth_path}: {exc.strerror or exc}") from None
        except MonoPropError as exc:
            raise CommandError(f"{depth_path}: {exc}") from None
    except CommandError as exc:
        result["errors"].append(str(exc))
        return result
    try:
        scene = depth_to_scene(densify_depth(depth), camera)
    except EmptyDepth:
        result["skipped"] = len(labels.objects)
        result["warnings"].append(f"{frame}: depth map has no valid pixels, "
                                  f"skipped {len(labels.objects)} instances")
        return result
    for k, obj in enumerate(labels.objects):
        try:
            cam_grid, local_grid = generate_instance(scene, camera, obj.box2d, obj.box3d, margin)
        except EmptyInstance as exc:
            result["skipped"] += 1
            result["warnings"].append(f"{frame} object {k}: {exc}")
            continue
        alpha_h = viewing_angles(camera, obj.box2d).alpha_h
        e = projection_errors(local_grid, build_T_CO(obj.box3d.t, alpha_h), camera)[0]
        scale = np.array([obj.box2d.width, obj.box2d.height])
        result["max_proj"] = max(result["max_proj"], float(np.abs(e * scale).max()))
        write_file(Path(out) / instance_name(frame, k, "local"), local_grid.to_bytes())
        write_file(Path(out) / instance_name(frame, k, "camera"), cam_grid.to_bytes())
        result["written"] += 1
    return result


def cmd_gen_instances(args):
    frames = list_frames(args.root, only=parse_frames(args.frames))
    tasks = [(args.root, args.out, f, args.margin) for f in frames]
    results = run_jobs(_instances_one, tasks, args.jobs)
    errors = [e for r in results for e in r["errors"]]
    for r in results:
        for w in r["warnings"]:
            warn(w)
    for e in errors:
        print(f"error: {e}", file=sys.stderr)
    written = sum(r["written"] for r in results)
    skipped = sum(r["skipped"] for r in results)
    max_proj = max((r["max_proj"] for r in results), default=0.0)
    print(f"frames {len(frames)}  instances written {written}  skipped {skipped}")
    print(f"max projection error at ground-truth pose: {max_proj:.3f} px")
    return 1 if errors else 0


# -- propose -----------------------------------------------------------------

def _match_gt(box2d, gts, min_iou=0.5):
    best, best_iou = None, min_iou
    for gt in gts:
        iou = box2d_iou(box2d, gt.box2d)
        if iou >= best_iou:
            best, best_iou = gt, iou
    return best


def proposal_box(camera, box2d, dims, beta, cls):
    """Proposal as a Box3D; yaw uses the centroid ray angle so that a refinement
    with zero iterations reproduces it exactly."""
    proposal, _ = make_proposal(camera, box2d, dims, beta, cls)
    c = proposal.center
    return proposal, Box3D(cls, c, dims, theta_from_beta(beta, math.atan2(c[0], c[2])))


def _propose_one(task):
    root, frame, source, means, jitter, seed = task
    result = {"frame": frame, "objects": [], "errors": [], "rows": []}
    try:
        camera = load_camera(root, frame)
        gts = load_labels(Path(root) / "label_2" / f"{frame}.txt").objects
        if source == "gt":
            inputs = gts
        else:
            inputs = load_labels(Path(root) / source / f"{frame}.txt").objects
    except CommandError as exc:
        result["errors"].append(str(exc))
        return result
    rng = np.random.default_rng(seed)
    for obj in inputs:
        box2d = jitter_box(obj.box2d, rng) if jitter else obj.box2d
        gt = obj if source == "gt" else _match_gt(box2d, gts)
        dims_list = [("gt", obj.box3d.dims)]
        if means and obj.box3d.cls in means:
            dims_list.append(("mean", means[obj.box3d.cls]))
        written = None
        for mode, dims in dims_list:
            try:
                proposal, box = proposal_box(camera, box2d, dims, obj.alpha, obj.box3d.cls)
            except MonoPropError as exc:
                result["errors"].append(f"{frame}: {exc}")
                break
            if gt is not None:
                result["rows"].append((mode, gt.box3d.cls, gt.box2d.height,
                                       gt.box3d.occlusion, gt.box3d.truncation,
                                       proposal.center[2], gt.box3d.center[2]))
            written = box
        if written is not None:
            result["objects"].append(KittiObject(box2d, written, obj.alpha))
    return result


def depth_error_table(rows, difficulties, classes):
    """Per-class, per-difficulty ``mean / std`` absolute depth error."""
    lines = [f"{'class':<12}" + "".join(f"{d:>16}" for d in difficulties)]
    for cls in classes:
        cells = []
        for name in difficulties:
            diff = DIFFICULTIES[name]
            err = [(p, t) for c, h, occ, tr, p, t in rows if c == cls
                   and h >= diff.min_height and occ <= diff.max_occlusion
                   and tr <= diff.max_truncation]
            if err:
                p, t = np.array(err).T
                cells.append(format_depth_error(*depth_error_stats(p, t)))
            else:
                cells.append("-")
        lines.append(f"{cls:<12}" + "".join(f"{c:>16}" for c in cells))
    return "\n".join(lines)


def cmd_propose(args):
    cfg = run_config(args)
    frames = cfg.frames
    source = "gt" if args.source == "gt" else args.source
    means = {}
    if args.class_means:
        boxes = [o.box3d for f in frames
                 for o in load_labels(Path(cfg.root) / "label_2" / f"{f}.txt").objects]
        means = class_mean_dims(boxes)
    seeds = split_seeds(args.seed, len(frames))
    tasks = [(cfg.root, f, source, means, args.jitter, s) for f, s in zip(frames, seeds)]
    results = run_jobs(_propose_one, tasks, args.jobs)
    errors = [e for r in results for e in r["errors"]]
    for r in results:
        if not r["errors"] or r["objects"]:
            write_file(Path(args.out) / f"{r['frame']}.txt", write_detections(r["objects"]))
    rows = [row for r in results for row in r["rows"]]
    for mode, title in (("gt", "ground-truth dims"), ("mean", "class-mean dims")):
        sel = [row[1:] for row in rows if row[0] == mode]
        if mode == "mean" and not args.class_means:
            continue
        classes = [c for c in CLASSES if any(r[0] == c for r in sel)] or list(CLASSES)
        print(f"depth error (mean / std, m), {title}")
        print(depth_error_table(sel, cfg.difficulties, classes))
    for e in errors:
        print(f"error: {e}", file=sys.stderr)
    print(f"wrote proposals for {len(results)} frames to {args.out}")
    return 1 if errors else 0


# -- refine ------------------------------------------------------------------

def _load_grid(path):
    try:
        return InstanceGrid.from_bytes(Path(path).read_bytes())
    except OSError:
        return None


def _refine_one(task):
    root, proposals_dir, instances_dir, weights, opt, frame = task
    result = {"frame": frame, "objects": [], "errors": [], "traces": {}, "pairs": [],
              "statuses": []}
    try:
        camera = load_camera(root, frame)
        props = load_labels(Path(proposals_dir) / f"{frame}.txt").objects
        gt_path = Path(root) / "label_2" / f"{frame}.txt"
        gts = load_labels(gt_path).objects if gt_path.exists() else []
    except CommandError as exc:
        result["errors"].append(str(exc))
        return result
    for k, obj in enumerate(props):
        local = _load_grid(Path(instances_dir) / instance_name(frame, k, "local"))
        cam = _load_grid(Path(instances_dir) / instance_name(frame, k, "camera"))
        box = obj.box3d
        before = box.center[2]
        if local is not None and cam is not None:
            local.box = obj.box2d
            proposal = Proposal(box.t, obj.box2d, obj.alpha, box.dims, box.cls)
            try:
                res = refine_pose(proposal, local, camera, weights, opt, cam.points[..., 2])
            except MonoPropError as exc:
                result["errors"].append(f"{frame} object {k}: {exc}")
            else:
                box = res.box.replace(truncation=obj.box3d.truncation,
                                      occlusion=obj.box3d.occlusion)
                result["traces"][k] = res.trace_text()
                result["statuses"].append(res.status)
        result["objects"].append(KittiObject(obj.box2d, box, obj.alpha))
        gt = _match_gt(obj.box2d, gts)
        if gt is not None:
            result["pairs"].append((before, box.center[2], gt.box3d.center[2]))
    return result


def cmd_refine(args):
    cfg = run_config(args)
    frames = list_frames(args.proposals, subdir=".", only=parse_frames(args.frames))
    known = set(list_frames(cfg.root, only=None))
    missing = [f for f in frames if f not in known]
    if missing:
        raise CommandError(f"proposal frames without labels/calib: {', '.join(missing)}")
    tasks = [(cfg.root, args.proposals, args.instances, cfg.weights, cfg.optimizer, f)
             for f in frames]
    results = run_jobs(_refine_one, tasks, args.jobs)
    errors = [e for r in results for e in r["errors"]]
    out = Path(args.out)
    for r in results:
        write_file(out / f"{r['frame']}.txt", write_detections(r["objects"]))
        if args.traces:
            for k, text in r["traces"].items():
                write_file(Path(args.traces) / f"{r['frame']}_{k:03d}.txt", text)
    pairs = [p for r in results for p in r["pairs"]]
    statuses = [s for r in results for s in r["statuses"]]
    print(f"refined {len(statuses)} objects in {len(frames)} frames")
    if statuses:
        print("status counts: " + ", ".join(f"{s}={statuses.count(s)}"
                                             for s in sorted(set(statuses))))
    if pairs:
        before, after, gt = np.array(pairs).T
        print(f"depth error before (mean / std, m): "
              f"{format_depth_error(*depth_error_stats(before, gt))}")
        print(f"depth error after  (mean / std, m): "
              f"{format_depth_error(*depth_error_stats(after, gt))}")
    for e in errors:
        print(f"error: {e}", file=sys.stderr)
    return 1 if errors else 0


# -- eval --------------------------------------------------------------------

def load_eval_frames(gt_dir, det_dir, frames):
    out = []
    for f in frames:
        gt = load_labels(Path(gt_dir) / f"{f}.txt")
        det_path = Path(det_dir) / f"{f}.txt"
        dets = load_labels(det_path).pairs() if det_path.exists() else []
        out.append(EvalFrame(gt.pairs(), dets, gt.dontcare))
    return out


def ap_table(frames, classes, thresholds, difficulties, metrics=("bev", "3d"), num_points=11):
    """Nested results ``{(metric, threshold, cls, difficulty): PRCurve}``."""
    results = {}
    for metric in metrics:
        for thr in thresholds:
            for cls in classes:
                for d in difficulties:
                    results[(metric, thr, cls, d)] = evaluate_frames(
                        frames, IOU_FUNCS[metric], thr, DIFFICULTIES[d], cls, num_points)
    return results


def format_ap_table(results, classes, thresholds, difficulties, metrics=("bev", "3d")):
    lines = []
    head = f"{'class':<12}{'IoU':>5}"
    for metric in metrics:
        label = "AP_BEV" if metric == "bev" else "AP_3D"
        head += "  |" + "".join(f"{label + ' ' + d[:3]:>14}" for d in difficulties)
    lines.append(head)
    for cls in classes:
        for thr in thresholds:
            row = f"{cls:<12}{thr:>5.2f}"
            for metric in metrics:
                row += "  |" + "".join(f"{results[(metric, thr, cls, d)].ap:>14.2f}"
                                       for d in difficulties)
            lines.append(row)
    return "\n".join(lines)


def cmd_eval(args):
    frames = list_frames(args.gt, subdir=".", only=parse_frames(args.frames))
    eval_frames = load_eval_frames(args.gt, args.dets, frames)
    if not any(f.gts for f in eval_frames):
        raise CommandError(f"no ground-truth objects under {args.gt}")
    classes = parse_list(args.classes)
    thresholds = [float(t) for t in parse_list(args.thresholds)]
    difficulties = parse_list(args.difficulties)
    for d in difficulties:
        if d not in DIFFICULTIES:
            raise CommandError(f"unknown difficulty {d}")
    results = ap_table(eval_frames, classes, thresholds, difficulties, num_points=args.points)
    print(f"AP ({args.points}-point interpolation)")
    print(format_ap_table(results, classes, thresholds, difficulties))
    if args.out:
        for (metric, thr, cls, d), curve in results.items():
            stem = f"pr_{metric}_{cls}_{d}_{thr:.2f}"
            write_file(Path(args.out) / f"{stem}.txt", curve.to_text())
            write_file(Path(args.out) / f"{stem}.svg",
                       pr_curve_svg(curve, f"{metric.upper()} {cls} {d} IoU {thr:.2f}"))
    return 0


# -- viz ---------------------------------------------------------------------

def cmd_viz(args):
    root = Path(args.root)
    camera = load_camera(root, args.frame)
    gt_path = root / "label_2" / f"{args.frame}.txt"
    gts = [o.box3d for o in load_labels(gt_path).objects] if gt_path.exists() else []
    dets = []
    if args.dets:
        det_path = Path(args.dets) / f"{args.frame}.txt"
        if det_path.exists():
            dets = [o.box3d for o in load_labels(det_path).objects]
    image_size = IMAGE_SIZE
    depth_path = root / "depth" / f"{args.frame}.png"
    if depth_path.exists():
        d = read_depth_png(depth_path.read_bytes())
        image_size = (d.width, d.height)
    points = []
    if args.instances:
        for path in sorted(Path(args.instances).glob(f"{args.frame}_*.camera.grid")):
            points.append(InstanceGrid.from_bytes(path.read_bytes()).valid_points())
    write_file(args.out, scene_svg(camera, image_size, gts, dets, points))
    print(f"wrote {args.out}")
    return 0


# -- argument parsing --------------------------------------------------------

def run_config(args):
    weights = LossWeights(w_z=args.w_z, w_proj=args.w_proj) if hasattr(args, "w_z") else \
        LossWeights()
    opt = OptimizerConfig(max_iters=args.max_iters, step_init=args.step_init,
                          backtrack=args.backtrack, grad_tol=args.grad_tol,
                          loss_tol=args.loss_tol, max_offset=args.max_offset) \
        if hasattr(args, "max_iters") else OptimizerConfig()
    difficulties = tuple(parse_list(getattr(args, "difficulties", "easy,moderate,hard")))
    return RunConfig(Path(args.root), list_frames(args.root, only=parse_frames(args.frames)),
                     weights=weights, optimizer=opt, difficulties=difficulties,
                     out=Path(args.out) if getattr(args, "out", None) else None)


def _add_common(p, root=True):
    if root:
        p.add_argument("--root", required=True, help="dataset root directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--frames", default="", help="comma list or file of frame ids to use")


def build_parser():
    parser = argparse.ArgumentParser(prog="monoprop", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key = value file providing flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic KITTI-layout dataset")
    p.add_argument("--root", required=True, help="output dataset root")
    p.add_argument("--scenes", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--objects", type=int, default=4, help="objects per scene")
    p.add_argument("--z-min", type=float, default=5.0)
    p.add_argument("--z-max", type=float, default=80.0)
    p.add_argument("--classes", default="Car,Car,Pedestrian,Cyclist",
                   help="class mix, sampled uniformly from this list")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("gen-instances", help="write 48x48 instance grid records")
    _add_common(p)
    p.add_argument("--out", required=True, help="record output directory")
    p.add_argument("--margin", type=float, default=0.1,
                   help="segmentation margin around each box (m)")
    p.set_defaults(func=cmd_gen_instances)

    p = sub.add_parser("propose", help="centroid proposals from 2D boxes")
    _add_common(p)
    p.add_argument("--out", required=True, help="proposal output directory")
    p.add_argument("--source", default="gt",
                   help="'gt' or a subdirectory of root holding 2D detections")
    p.add_argument("--class-means", action="store_true",
                   help="also report proposals made from per-class mean sizes")
    p.add_argument("--jitter", action="store_true",
                   help="perturb 2D boxes keeping IoU >= 0.7 with the original")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--difficulties", default="easy,moderate,hard")
    p.set_defaults(func=cmd_propose)

    p = sub.add_parser("refine", help="refine proposals against instance grids")
    _add_common(p)
    p.add_argument("--proposals", required=True)
    p.add_argument("--instances", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--traces", help="directory for per-object loss traces")
    p.add_argument("--w-z", type=float, default=1.0)
    p.add_argument("--w-proj", type=float, default=1.0)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--step-init", type=float, default=1.0)
    p.add_argument("--backtrack", type=float, default=0.5)
    p.add_argument("--grad-tol", type=float, default=1e-8)
    p.add_argument("--loss-tol", type=float, default=0.0)
    p.add_argument("--max-offset", type=float, default=10.0)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("eval", help="AP_BEV / AP_3D with KITTI difficulty filters")
    p.add_argument("--gt", required=True, help="ground-truth label directory")
    p.add_argument("--dets", required=True, help="detection directory")
    p.add_argument("--frames", default="")
    p.add_argument("--classes", default="Car")
    p.add_argument("--thresholds", default="0.5,0.7")
    p.add_argument("--difficulties", default="easy,moderate,hard")
    p.add_argument("--points", type=int, choices=(11, 40), default=11)
    p.add_argument("--out", help="directory for PR curve text and SVG files")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("viz", help="bird's-eye and image-plane SVG of one frame")
    p.add_argument("--root", required=True)
    p.add_argument("--frame", required=True)
    p.add_argument("--dets")
    p.add_argument("--instances")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_viz)
    return parser


def read_config(path):
    values = {}
    for lineno, line in enumerate(read_text(path).splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise CommandError(f"{path}:{lineno}: expected key = value")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _apply_config(parser, argv, values):
    """Install config values as subcommand defaults, converted by each flag's type."""
    first = parser.parse_args(argv)
    sub = parser._subparsers._group_actions[0].choices[first.command]
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in values.items():
        action = actions.get(key)
        if action is None:
            raise CommandError(f"unknown config key {key!r} for {first.command}")
        if action.const is True and action.nargs == 0:
            defaults[key] = raw.lower() in ("1", "true", "yes", "on")
        else:
            defaults[key] = action.type(raw) if action.type else raw
        action.required = False
    sub.set_defaults(**defaults)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    cfg_parser = argparse.ArgumentParser(add_help=False)
    cfg_parser.add_argument("--config")
    pre, rest = cfg_parser.parse_known_args(argv)
    try:
        if pre.config:
            values = read_config(pre.config)
            # required flags may come from the config file, so relax them first
            sub = parser._subparsers._group_actions[0].choices
            for p in sub.values():
                for a in p._actions:
                    if a.dest in values:
                        a.required = False
            _apply_config(parser, rest, values)
        args = parser.parse_args(rest)
        return args.func(args)
    except (CommandError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
