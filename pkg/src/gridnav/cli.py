"""Command line interface.

Subcommands cover the whole pipeline: synthetic world generation, dataset
generation, training, single-frame detection, online replay with narration,
the two evaluation protocols, and map overlay rendering. Every randomized
subcommand requires an explicit seed, and all output files are written
atomically.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from gridnav import kernels
from gridnav.augment import load_policy
from gridnav.detector import LossWeights
from gridnav.evalkit import (FrameStore, eval_frames, eval_tracked,
                             generate_dataset, generate_suite,
                             label_count_table, load_index, load_suite,
                             make_net_detector, render_overlay, run_online,
                             split_records, train)
from gridnav.evalkit.synthmaps import SynthParams
from gridnav.evalkit.training import TrainConfig
from gridnav.gridworld import Category, load_labels, load_map, load_world
from gridnav.mapper import LocalMap
from gridnav.narrator import Narrator, format_frame
from gridnav.nn import load_weights, save_weights
from gridnav.scansim import LidarParams, load_trajectory
from gridnav.tracker import TrackerConfig
from gridnav.util import atomic_write


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _data_dir():
    return os.environ.get("GRIDNAV_DATA_DIR", ".")


def _sidecar(path):
    return os.path.splitext(path)[0] + ".json"


def _net_px(scale):
    return max(16, int(round(244 * scale)))


def _lidar_from_args(args):
    return LidarParams(fov=math.radians(args.fov_deg), n_beams=args.beams,
                       max_range=args.max_range,
                       range_noise_sigma=args.noise_sigma)


def _add_lidar_flags(p, noise_default=0.0):
    p.add_argument("--fov-deg", type=float, default=270.0,
                   help="LiDAR field of view, degrees")
    p.add_argument("--beams", type=int, default=541, help="beams per scan")
    p.add_argument("--max-range", type=float, default=20.0,
                   help="LiDAR max range, meters")
    p.add_argument("--noise-sigma", type=float, default=noise_default,
                   help="Gaussian range noise sigma, meters")


def build_parser():
    parser = _Parser(
        prog="gridnav",
        description="Occupancy-grid navigational-cue detection, tracking and "
                    "narration.")
    parser.add_argument("--config", default=None,
                        help="TOML config file; flags override its values")
    parser.add_argument("--backend", choices=("compiled", "python"),
                        default=None, help="kernel backend override")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers = {}

    def add(name, help_text):
        p = sub.add_parser(
            name, help=help_text,
            formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        subparsers[name] = p
        return p

    p = add("gen-maps", "generate a suite of synthetic annotated worlds")
    p.add_argument("--out", default=os.path.join(_data_dir(), "maps"),
                   help="output directory")
    p.add_argument("--count", type=int, default=6, help="number of maps")
    p.add_argument("--seed", type=int, required=True, help="generator seed")
    p.add_argument("--scan-rate", type=float, default=5.0,
                   help="trajectory scan rate, Hz")
    p.add_argument("--speed", type=float, default=0.5,
                   help="trajectory speed, m/s")
    p.add_argument("--branches", type=int, default=2,
                   help="branch corridors per map")

    p = add("gen-data", "replay trajectories into a training dataset")
    p.add_argument("--maps", required=True, help="suite directory or suite.json")
    p.add_argument("--out", default=os.path.join(_data_dir(), "dataset"),
                   help="output directory")
    p.add_argument("--seed", type=int, required=True, help="simulation seed")
    p.add_argument("--px16", type=int, default=488,
                   help="stored local-map size, pixels")
    _add_lidar_flags(p)

    p = add("train", "train a detector on a generated dataset")
    p.add_argument("--dataset", required=True, help="dataset index.jsonl")
    p.add_argument("--out", required=True, help="output weights file")
    p.add_argument("--seed", type=int, required=True, help="training seed")
    p.add_argument("--variant", choices=("laser", "map", "combined"),
                   default="combined", help="model input variant")
    p.add_argument("--epochs", type=int, default=20, help="training epochs")
    p.add_argument("--batch-size", type=int, default=60, help="batch size")
    p.add_argument("--image-scale", type=float, default=1.0,
                   help="scales the 244 px network input")
    p.add_argument("--alpha", type=float, nargs=3, default=[0.61, 0.14, 0.25],
                   metavar=("XENT", "COORD", "CONF"),
                   help="loss weights (must sum to 1)")
    p.add_argument("--policy", default=None, help="augmentation policy JSON")

    p = add("detect", "decode detections for one stored frame")
    p.add_argument("--weights", required=True, help="weights file")
    p.add_argument("--laser", required=True, help="laser local-map PGM")
    p.add_argument("--gmap", required=True, help="global-map local-map PGM")
    p.add_argument("--variant", choices=("laser", "map", "combined"),
                   default=None, help="override the trained variant")
    p.add_argument("--threshold", type=float, default=0.5,
                   help="decode probability threshold")
    p.add_argument("--out", default=None, help="write detections JSONL here")

    p = add("run", "online replay: tracking plus narrated cues")
    p.add_argument("--map", required=True, help="world map PGM")
    p.add_argument("--map-meta", default=None,
                   help="map metadata JSON (default: next to the PGM)")
    p.add_argument("--labels", required=True, help="ground-truth labels JSON")
    p.add_argument("--trajectory", required=True, help="trajectory JSON")
    p.add_argument("--weights", required=True, help="weights file")
    p.add_argument("--variant", choices=("laser", "map", "combined"),
                   default=None, help="override the trained variant")
    p.add_argument("--seed", type=int, required=True, help="replay seed")
    p.add_argument("--threshold", type=float, default=0.5,
                   help="decode probability threshold")
    p.add_argument("--cluster-radius", type=float, default=1.0,
                   help="tracker cluster radius, meters")
    p.add_argument("--lifetime", type=float, default=30.0,
                   help="tracked member lifetime, seconds")
    p.add_argument("--px16", type=int, default=488,
                   help="stored local-map size, pixels")
    p.add_argument("--detect-every", type=int, default=1,
                   help="run the detector every k-th frame")
    p.add_argument("--out-dir", default=None, help="write replay logs here")
    _add_lidar_flags(p)

    p = add("eval-frames", "per-frame detection metrics on a dataset split")
    p.add_argument("--weights", required=True, help="weights file")
    p.add_argument("--dataset", required=True, help="dataset index.jsonl")
    p.add_argument("--split", default="test", help="dataset split to score")
    p.add_argument("--seed", type=int, required=True, help="evaluation seed")
    p.add_argument("--variant", choices=("laser", "map", "combined"),
                   default=None, help="override the trained variant")
    p.add_argument("--threshold", type=float, default=0.5,
                   help="decode probability threshold")
    p.add_argument("--radius", type=float, default=0.5,
                   help="match radius, meters")
    p.add_argument("--out", default=None, help="write the JSON report here")

    p = add("eval-tracked", "tracked-map metrics over repeated online runs")
    p.add_argument("--map", required=True, help="world map PGM")
    p.add_argument("--map-meta", default=None,
                   help="map metadata JSON (default: next to the PGM)")
    p.add_argument("--labels", required=True, help="ground-truth labels JSON")
    p.add_argument("--trajectory", required=True, help="trajectory JSON")
    p.add_argument("--weights", required=True, help="weights file")
    p.add_argument("--variant", choices=("laser", "map", "combined"),
                   default=None, help="override the trained variant")
    p.add_argument("--explored", action="store_true",
                   help="replay over an already-built global map")
    p.add_argument("--repetitions", type=int, default=30,
                   help="repetitions to average")
    p.add_argument("--seed", type=int, required=True, help="evaluation seed")
    p.add_argument("--threshold", type=float, default=0.5,
                   help="decode probability threshold")
    p.add_argument("--radius", type=float, default=0.5,
                   help="match radius, meters")
    p.add_argument("--cluster-radius", type=float, default=1.0,
                   help="tracker cluster radius, meters")
    p.add_argument("--lifetime", type=float, default=30.0,
                   help="tracked member lifetime, seconds")
    p.add_argument("--px16", type=int, default=488,
                   help="stored local-map size, pixels")
    p.add_argument("--detect-every", type=int, default=1,
                   help="run the detector every k-th frame")
    p.add_argument("--out", default=None, help="write the JSON report here")
    _add_lidar_flags(p, noise_default=0.02)

    p = add("render", "render features over a map with FP/FN annotations")
    p.add_argument("--map", required=True, help="world map PGM")
    p.add_argument("--map-meta", default=None,
                   help="map metadata JSON (default: next to the PGM)")
    p.add_argument("--labels", required=True, help="ground-truth labels JSON")
    p.add_argument("--features", required=True,
                   help="features JSONL (category/x_m/y_m per line)")
    p.add_argument("--out", required=True, help="output PNG")
    p.add_argument("--radius", type=float, default=0.5,
                   help="match radius, meters")

    return parser, subparsers


def _load_config(path):
    try:
        import tomllib
    except ImportError:     # python < 3.11
        import tomli as tomllib
    with open(path, "rb") as f:
        return tomllib.load(f)


def cmd_gen_maps(args):
    params = SynthParams(scan_rate=args.scan_rate, speed=args.speed,
                         branch_count=args.branches)
    entries = generate_suite(args.out, args.count, args.seed, params)
    for e in entries:
        print(f"{e['name']}  split={e['split']}")
    print(f"wrote {len(entries)} maps to {args.out}")
    return 0


def cmd_gen_data(args):
    suite = load_suite(args.maps)
    index = generate_dataset(suite, args.out, args.seed,
                             lidar=_lidar_from_args(args), px16=args.px16)
    records = load_index(index)
    _, table = label_count_table(records)
    print(table)
    print(f"wrote {len(records)} frames; index at {index}")
    return 0


def cmd_train(args):
    records = load_index(args.dataset)
    splits = split_records(records)
    if "train" not in splits:
        raise UsageError("dataset has no train split")
    val = splits.get("validation") or splits.get("test")
    if not val:
        raise UsageError("dataset has no validation or test split")
    a1, a2, a3 = args.alpha
    config = TrainConfig(
        epochs=args.epochs, batch_size=args.batch_size,
        net_px=_net_px(args.image_scale), variant=args.variant,
        seed=args.seed, loss_weights=LossWeights(a1, a2, a3),
        policy=load_policy(args.policy) if args.policy else TrainConfig().policy)
    result = train(splits["train"], val, config,
                   log_fn=lambda e: print(
                       f"epoch {e['epoch']:3d}  train {e['train_loss']:.4f}  "
                       f"val {e['val_loss']:.4f}  ({e['seconds']:.1f}s)"))
    save_weights(result.net, args.out, meta={"training": result.log})
    print(f"best epoch {result.best_epoch} (val loss {result.best_val_loss:.4f}); "
          f"weights at {args.out}")
    return 0


def _resolve_variant(args, meta):
    if args.variant:
        return args.variant
    return meta.get("training", {}).get("variant", "combined")


def cmd_detect(args):
    net, meta = load_weights(args.weights)
    laser16 = LocalMap.load(args.laser, _sidecar(args.laser))
    gmap16 = LocalMap.load(args.gmap, _sidecar(args.gmap))
    detect = make_net_detector(net, variant=_resolve_variant(args, meta),
                               threshold=args.threshold)
    dets = detect(laser16, gmap16, laser16.anchor_pose, 0.0)
    print(json.dumps([d.to_dict() for d in dets]))
    if args.out:
        atomic_write(args.out,
                     "".join(json.dumps(d.to_dict()) + "\n" for d in dets))
    return 0


def _load_world_args(args):
    meta = args.map_meta or _sidecar(args.map)
    return load_world(args.map, meta, args.labels,
                      name=os.path.basename(os.path.dirname(args.map)) or "map")


def cmd_run(args):
    world = _load_world_args(args)
    traj = load_trajectory(args.trajectory)
    net, meta = load_weights(args.weights)
    detect = make_net_detector(net, variant=_resolve_variant(args, meta),
                               threshold=args.threshold)
    narrator = Narrator()
    rng = np.random.default_rng(args.seed)
    tracker_log = []
    utter_log = []

    def on_frame(t, pose, detections, snapshot):
        utterances = narrator.narrate(pose, snapshot, t)
        for line in format_frame(utterances):
            print(line)
        for u in utterances:
            utter_log.append(u.to_dict())
        tracker_log.append({"t": t, "features": [s.to_dict() for s in snapshot]})

    result = run_online(world, traj, detect, lidar=_lidar_from_args(args),
                        px16=args.px16,
                        tracker_config=TrackerConfig(args.cluster_radius,
                                                     args.lifetime),
                        rng=rng, detect_every=args.detect_every,
                        on_frame=on_frame)
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        atomic_write(os.path.join(args.out_dir, "tracker_log.jsonl"),
                     "".join(json.dumps(e) + "\n" for e in tracker_log))
        atomic_write(os.path.join(args.out_dir, "utterances.jsonl"),
                     "".join(json.dumps(e) + "\n" for e in utter_log))
        feats = result.recorder.scored_features()
        atomic_write(os.path.join(args.out_dir, "features.jsonl"),
                     "".join(json.dumps({"category": s.category.value,
                                         "x_m": s.position[0],
                                         "y_m": s.position[1]}) + "\n"
                             for s in feats))
    print(f"replayed {result.n_frames} frames, "
          f"{len(result.tracker.clusters)} live tracked features")
    return 0


def cmd_eval_frames(args):
    net, meta = load_weights(args.weights)
    records = [r for r in load_index(args.dataset) if r.split == args.split]
    if not records:
        raise UsageError(f"split {args.split!r} has no records")
    report = eval_frames(net, records, FrameStore(),
                         variant=_resolve_variant(args, meta),
                         threshold=args.threshold, radius=args.radius,
                         meta={"split": args.split, "seed": args.seed})
    print(report.table())
    print(report.to_json())
    if args.out:
        atomic_write(args.out, report.to_json() + "\n")
    return 0


def cmd_eval_tracked(args):
    world = _load_world_args(args)
    traj = load_trajectory(args.trajectory)
    net, meta = load_weights(args.weights)
    variant = _resolve_variant(args, meta)
    detect = make_net_detector(net, variant=variant, threshold=args.threshold)
    report = eval_tracked(
        world, traj, detect, explored=args.explored,
        repetitions=args.repetitions, seed=args.seed,
        lidar=_lidar_from_args(args), px16=args.px16,
        tracker_config=TrackerConfig(args.cluster_radius, args.lifetime),
        radius=args.radius, detect_every=args.detect_every,
        meta={"variant": variant, "map": world.name})
    print(report.table(row_name=variant))
    print(report.to_json())
    if args.out:
        atomic_write(args.out, report.to_json() + "\n")
    return 0


def cmd_render(args):
    grid = load_map(args.map, args.map_meta or _sidecar(args.map))
    truths = load_labels(args.labels)
    features = []
    with open(args.features) as f:
        for line in f:
            line = line.strip()
            if line:
                d = json.loads(line)
                features.append((Category(d["category"]),
                                 (float(d["x_m"]), float(d["y_m"]))))
    render_overlay(grid, features,
                   [(l.category, l.position) for l in truths],
                   args.out, radius=args.radius)
    print(f"wrote {args.out}")
    return 0


_COMMANDS = {
    "gen-maps": cmd_gen_maps,
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "detect": cmd_detect,
    "run": cmd_run,
    "eval-frames": cmd_eval_frames,
    "eval-tracked": cmd_eval_tracked,
    "render": cmd_render,
}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser, subparsers = build_parser()
    try:
        # config file values become defaults; explicit flags still win
        pre, _ = parser.parse_known_args(argv)
        if pre.config:
            cfg = _load_config(pre.config)
            for name, p in subparsers.items():
                section = dict(cfg.get("gridnav", cfg))
                section.update(cfg.get(name.replace("-", "_"), {}))
                known = {a.dest for a in p._actions}
                p.set_defaults(**{k: v for k, v in section.items() if k in known})
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_help()
            return 1
        if args.backend:
            kernels.use_backend(args.backend)
        return _COMMANDS[args.command](args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (ValueError, OSError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
