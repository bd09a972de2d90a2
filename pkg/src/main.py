"""Command-line entry point: `python -m src.main <subcommand> ...`.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from src.config import settings
from src.config.schema import NetworkConfig, NoiseSpec, TrainConfig, load_json
from src.db.checkpoint import load_checkpoint
from src.models.cost import count_params_and_flops
from src.models.nbnet import forward
from src.models.presets import ablation_presets, experiment_presets, find_experiment, resolve_network
from src.services.basis_service import export_basis
from src.services.evaluation_service import evaluate
from src.services.noise_service import apply_noise
from src.services.sampling import ImageDataset
from src.services.training_service import TrainingService
from src.services.verification_service import SUITES, run_suite
from src.utils.errors import ConfigurationError, NBNetError
from src.utils.image_io import read_image, write_image
from src.utils.manifest import DatasetManifest, from_paths

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _show(title: str, config: Dict[str, Any]) -> None:
    print(f"# {title}")
    print(json.dumps(config, indent=2, sort_keys=True, default=str))


def _path(root: Optional[str], value: str) -> Path:
    p = Path(value)
    return p if p.is_absolute() or root is None else Path(root) / p


def _network(value: str) -> NetworkConfig:
    if value.endswith(".json"):
        return NetworkConfig.from_dict(load_json(value))
    return resolve_network(value)


def _train_config(value: Optional[str], net_name: str) -> TrainConfig:
    if value is None:
        experiment = find_experiment(net_name)
        return experiment.train if experiment is not None else TrainConfig()
    if value.endswith(".json"):
        return TrainConfig.from_dict(load_json(value))
    experiment = find_experiment(value)
    if experiment is None:
        raise ConfigurationError(f"--train must be a JSON file or an experiment preset, got {value!r}")
    return experiment.train


def _train_noise(value: Optional[str], net_name: str, seed: int) -> NoiseSpec:
    if value is not None:
        return NoiseSpec.parse(value, seed=seed)
    experiment = find_experiment(net_name)
    return experiment.noise.with_seed(seed) if experiment is not None else NoiseSpec.parse("awgn:25", seed=seed)


def cmd_train(args) -> int:
    net = _network(args.net)
    train_cfg = _train_config(args.train, args.net)
    overrides = {k: v for k, v in (("total_iters", args.iters), ("seed", args.seed)) if v is not None}
    if overrides:
        train_cfg = TrainConfig.from_dict({**train_cfg.to_dict(), **overrides})
    noise = None if args.paired else _train_noise(args.noise, args.net, train_cfg.seed)
    _show("effective configuration", {
        "command": "train", "net": net.to_dict(), "train": train_cfg.to_dict(),
        "noise": noise.to_dict() if noise else "paired", "data": args.data, "val_data": args.val_data,
        "out_dir": args.out_dir, "workers": args.workers,
    })
    manifest = DatasetManifest.load(_path(args.root, args.data), root=args.root)
    data = ImageDataset.from_manifest(manifest, paired=args.paired)
    val = None
    if args.val_data:
        val = ImageDataset.from_manifest(DatasetManifest.load(_path(args.root, args.val_data), root=args.root),
                                         paired=args.paired)
    service = TrainingService(net, train_cfg, out_dir=args.out_dir, noise=noise, num_workers=args.workers)
    result = service.train(data, val_data=val)
    print(f"checkpoint: {result.checkpoint}")
    print(f"metrics log: {result.log_path}")
    print(f"loss: {result.initial_loss:.6f} -> {result.final_loss:.6f}")
    return 0


def _checkpoint_summary(state) -> Dict[str, Any]:
    return {"network": state.config.to_dict(), "step": state.step, "seed": state.seed}


def cmd_denoise(args) -> int:
    state = load_checkpoint(args.ckpt)
    _show("effective configuration", {"command": "denoise", "ckpt": args.ckpt, "in": args.input, "out": args.output,
                                      **_checkpoint_summary(state)})
    noisy = read_image(args.input, dtype=state.dtype)
    restored = forward(state, noisy)
    write_image(restored, args.output, clamp=True)
    print(f"wrote {args.output}")
    return 0


def cmd_eval(args) -> int:
    noise = None if args.paired else NoiseSpec.parse(args.noise, seed=args.seed)
    _show("effective configuration", {
        "command": "eval", "ckpt": args.ckpt, "data": args.data,
        "noise": noise.to_dict() if noise else "paired", "workers": args.workers,
    })
    manifest = DatasetManifest.load(_path(args.root, args.data), root=args.root)
    report = evaluate(args.ckpt, manifest, noise=noise, paired=args.paired, num_workers=args.workers)
    print(report.format())
    if args.records:
        report.write_records(args.records)
        print(f"records: {args.records}")
    return 0


def cmd_synth_noise(args) -> int:
    noise = NoiseSpec.parse(args.noise, seed=args.seed)
    _show("effective configuration", {"command": "synth-noise", "data": args.data, "noise": noise.to_dict(),
                                      "out_dir": args.out_dir})
    manifest = DatasetManifest.load(_path(args.root, args.data), root=args.root)
    out_dir = Path(args.out_dir)
    clean_paths, noisy_paths = [], []
    for i, record in enumerate(manifest):
        clean = read_image(record.clean_path)
        noisy = apply_noise(clean, noise, stream=i)
        ext = ".ppm" if clean.shape[1] == 3 else ".pgm"
        clean_paths.append(write_image(clean, out_dir / f"clean_{i:04d}{ext}"))
        noisy_paths.append(write_image(noisy, out_dir / f"noisy_{i:04d}{ext}", clamp=True))
    target = from_paths(clean_paths, out_dir, noisy_paths, color=manifest.color).save(out_dir / "manifest.tsv")
    print(f"wrote {len(clean_paths)} pairs and {target}")
    return 0


def cmd_export_basis(args) -> int:
    state = load_checkpoint(args.ckpt)
    _show("effective configuration", {"command": "export-basis", "ckpt": args.ckpt, "in": args.input,
                                      "layer": args.layer, "out_dir": args.out_dir, **_checkpoint_summary(state)})
    paths = export_basis(state, read_image(args.input, dtype=state.dtype), args.layer, args.out_dir)
    print(f"wrote {len(paths)} files to {args.out_dir}")
    return 0


def cmd_gradcheck(args) -> int:
    _show("effective configuration", {"command": "gradcheck", "module": args.module, "seed": args.seed})
    reports = run_suite(args.module, seed=args.seed)
    for report in reports:
        print(report.format())
    failed = [r.name for r in reports if not r.passed]
    print(f"{len(reports) - len(failed)}/{len(reports)} checks passed")
    return 0 if not failed else 2


def cmd_presets(args) -> int:
    _show("effective configuration", {"command": "presets", "size": args.size})
    rows = []
    for name, net in ablation_presets().items():
        cost = count_params_and_flops(net, args.size, args.size)
        rows.append({"preset": name, "kind": "ablation", "K": net.K if net.ssa.enabled else "-",
                     "params_M": round(cost.params / 1e6, 3), "GMACs": round(cost.gmacs, 2)})
    for name, exp in experiment_presets().items():
        cost = count_params_and_flops(exp.net, args.size, args.size)
        rows.append({"preset": name, "kind": "experiment", "K": exp.net.K,
                     "params_M": round(cost.params / 1e6, 3), "GMACs": round(cost.gmacs, 2)})
    print(pd.DataFrame(rows).to_string(index=False))
    if args.breakdown:
        print()
        print(count_params_and_flops(_network(args.breakdown), args.size, args.size).format())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nbnet", description="NBNet subspace-projection image denoiser")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train a network")
    p.add_argument("--net", required=True, help="preset name or network JSON file")
    p.add_argument("--train", help="train JSON file or experiment preset (defaults from --net)")
    p.add_argument("--data", required=True, help="training manifest")
    p.add_argument("--val-data", help="validation manifest")
    p.add_argument("--noise", help="awgn:<sigma> or noniid:<mask_id> (default: preset noise, else awgn:25)")
    p.add_argument("--paired", action="store_true", help="use noisy images from the manifest")
    p.add_argument("--out-dir", default=settings.CHECKPOINT_DIR)
    p.add_argument("--iters", type=int, help="override total_iters")
    p.add_argument("--seed", type=int, help="override the train seed")
    p.add_argument("--workers", type=int, default=settings.NUM_WORKERS)
    p.add_argument("--root", default=settings.DATA_ROOT)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("denoise", help="denoise one image")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("eval", help="PSNR/SSIM of a checkpoint on a dataset")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--noise", default="awgn:25")
    p.add_argument("--paired", action="store_true")
    p.add_argument("--seed", type=int, default=settings.SEED)
    p.add_argument("--records", help="write per-image records (TSV) here")
    p.add_argument("--workers", type=int, default=settings.NUM_WORKERS)
    p.add_argument("--root", default=settings.DATA_ROOT)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth-noise", help="write noisy/clean pairs and a paired manifest")
    p.add_argument("--data", required=True)
    p.add_argument("--noise", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=settings.SEED)
    p.add_argument("--root", default=settings.DATA_ROOT)
    p.set_defaults(func=cmd_synth_noise)

    p = sub.add_parser("export-basis", help="write the basis maps of one SSA layer")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--layer", type=int, required=True, help="decoder stage index")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_export_basis)

    p = sub.add_parser("gradcheck", help="finite-difference gradient suites")
    p.add_argument("--module", choices=SUITES, default="all")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("presets", help="list named configurations with their cost")
    p.add_argument("--size", type=int, default=256, help="input side for MAC counts")
    p.add_argument("--breakdown", metavar="NET", help="per-module table for a preset or JSON file")
    p.set_defaults(func=cmd_presets)
    return parser


def cli(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=settings.LOG_LEVEL, format=settings.LOG_FORMAT)
    try:
        return args.func(args)
    except (NBNetError, OSError) as e:
        logger.debug("command failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return 2


def main(argv: Optional[List[str]] = None) -> None:
    sys.exit(cli(argv))


if __name__ == "__main__":
    main()
