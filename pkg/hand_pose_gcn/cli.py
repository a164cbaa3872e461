#  Copyright (c) 2026 hand-pose-gcn contributors
#  Licensed under the Apache License, Version 2.0 (the "License");
#  you may not use this file except in compliance with the License.
#  You may obtain a copy of the License at
#
#  https://www.apache.org/licenses/LICENSE-2.0
#
#  Unless required by applicable law or agreed to in writing, software
#  distributed under the License is distributed on an "AS IS" BASIS,
#  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#  See the License for the specific language governing permissions and
#  limitations under the License

"""Command line entry point: hand-pose-gcn <command> [options]."""

import argparse
import csv
import itertools
import json
import logging
import os
import sys
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import torch
from torch.utils.data import DataLoader, Dataset

from hand_pose_gcn import plots
from hand_pose_gcn.config import Config, read_config
from hand_pose_gcn.data import CachedDataset, Sample, open_dataset
from hand_pose_gcn.errors import ConfigurationError, HandPoseError
from hand_pose_gcn.evalkit import EvaluationResult, evaluate
from hand_pose_gcn.posenet import (VARIANTS, HandPoseNet, ModelVariant,
                                   check_compatible, load_checkpoint)
from hand_pose_gcn.quantizer import (QuantizerConfig, create_classes_2d,
                                     create_classes_3d)
from hand_pose_gcn.relations import (ann_adjacency, knn_adjacency,
                                     relation_degrees, relation_density)
from hand_pose_gcn.reporting import RunReporter, create_rp_service, markdown_table
from hand_pose_gcn.skeleton import JOINT_NAMES, pose_from_json
from hand_pose_gcn.training import Stage, TrainResult, train
from hand_pose_gcn.utils import LockFile, config_hash, seed_everything

logger = logging.getLogger(__name__)

LOCK_NAME = ".hand-pose-gcn.lock"
ABLATION_COLUMNS = ["variant", "epe_3d_mm", "epe_3d_norm", "auc_3d",
                    "epe_2d_px"]
CLASSES_COLUMNS = ["splits_2d", "splits_3d", "classes_2d", "classes_3d",
                   "acc_2d", "prec_2d", "rec_2d", "acc_3d", "prec_3d",
                   "rec_3d", "epe_3d_mm"]


def _write_json(path: str, data: Any) -> str:
    with open(path, "w") as handle:
        json.dump(data, handle, indent=2)
    return path


def _write_csv(path: str, header: Sequence[str],
               rows: Sequence[Sequence[Any]]) -> str:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    names = ("dataset", "data_root", "cache_dir", "seed", "stage", "variant",
             "steps", "coarse_checkpoint", "resume")
    overrides = {name: getattr(args, name, None) for name in names}
    overrides["output_dir"] = args.out
    return {key: str(value) for key, value in overrides.items()
            if value is not None}


def _dataset(cfg: Config, split: str,
             quantizer: Optional[QuantizerConfig] = None) -> Dataset:
    quantizer = quantizer or cfg.quantizer
    return open_dataset(cfg.dataset, quantizer, cfg.data_root, split,
                        cfg.synth_count, cfg.seed, cfg.cache_dir,
                        cache_key=cfg.cache_key(split, quantizer),
                        limit=cfg.limit)


def _get_sample(dataset: Dataset, index: int) -> Sample:
    if not 0 <= index < len(dataset):
        raise ConfigurationError(
            f"Sample index {index} outside [0, {len(dataset)})"
        )
    if isinstance(dataset, CachedDataset):
        return dataset.sample(index)
    return dataset.samples[index]


def _loader(cfg: Config, dataset: Dataset) -> DataLoader:
    return DataLoader(dataset, batch_size=cfg.batch_size, shuffle=False,
                      num_workers=cfg.num_workers)


def _train_stage(cfg: Config, variant: ModelVariant, stage: Stage,
                 dataset: Dataset, reporter: RunReporter,
                 coarse_checkpoint: Optional[str] = None,
                 model_config=None, run_name: Optional[str] = None
                 ) -> TrainResult:
    model_config = model_config or cfg.model_config(variant)
    run_name = run_name or cfg.run_name(variant)
    reporter.start_item(f"{variant.name} {stage.name.lower()}",
                        attributes={"variant": variant.name,
                                    "stage": stage.name.lower()})
    try:
        result = train(model_config, cfg.train_config(stage, coarse_checkpoint),
                       dataset, cfg.output_dir, run_name, reporter)
    except HandPoseError:
        reporter.finish_item("FAILED")
        raise
    reporter.attach_files([result.loss_csv])
    reporter.finish_item()
    return result


def _evaluation_rows(result: EvaluationResult) -> List[List[Any]]:
    rows = [["EPE 2D (px)", result.epe_2d_px],
            ["EPE 3D (mm)", result.epe_3d_mm],
            ["EPE 3D (normalized)", result.epe_3d_norm],
            ["EPE 3D coarse (mm)", result.epe_3d_coarse_mm],
            ["AUC 3D 20-50 mm", result.auc_3d],
            ["AUC 2D 0-30 px", result.auc_2d]]
    for space, report in (("2D", result.classification_2d),
                          ("3D", result.classification_3d)):
        if report is not None:
            rows.extend([[f"{space} accuracy", report.accuracy],
                         [f"{space} precision", report.precision],
                         [f"{space} recall", report.recall]])
    if result.theta is not None:
        rows.append(["learned theta", result.theta])
    return rows


def cmd_train(cfg: Config, args: argparse.Namespace,
              reporter: RunReporter) -> int:
    if (cfg.stage is Stage.REFINEMENT
            and not (cfg.coarse_checkpoint or cfg.resume)):
        raise ConfigurationError(
            "Refinement stage requires --coarse-checkpoint"
        )
    dataset = _dataset(cfg, "train")
    result = _train_stage(cfg, cfg.variant, cfg.stage, dataset, reporter,
                          cfg.coarse_checkpoint)
    print(f"Trained {cfg.stage.name.lower()} stage for {result.steps} steps")
    print(markdown_table(["loss", "value"],
                         [[k, v] for k, v in result.last_losses.items()]))
    print(f"Checkpoint: {result.checkpoint_path}")
    print(f"Loss curve: {result.loss_csv}")
    return 0


def _load_for_eval(cfg: Config, path: str) -> HandPoseNet:
    if not path:
        raise ConfigurationError("--checkpoint is required")
    if not os.path.exists(path):
        raise ConfigurationError(f"Checkpoint {path} not found")
    model, _ = load_checkpoint(path)
    check_compatible(model.config, cfg.model_config(model.config.variant))
    return model


def _checkpoint_stem(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


def cmd_eval(cfg: Config, args: argparse.Namespace,
             reporter: RunReporter) -> int:
    model = _load_for_eval(cfg, args.checkpoint)
    dataset = _dataset(cfg, args.split)
    reporter.start_item(f"evaluate {model.variant.name}")
    result = evaluate(model, _loader(cfg, dataset), cfg.device)
    stem = os.path.join(cfg.output_dir,
                        f"{_checkpoint_stem(args.checkpoint)}-{args.split}")
    outputs = [
        _write_json(f"{stem}-metrics.json", result.to_dict()),
        _write_csv(f"{stem}-pck3d.csv", ["threshold_mm", "pck"],
                   result.pck_3d.to_rows()),
        _write_csv(f"{stem}-pck2d.csv", ["threshold_px", "pck"],
                   result.pck_2d.to_rows()),
        plots.plot_pck_curves({model.variant.name: result.pck_3d},
                              f"{stem}-pck3d.png"),
        plots.plot_pck_curves({model.variant.name: result.pck_2d},
                              f"{stem}-pck2d.png", "Error threshold (px)"),
    ]
    rows = _evaluation_rows(result)
    reporter.log_table("Evaluation", ["metric", "value"], rows)
    reporter.attach_files(outputs)
    reporter.finish_item()
    print(markdown_table(["metric", "value"], rows))
    print(f"Metrics: {outputs[0]}")
    return 0


def _relation_json(matrix: torch.Tensor) -> List[List[int]]:
    return matrix.to(torch.int64).tolist()


def cmd_inspect(cfg: Config, args: argparse.Namespace,
                reporter: RunReporter) -> int:
    model = _load_for_eval(cfg, args.checkpoint)
    model.eval()
    sample = _get_sample(_dataset(cfg, args.split), args.index)
    image = torch.from_numpy(np.ascontiguousarray(sample.image))
    image = image.permute(2, 0, 1).float().div(255.0)[None]
    with torch.no_grad():
        outputs = model(image)
    empty = torch.zeros(1, len(JOINT_NAMES), len(JOINT_NAMES))
    relation_2d = outputs.relation_2d if outputs.relation_2d is not None else empty
    relation_3d = outputs.relation_3d if outputs.relation_3d is not None else empty
    coarse = outputs.pose_3d_coarse
    if outputs.relation_refine is not None:
        relation_refine = outputs.relation_refine
        refine_title = f"{model.variant.refinement.name} relation"
    else:
        relation_refine = ann_adjacency(coarse, torch.tensor(
            model.config.theta_init, dtype=coarse.dtype))
        refine_title = f"ANN relation (theta={model.config.theta_init})"
    if model.theta is not None:
        refine_title += f", theta={model.theta:.4f}"

    size = model.config.image_size
    stem = os.path.join(cfg.output_dir,
                        f"{_checkpoint_stem(args.checkpoint)}-sample{args.index}")
    files = [
        plots.save_image(sample.image, f"{stem}-input.png"),
        plots.plot_relation_heatmap(relation_2d[0], f"{stem}-relation2d.png",
                                    "2D class relation"),
        plots.plot_skeleton_2d(sample.image, outputs.pose_2d[0].numpy() * size,
                               f"{stem}-pose2d.png", sample.pose_2d_px,
                               "2D pose (dashed: ground truth)"),
        plots.plot_relation_heatmap(relation_3d[0], f"{stem}-relation3d.png",
                                    "3D class relation"),
        plots.plot_skeleton_3d(coarse[0].numpy(), f"{stem}-coarse3d.png",
                               "Coarse 3D pose"),
        plots.plot_relation_heatmap(relation_refine[0],
                                    f"{stem}-relation-refine.png", refine_title),
        plots.plot_skeleton_3d(outputs.pose_3d[0].numpy(),
                               f"{stem}-refined3d.png", "Refined 3D pose"),
        plots.plot_skeleton_3d(sample.pose_3d_norm, f"{stem}-gt3d.png",
                               "Ground-truth 3D pose"),
    ]
    matrices = {"relation_2d": relation_2d[0], "relation_3d": relation_3d[0],
                "relation_refine": relation_refine[0]}
    summary = {
        "sample": sample.meta.get("id"),
        "variant": model.variant.name,
        "theta": model.theta,
        "pose_2d_px": (outputs.pose_2d[0] * size).tolist(),
        "pose_3d_coarse": coarse[0].tolist(),
        "pose_3d": outputs.pose_3d[0].tolist(),
        "gt_pose_2d_px": sample.pose_2d_px.tolist(),
        "gt_pose_3d": sample.pose_3d_norm.tolist(),
        "gt_labels_2d": sample.labels_2d.tolist(),
        "gt_labels_3d": sample.labels_3d.tolist(),
    }
    if outputs.logits_2d is not None:
        summary["labels_2d"] = outputs.logits_2d[0].argmax(dim=0).tolist()
        summary["labels_3d"] = outputs.logits_3d[0].argmax(dim=0).tolist()
    for name, matrix in matrices.items():
        summary[name] = _relation_json(matrix)
        summary[f"{name}_density"] = float(relation_density(matrix))
        summary[f"{name}_degrees"] = relation_degrees(matrix).to(
            torch.int64).tolist()
    files.append(_write_json(f"{stem}-inspect.json", summary))
    reporter.start_item(f"inspect {sample.meta.get('id')}")
    reporter.attach_files(files)
    reporter.finish_item()
    print(f"Wrote {len(files)} files to {cfg.output_dir}")
    return 0


def cmd_ablate(cfg: Config, args: argparse.Namespace,
               reporter: RunReporter) -> int:
    train_set = _dataset(cfg, "train")
    eval_set = _dataset(cfg, args.split) if args.split != "train" else train_set
    coarse_variant = VARIANTS["B"]
    coarse = _train_stage(cfg, coarse_variant, Stage.COARSE, train_set, reporter)
    baseline_a = _train_stage(cfg, VARIANTS["A"], Stage.COARSE, train_set,
                              reporter)
    results = {}
    for name in VARIANTS:
        variant = VARIANTS[name]
        if name == "A":
            model = baseline_a.model
        elif name == "B":
            model = coarse.model
        else:
            model = _train_stage(cfg, variant, Stage.REFINEMENT, train_set,
                                 reporter, coarse.checkpoint_path).model
        results[name] = evaluate(model, _loader(cfg, eval_set), cfg.device)

    rows = [[name, r.epe_3d_mm, r.epe_3d_norm, r.auc_3d, r.epe_2d_px]
            for name, r in results.items()]
    tag = cfg.settings_hash(coarse_variant)
    path = _write_csv(os.path.join(cfg.output_dir, f"ablation-{tag}.csv"),
                      ABLATION_COLUMNS, rows)
    curves = plots.plot_pck_curves(
        {name: r.pck_3d for name, r in results.items()},
        os.path.join(cfg.output_dir, f"ablation-{tag}-pck3d.png"))
    reporter.start_item("ablation")
    reporter.log_table("Ablation", ABLATION_COLUMNS, rows)
    reporter.attach_files([path, curves])
    reporter.finish_item()
    print(markdown_table(ABLATION_COLUMNS, rows))
    print(f"Ablation table: {path}")
    return 0


def _split_pairs(values: Sequence[int], grid: bool):
    if grid:
        return list(itertools.product(values, values))
    return [(v, v) for v in values]


def cmd_classes(cfg: Config, args: argparse.Namespace,
                reporter: RunReporter) -> int:
    values = [int(v) for v in args.splits.split(",") if v.strip()]
    variant = VARIANTS["B"]
    rows = []
    for splits_2d, splits_3d in _split_pairs(values, args.grid):
        quantizer = QuantizerConfig(splits_2d, splits_3d,
                                    cfg.quantizer.image_size)
        model_config = cfg.model_config(variant, quantizer)
        tag = config_hash({"base": cfg.settings_hash(variant),
                           "splits": [splits_2d, splits_3d]})
        run_name = f"{cfg.dataset}-classes-{splits_2d}x{splits_3d}-{tag}"
        train_set = _dataset(cfg, "train", quantizer)
        eval_set = (train_set if args.split == "train"
                    else _dataset(cfg, args.split, quantizer))
        trained = _train_stage(cfg, variant, Stage.COARSE, train_set, reporter,
                               model_config=model_config, run_name=run_name)
        result = evaluate(trained.model, _loader(cfg, eval_set), cfg.device)
        c2, c3 = result.classification_2d, result.classification_3d
        rows.append([splits_2d, splits_3d, quantizer.num_classes_2d,
                     quantizer.num_classes_3d, c2.accuracy, c2.precision,
                     c2.recall, c3.accuracy, c3.precision, c3.recall,
                     result.epe_3d_mm])
    tag = cfg.settings_hash(variant)
    path = _write_csv(os.path.join(cfg.output_dir, f"classes-{tag}.csv"),
                      CLASSES_COLUMNS, rows)
    reporter.start_item("class count sweep")
    reporter.log_table("Class count sweep", CLASSES_COLUMNS, rows)
    reporter.attach_files([path])
    reporter.finish_item()
    print(markdown_table(CLASSES_COLUMNS, rows))
    print(f"Class sweep table: {path}")
    return 0


def _read_pose(path: str):
    try:
        with open(path) as handle:
            return pose_from_json(handle.read())
    except FileNotFoundError:
        raise ConfigurationError(f"Pose file {path} not found") from None


def cmd_quantize(cfg: Config, args: argparse.Namespace,
                 reporter: RunReporter) -> int:
    if not (args.pose_2d or args.pose_3d):
        raise ConfigurationError("Give --pose-2d and/or --pose-3d")
    result = {}
    if args.pose_2d:
        labels = create_classes_2d(_read_pose(args.pose_2d),
                                   cfg.quantizer.splits_2d,
                                   cfg.quantizer.image_size)
        result["labels_2d"] = labels.tolist()
        result["num_classes_2d"] = labels.num_classes
    if args.pose_3d:
        labels = create_classes_3d(_read_pose(args.pose_3d),
                                   cfg.quantizer.splits_3d)
        result["labels_3d"] = labels.tolist()
        result["num_classes_3d"] = labels.num_classes
    print(json.dumps(result))
    return 0


def cmd_relations(cfg: Config, args: argparse.Namespace,
                  reporter: RunReporter) -> int:
    pose = torch.from_numpy(_read_pose(args.pose))[None]
    if pose.shape[-1] != 3:
        raise ConfigurationError("Relations need a 3D pose")
    if args.mode == "knn":
        k = args.k or cfg.knn_k
        matrix = knn_adjacency(pose, k)[0]
        title = f"{k}-NN relation"
    else:
        theta = args.theta if args.theta is not None else cfg.theta_init
        matrix = ann_adjacency(pose, torch.tensor(theta, dtype=pose.dtype))[0]
        title = f"ANN relation (theta={theta})"
    stem = os.path.join(cfg.output_dir,
                        f"relations-{args.mode}-"
                        f"{config_hash({'pose': pose.tolist(), 'title': title})}")
    summary = {"mode": args.mode, "matrix": _relation_json(matrix),
               "density": float(relation_density(matrix)),
               "degrees": relation_degrees(matrix).to(torch.int64).tolist()}
    _write_json(f"{stem}.json", summary)
    plots.plot_relation_heatmap(matrix, f"{stem}.png", title)
    print(json.dumps(summary))
    return 0


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "inspect": cmd_inspect,
    "ablate": cmd_ablate,
    "classes": cmd_classes,
    "quantize": cmd_quantize,
    "relations": cmd_relations,
}
LOCK_FREE = ("quantize",)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="ini file (default hand_pose_gcn.ini)")
    common.add_argument("--dataset", choices=["synth", "rhd", "stb"])
    common.add_argument("--data-root", dest="data_root")
    common.add_argument("--cache-dir", dest="cache_dir")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--steps", type=int)
    common.add_argument("--log-level", dest="log_level", default="INFO")

    parser = argparse.ArgumentParser(
        prog="hand-pose-gcn",
        description="Hybrid classification-regression graph networks for "
                    "2D/3D hand pose estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common], help="train one stage")
    p.add_argument("--stage", choices=["coarse", "refinement"])
    p.add_argument("--variant", choices=list(VARIANTS))
    p.add_argument("--coarse-checkpoint", dest="coarse_checkpoint")
    p.add_argument("--resume", help="checkpoint of this stage to continue")

    for name, text in (("eval", "evaluate a checkpoint"),
                       ("inspect", "plot one sample end to end")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--split", choices=["train", "test"], default="test")
        if name == "inspect":
            p.add_argument("--index", type=int, default=0)

    p = sub.add_parser("ablate", parents=[common],
                       help="train and compare variants A, B, C, D and Full")
    p.add_argument("--split", choices=["train", "test"], default="test")

    p = sub.add_parser("classes", parents=[common],
                       help="sweep the number of 2D/3D classes")
    p.add_argument("--splits", default="2,3,4,5")
    p.add_argument("--grid", action="store_true",
                   help="every 2D/3D pairing instead of the diagonal")
    p.add_argument("--split", choices=["train", "test"], default="test")

    p = sub.add_parser("quantize", parents=[common],
                       help="class labels of a pose JSON")
    p.add_argument("--pose-2d", dest="pose_2d")
    p.add_argument("--pose-3d", dest="pose_3d")

    p = sub.add_parser("relations", parents=[common],
                       help="ANN or KNN relation matrix of a 3D pose JSON")
    p.add_argument("--pose", required=True)
    p.add_argument("--mode", choices=["ann", "knn"], default="ann")
    p.add_argument("--theta", type=float)
    p.add_argument("--k", type=int)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    reporter = None
    status = "FAILED"
    try:
        cfg = read_config(args.config, _overrides(args))
        seed_everything(cfg.seed)
        os.makedirs(cfg.output_dir, exist_ok=True)
        reporter = RunReporter(cfg.reporting, create_rp_service(cfg.reporting))
        reporter.start_launch(args.command)
        command = COMMANDS[args.command]
        if args.command in LOCK_FREE:
            code = command(cfg, args, reporter)
        else:
            with LockFile(os.path.join(cfg.output_dir, LOCK_NAME)):
                code = command(cfg, args, reporter)
        status = "PASSED"
        return code
    except HandPoseError as exc:
        logger.debug("Command %s failed", args.command, exc_info=True)
        print(f"hand-pose-gcn {args.command}: error: {exc}", file=sys.stderr)
        return 2
    finally:
        if reporter is not None:
            reporter.finish_launch(status)


if __name__ == "__main__":
    sys.exit(main())
