"""Single executable exposing every pipeline stage as a subcommand.

Exit codes: 0 success, 1 validation/parse error, 2 usage error.  All
numeric report fields are fixed-format (4 decimals in reports, 6 for
scalar metrics) so golden-file comparisons are stable.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from freedet import beam, fileio, losses, mapping, pseudo, synth
from freedet._parallel import default_threads
from freedet.ap import EvalReport, evaluate_densecap, evaluate_fixed_ap
from freedet.assignment import (
    DEFAULT_WEIGHTS,
    Assignment,
    build_cost_matrix,
    solve_assignment,
)
from freedet.core import BoundingBox, EvalConfig
from freedet.errors import ToolkitError
from freedet.geometry import nms
from freedet.meteor import MeteorParams, meteor


def _render_json(obj, float_decimals: int) -> str:
    """JSON text with floats at a fixed number of decimals."""
    if isinstance(obj, float):
        return f"{obj:.{float_decimals}f}"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, str)):
        return json.dumps(obj)
    if isinstance(obj, dict):
        items = ", ".join(
            f"{json.dumps(str(k))}: {_render_json(v, float_decimals)}" for k, v in obj.items()
        )
        return "{" + items + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_render_json(v, float_decimals) for v in obj) + "]"
    raise TypeError(f"cannot render {type(obj)!r}")


def render_report(report: EvalReport) -> str:
    """Canonical report document for one protocol, 4-decimal fixed floats."""
    if report.protocol == "mapped":
        doc = {
            "protocol": "mapped",
            "ap_all": report.ap_all,
            "ap_r": report.ap_r,
            "ap_c": report.ap_c,
            "ap_f": report.ap_f,
            "iou_grid": list(report.iou_grid or ()),
            "ap_per_category": {
                str(cid): report.ap_per_category[cid]
                for cid in sorted(report.ap_per_category or {})
            },
        }
    else:
        doc = {
            "protocol": "meteor",
            "map_densecap": report.map_densecap,
            "iou_grid": list(report.iou_grid or ()),
            "meteor_grid": list(report.meteor_grid or ()),
            "grid_ap": [list(row) for row in (report.grid_ap or ())],
        }
    return _render_json(doc, 4) + "\n"


def _write_output(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _load_config(path: str | None) -> EvalConfig:
    if path is None:
        return EvalConfig()
    with open(path, "r", encoding="utf-8") as fh:
        return EvalConfig.from_dict(json.load(fh))


def _cmd_evaluate(args) -> int:
    config = _load_config(args.config)
    dets = fileio.load_detections(args.det)
    if args.protocol == "mapped":
        if not args.taxonomy or not args.emb:
            print("error: --protocol mapped requires --taxonomy and --emb", file=sys.stderr)
            return 2
        taxonomy, annotations = fileio.load_dataset(args.taxonomy, args.gt)
        table = fileio.load_embeddings(args.emb)
        mapped = mapping.map_detections(dets, taxonomy, table, config)
        report = evaluate_fixed_ap(mapped, annotations, taxonomy, config, threads=args.threads)
    else:
        _, annotations = fileio.load_ground_truth(args.gt)
        report = evaluate_densecap(dets, annotations, config, threads=args.threads)
    _write_output(render_report(report), args.out)
    return 0


def _cmd_map_labels(args) -> int:
    config = _load_config(args.config)
    dets = fileio.load_detections(args.det)
    taxonomy = fileio.load_taxonomy(args.taxonomy)
    table = fileio.load_embeddings(args.emb)
    mapped = mapping.map_detections(dets, taxonomy, table, config)
    lines = [
        json.dumps(mapping.mapped_detection_to_record(m), separators=(",", ":"))
        for m in mapped
    ]
    _write_output("".join(line + "\n" for line in lines), args.out)
    return 0


def _cmd_merge_pseudo(args) -> int:
    initial = [
        dataclasses.replace(d, source="initial") if d.source != "initial" else d
        for d in fileio.load_detections(args.initial)
    ]
    supplemental = [
        dataclasses.replace(d, source="supplemental") if d.source != "supplemental" else d
        for d in fileio.load_detections(args.supplemental)
    ]
    merged = pseudo.merge_labels(
        initial, supplemental, conf_threshold=args.conf_threshold,
        nms_threshold=args.nms_threshold,
    )
    lines = [json.dumps(fileio.detection_to_record(d), separators=(",", ":")) for d in merged]
    _write_output("".join(line + "\n" for line in lines), args.out)
    return 0


def _cmd_nms(args) -> int:
    dets = fileio.load_detections(args.det)
    kept = nms(dets, args.threshold)
    lines = [json.dumps(fileio.detection_to_record(d), separators=(",", ":")) for d in kept]
    _write_output("".join(line + "\n" for line in lines), args.out)
    return 0


def _cmd_losses(args) -> int:
    with open(args.fixture, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    image_size = tuple(doc.get("image_size", (1.0, 1.0)))
    preds = doc.get("predictions", [])
    pred_boxes = [BoundingBox(*p["box"]) for p in preds]
    pred_probs = [float(p["fg_prob"]) for p in preds]
    gt_boxes = [BoundingBox(*b) for b in doc.get("ground_truth", [])]
    weights = tuple(doc.get("match_weights", DEFAULT_WEIGHTS))
    if gt_boxes:
        costs = build_cost_matrix(pred_boxes, pred_probs, gt_boxes, weights, image_size)
        assignment = solve_assignment(costs)
    else:
        assignment = Assignment(pairs=(), total_cost=0.0)
    l_bce, l_l1, l_giou = losses.detection_losses(
        assignment, pred_boxes, pred_probs, gt_boxes, image_size
    )
    l_align = 0.0
    if "alignment" in doc:
        l_align = losses.align_loss(
            losses.AlignmentScores(
                scores=doc["alignment"]["scores"],
                positives=tuple(doc["alignment"]["positives"]),
            )
        )
    l_lm = 0.0
    if "language_model" in doc:
        l_lm = losses.lm_loss(
            [
                losses.TokenDistributionSequence(
                    steps=seq["steps"], targets=tuple(seq["targets"])
                )
                for seq in doc["language_model"]
            ]
        )
    loss_weights = tuple(doc.get("loss_weights", (1.0, 1.0, 1.0, 1.0, 1.0)))
    breakdown = losses.total_loss((l_bce, l_l1, l_giou, l_lm, l_align), loss_weights)
    out_doc = {
        "l_bce": breakdown.l_bce,
        "l_l1": breakdown.l_l1,
        "l_giou": breakdown.l_giou,
        "l_lm": breakdown.l_lm,
        "l_align": breakdown.l_align,
        "weights": list(breakdown.weights),
        "total": breakdown.total,
    }
    _write_output(_render_json(out_doc, 4) + "\n", args.out)
    return 0


def _cmd_meteor(args) -> int:
    params = MeteorParams(gamma=args.gamma, beta=args.beta, stemming=args.stem)
    score = meteor(args.candidate, args.reference, params)
    _write_output(f"{score:.6f}\n", args.out)
    return 0


def _cmd_beam_demo(args) -> int:
    with open(args.model, "r", encoding="utf-8") as fh:
        model = beam.TabularModel.from_document(json.load(fh))
    result = beam.decode(
        model, beam_size=args.beam_size, max_len=args.max_len,
        length_penalty=args.length_penalty,
    )
    doc = {
        "sequences": [
            {"tokens": list(seq), "logprob": logprob} for seq, logprob in result.sequences
        ]
    }
    _write_output(_render_json(doc, 6) + "\n", args.out)
    return 0


def _cmd_validate(args) -> int:
    if not any((args.taxonomy, args.gt, args.det, args.emb)):
        print("error: validate requires at least one input file", file=sys.stderr)
        return 2
    summary: dict = {}
    taxonomy = None
    if args.taxonomy:
        taxonomy = fileio.load_taxonomy(args.taxonomy)
        summary["taxonomy"] = {"categories": len(taxonomy)}
    if args.gt:
        if taxonomy is not None:
            _, annotations = fileio.load_dataset(args.taxonomy, args.gt)
        else:
            _, annotations = fileio.load_ground_truth(args.gt)
        summary["ground_truth"] = {"annotations": len(annotations)}
    if args.det:
        dets = fileio.load_detections(args.det)
        summary["detections"] = {"records": len(dets)}
    if args.emb:
        table = fileio.load_embeddings(args.emb)
        summary["embeddings"] = {"entries": len(table), "dim": table.dim}
    summary["status"] = "ok"
    _write_output(_render_json(summary, 4) + "\n", args.out)
    return 0


def _cmd_synth(args) -> int:
    fixture = synth.generate(
        scene_count=args.scenes,
        categories_per_bucket=args.categories_per_bucket,
        synonyms_per_category=args.synonyms,
        box_jitter=args.box_jitter,
        label_noise=args.label_noise,
        seed=args.seed,
        boxes_per_scene=args.boxes_per_scene,
    )
    paths = synth.write_fixture(fixture, args.out_dir)
    _write_output(_render_json(paths, 4) + "\n", args.out)
    return 0


class _HelpFormatter(argparse.ArgumentDefaultsHelpFormatter):
    """Append '(default: ...)' only where a meaningful default exists."""

    def _get_help_string(self, action):
        if action.required or action.default in (None, argparse.SUPPRESS):
            return action.help
        return super()._get_help_string(action)


def _parser(sub, name, help_text):
    return sub.add_parser(name, help=help_text, formatter_class=_HelpFormatter)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="freedet",
        description="Evaluate free-form-label object detection outputs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = _parser(sub, "evaluate", "run one evaluation protocol over detection files")
    p.add_argument("--protocol", choices=("mapped", "meteor"), required=True,
                   help="mapped: taxonomy fixed AP; meteor: dense-caption grid mAP")
    p.add_argument("--gt", required=True, help="ground truth JSON document")
    p.add_argument("--det", required=True, help="detections JSONL file")
    p.add_argument("--taxonomy", help="taxonomy JSON document (mapped protocol)")
    p.add_argument("--emb", help="embedding table JSONL file (mapped protocol)")
    p.add_argument("--config", help="EvalConfig JSON document overriding defaults")
    p.add_argument("--threads", type=int, default=default_threads(),
                   help="worker threads; the report is identical for any value")
    p.add_argument("--out", help="output path (default: stdout)")
    p.set_defaults(func=_cmd_evaluate)

    p = _parser(sub, "map-labels", "map free-form labels onto a taxonomy")
    p.add_argument("--det", required=True, help="detections JSONL file")
    p.add_argument("--taxonomy", required=True, help="taxonomy JSON document")
    p.add_argument("--emb", required=True, help="embedding table JSONL file")
    p.add_argument("--config", help="EvalConfig JSON document overriding defaults")
    p.add_argument("--out", help="output path (default: stdout)")
    p.set_defaults(func=_cmd_map_labels)

    p = _parser(sub, "merge-pseudo", "merge supplemental pseudo-labels into initial ones")
    p.add_argument("--initial", required=True, help="authoritative detections JSONL file")
    p.add_argument("--supplemental", required=True, help="supplemental detections JSONL file")
    p.add_argument("--conf-threshold", type=float, default=0.5,
                   help="keep supplemental detections with score strictly above this")
    p.add_argument("--nms-threshold", type=float, default=0.5,
                   help="IoU above this suppresses a supplemental detection")
    p.add_argument("--out", help="output path (default: stdout)")
    p.set_defaults(func=_cmd_merge_pseudo)

    p = _parser(sub, "nms", "class-agnostic non-maximum suppression per image")
    p.add_argument("--det", required=True, help="detections JSONL file")
    p.add_argument("--threshold", type=float, default=0.5,
                   help="IoU above this suppresses the lower-scored box")
    p.add_argument("--out", help="output path (default: stdout)")
    p.set_defaults(func=_cmd_nms)

    p = _parser(sub, "losses", "compute the reference loss breakdown for a fixture")
    p.add_argument("--fixture", required=True,
                   help="JSON document with predictions, ground truth, scores, distributions")
    p.add_argument("--out", help="output path (default: stdout)")
    p.set_defaults(func=_cmd_losses)

    p = _parser(sub, "meteor", "METEOR similarity of two strings")
    p.add_argument("candidate")
    p.add_argument("reference")
    p.add_argument("--gamma", type=float, default=0.5,
                   help="fragmentation penalty weight")
    p.add_argument("--beta", type=float, default=3.0,
                   help="fragmentation penalty exponent")
    p.add_argument("--stem", action="store_true", help="enable the Porter stemming stage")
    p.add_argument("--out", help="output path (default: stdout)")
    p.set_defaults(func=_cmd_meteor)

    p = _parser(sub, "beam-demo", "run beam search over a tabular model fixture")
    p.add_argument("--model", required=True, help="JSON document mapping prefixes to probabilities")
    p.add_argument("--beam-size", type=int, default=3, help="beam width")
    p.add_argument("--max-len", type=int, default=8,
                   help="maximum sequence length")
    p.add_argument("--length-penalty", type=float, default=0.0,
                   help="final-ranking length penalty exponent")
    p.add_argument("--out", help="output path (default: stdout)")
    p.set_defaults(func=_cmd_beam_demo)

    p = _parser(sub, "validate", "load and validate input files")
    p.add_argument("--taxonomy", help="taxonomy JSON document")
    p.add_argument("--gt", help="ground truth JSON document")
    p.add_argument("--det", help="detections JSONL file")
    p.add_argument("--emb", help="embedding table JSONL file")
    p.add_argument("--out", help="output path (default: stdout)")
    p.set_defaults(func=_cmd_validate)

    p = _parser(sub, "synth", "generate a deterministic synthetic fixture set")
    p.add_argument("--out-dir", required=True, help="directory for the fixture files")
    p.add_argument("--scenes", type=int, default=100, help="scene count")
    p.add_argument("--categories-per-bucket", type=int, default=5,
                   help="categories per frequency bucket")
    p.add_argument("--synonyms", type=int, default=2,
                   help="synonyms per category")
    p.add_argument("--box-jitter", type=float, default=0.0,
                   help="box perturbation fraction")
    p.add_argument("--label-noise", type=float, default=0.0,
                   help="probability of a wrong-category label")
    p.add_argument("--seed", type=int, default=0, help="RNG seed")
    p.add_argument("--boxes-per-scene", type=int, default=10,
                   help="ground-truth boxes per scene")
    p.add_argument("--out", help="path for the summary document (default: stdout)")
    p.set_defaults(func=_cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ToolkitError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
