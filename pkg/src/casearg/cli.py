"""``casearg`` command line.

Every failure prints one line ``error: <category>: <message>`` on stderr
and exits with the category's code (see ``EXIT_CODES``).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import io as cio
from .aacbr import explain
from .af import to_dot
from .evaluate import TOGGLES, EvaluationError, SearchError, SearchSpace, ablate, evaluate, random_search
from .features import CharacterisationError
from .multiclass import TournamentError, predict_batch, predict_trace, train_tournament
from .reduction import ReductionError
from .synthetic import RULE_PRESETS, RuleError, RuleSet, generate_synthetic

log = logging.getLogger("casearg")

EXIT_CODES = {
    "usage": 2,
    "input": 3,
    "config": 4,
    "bundle": 5,
    "training": 6,
    "evaluation": 7,
    "io": 8,
}
THREADS_ENV = "CASEARG_THREADS"


class CliError(Exception):
    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise CliError("usage", f"{THREADS_ENV}={raw!r} is not an integer") from None


def _read_json(path, category="config"):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise CliError("io", f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise CliError(category, f"{path}: invalid JSON ({exc.msg}, line {exc.lineno})") from None


def _scenes(path, vocabulary=None):
    try:
        return cio.read_scene_file(path, vocabulary)
    except OSError as exc:
        raise CliError("io", f"{path}: {exc.strerror}") from None
    except cio.SceneFormatError as exc:
        raise CliError("input", f"{path}: {exc}") from None


def _bundle(path):
    try:
        return cio.read_bundle(path)
    except OSError as exc:
        raise CliError("io", f"{path}: {exc.strerror}") from None
    except (cio.BundleError, KeyError, TypeError, ValueError) as exc:
        raise CliError("bundle", f"{path}: {exc}") from None


def _config(args):
    if getattr(args, "preset", None):
        return cio.load_preset(args.preset), None
    if not args.config:
        raise CliError("usage", "--config or --preset is required")
    try:
        return cio.config_from_dict(_read_json(args.config))
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError("config", f"{args.config}: {exc}") from None


def _write(out, text: str) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError("io", f"{out}: {exc.strerror}") from None


def _seeds(raw: str) -> list[int]:
    try:
        if "," in raw:
            return [int(s) for s in raw.split(",") if s.strip()]
        return list(range(int(raw)))
    except ValueError:
        raise CliError("usage", f"--seeds {raw!r}: give a count or a comma list") from None


# --------------------------------------------------------------------------
# subcommands


def cmd_train(args):
    config, vocab = _config(args)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    scenes = _scenes(args.scenes, vocab)
    try:
        t = train_tournament(config, scenes, vocab)
    except (TournamentError, ReductionError, CharacterisationError) as exc:
        raise CliError("training", str(exc)) from None
    try:
        cio.write_bundle(args.out, t)
    except OSError as exc:
        raise CliError("io", f"{args.out}: {exc.strerror}") from None
    log.info("wrote %s (%s)", args.out, ", ".join(str(len(m.casebase)) + " cases" for m in t.models))


def _predict_all(t, scenes, threads):
    try:
        return predict_batch(t, scenes, threads)
    except CharacterisationError as exc:
        raise CliError("input", str(exc)) from None


def cmd_predict(args):
    t = _bundle(args.bundle)
    scenes = _scenes(args.scenes, t.vocabulary)
    labels = _predict_all(t, scenes, args.threads)
    _write(args.out, "".join(
        json.dumps({"image_id": s.image_id, "label": lab}) + "\n" for s, lab in zip(scenes, labels)
    ))


def _pick_scene(scenes, image_id):
    if image_id is not None:
        for s in scenes:
            if s.image_id == image_id:
                return s
        raise CliError("input", f"no scene with image_id {image_id!r}")
    if len(scenes) != 1:
        raise CliError("input", f"expected exactly one scene, found {len(scenes)}; use --image-id")
    return scenes[0]


def _model_title(i, model):
    c = model.config
    return f"model {i + 1} (focus {c.focus} vs {c.opponent}, default {c.default_outcome})"


def cmd_explain(args):
    t = _bundle(args.bundle)
    scene = _pick_scene(_scenes(args.scenes, t.vocabulary), args.image_id)
    try:
        label, trace = predict_trace(t, scene)
    except CharacterisationError as exc:
        raise CliError("input", str(exc)) from None
    parts = []
    for i, pred in trace:
        parts.append(f"== {_model_title(i, t.models[i])} ==\n{explain(pred)}")
        if args.dot_dir:
            path = Path(args.dot_dir) / f"{scene.image_id}_model{i + 1}.dot"
            try:
                path.parent.mkdir(parents=True, exist_ok=True)
                path.write_text(to_dot(pred.framework.display_framework(), pred.grounded,
                                       f"model{i + 1}"), encoding="utf-8")
            except OSError as exc:
                raise CliError("io", f"{path}: {exc.strerror}") from None
    parts.append(f"prediction for {scene.image_id}: class {label}\n")
    _write(args.out, "\n".join(parts))


def cmd_export_af(args):
    t = _bundle(args.bundle)
    scene = _pick_scene(_scenes(args.scenes, t.vocabulary), args.image_id)
    try:
        _, trace = predict_trace(t, scene)
    except CharacterisationError as exc:
        raise CliError("input", str(exc)) from None
    index = len(trace) - 1 if args.model is None else args.model - 1
    if not 0 <= index < len(t.models):
        raise CliError("usage", f"--model must lie in 1..{len(t.models)}")
    if index < len(trace):
        pred = trace[index][1]
    else:
        pred = t.models[index].predict(scene, t.vocabulary)
    _write(args.out, to_dot(pred.framework.display_framework(), pred.grounded, f"model{index + 1}"))


def cmd_evaluate(args):
    t = _bundle(args.bundle)
    scenes = _scenes(args.scenes, t.vocabulary)
    try:
        m = evaluate(t, scenes, args.threads)
    except EvaluationError as exc:
        raise CliError("evaluation", str(exc)) from None
    except CharacterisationError as exc:
        raise CliError("input", str(exc)) from None
    _write(args.out, json.dumps(m.as_dict()) + "\n" if args.json else m.table())


def cmd_tune(args):
    vocab = None
    if args.space:
        raw = _read_json(args.space)
        vocab = cio.vocabulary_from_dict(raw.pop("vocabulary", None))
    train = _scenes(args.scenes, vocab)
    validation = _scenes(args.validation, vocab)
    try:
        if args.space:
            space = SearchSpace.from_dict(raw)
        else:
            space = SearchSpace(tuple(sorted({s.class_label for s in train}, key=str)))
    except (EvaluationError, TypeError, ValueError) as exc:
        raise CliError("config", str(exc)) from None
    try:
        result = random_search(space, args.budget, args.seed or 0, train, validation, vocab, args.threads)
    except (EvaluationError, SearchError) as exc:
        raise CliError("evaluation", str(exc)) from None
    if args.log:
        _write(args.log, "".join(json.dumps(t.as_dict()) + "\n" for t in result.trials))
    out = cio.config_to_dict(result.config, vocab)
    _write(args.out, json.dumps(out, indent=2) + "\n")
    log.info("best validation: %s", result.metrics.as_dict())


def cmd_ablate(args):
    config, vocab = _config(args)
    train = _scenes(args.scenes, vocab)
    test = _scenes(args.test, vocab)
    try:
        report = ablate(config, args.toggle or (), train, test, _seeds(args.seeds), vocab, args.threads)
    except (EvaluationError, TournamentError, ReductionError) as exc:
        raise CliError("evaluation", str(exc)) from None
    _write(args.out, json.dumps(report.as_dict()) + "\n" if args.json else report.table())


def cmd_generate(args):
    if args.rules:
        try:
            rules = RuleSet.from_dict(_read_json(args.rules))
        except (KeyError, TypeError, ValueError) as exc:
            raise CliError("config", f"{args.rules}: {exc}") from None
    else:
        rules = RULE_PRESETS[args.preset or "hans3"]()
    try:
        scenes = generate_synthetic(rules, args.per_class, args.noise, args.seed or 0,
                                    args.confound, args.id_prefix)
    except RuleError as exc:
        raise CliError("config", str(exc)) from None
    _write(args.out, cio.emit_scenes(scenes))


# --------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="casearg", description="Argumentation-based scene classification.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="progress (-v) or debug (-vv)")
    p.add_argument("-q", "--quiet", action="store_true", help="results only")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, scenes=True, bundle=False, config=False, threads=False):
        if scenes:
            sp.add_argument("--scenes", required=True, help="line-delimited JSON scene file")
        if bundle:
            sp.add_argument("--bundle", required=True)
        if config:
            sp.add_argument("--config", help="tournament config JSON")
            sp.add_argument("--preset", choices=cio.PRESETS)
        if threads:
            sp.add_argument("--threads", type=int, default=None,
                            help=f"worker threads (default ${THREADS_ENV} or 1)")
        sp.add_argument("--out", default=None, help="output path (default stdout)")
        sp.add_argument("--seed", type=int, default=None)

    sp = sub.add_parser("train", help="scenes + config -> bundle")
    common(sp, config=True)
    sp.set_defaults(func=cmd_train, out_required=True)

    sp = sub.add_parser("predict", help="bundle + scenes -> labels (JSON lines)")
    common(sp, bundle=True, threads=True)
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("explain", help="bundle + one scene -> narrative")
    common(sp, bundle=True)
    sp.add_argument("--image-id")
    sp.add_argument("--dot-dir", help="also write one DOT file per consulted model here")
    sp.set_defaults(func=cmd_explain)

    sp = sub.add_parser("export-af", help="bundle + scene -> DOT")
    common(sp, bundle=True)
    sp.add_argument("--image-id")
    sp.add_argument("--model", type=int, help="1-based model index (default: the deciding model)")
    sp.set_defaults(func=cmd_export_af)

    sp = sub.add_parser("evaluate", help="bundle + labelled scenes -> metrics")
    common(sp, bundle=True, threads=True)
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("tune", help="random search over a space -> best config")
    common(sp, threads=True)
    sp.add_argument("--validation", required=True)
    sp.add_argument("--space", help="search space JSON (default: built-in candidates)")
    sp.add_argument("--budget", type=int, default=100)
    sp.add_argument("--log", help="trial log output (JSON lines)")
    sp.set_defaults(func=cmd_tune)

    sp = sub.add_parser("ablate", help="config + toggles + seeds -> ablation table")
    common(sp, config=True, threads=True)
    sp.add_argument("--test", required=True)
    sp.add_argument("--toggle", action="append", choices=TOGGLES)
    sp.add_argument("--seeds", default="5", help="seed count or comma list (default 5)")
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_ablate)

    sp = sub.add_parser("generate", help="rules + counts -> synthetic scenes")
    common(sp, scenes=False)
    sp.add_argument("--rules", help="rule-set JSON")
    sp.add_argument("--preset", choices=sorted(RULE_PRESETS))
    sp.add_argument("--per-class", type=int, required=True)
    sp.add_argument("--noise", type=float, default=0.0)
    sp.add_argument("--confound", action="store_true")
    sp.add_argument("--id-prefix", default="s")
    sp.set_defaults(func=cmd_generate)
    return p


def _setup_logging(args) -> None:
    level = logging.WARNING
    if args.verbose == 1:
        level = logging.INFO
    elif args.verbose >= 2:
        level = logging.DEBUG
    if args.quiet:
        level = logging.ERROR
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        _setup_logging(args)
        if getattr(args, "out_required", False) and not args.out:
            raise CliError("usage", "--out is required")
        if hasattr(args, "threads") and args.threads is None:
            args.threads = _default_threads()
        if hasattr(args, "threads") and args.threads < 1:
            raise CliError("usage", "--threads must be >= 1")
        args.func(args)
    except CliError as exc:
        msg = " ".join(str(exc).split())
        print(f"error: {exc.category}: {msg}", file=sys.stderr)
        return EXIT_CODES[exc.category]
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
