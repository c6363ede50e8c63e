"""``rfmrank`` command line: synth, sample, reference, train, search, eval.

Exit status: 0 success, 2 configuration error, 3 data integrity error,
4 numeric failure marked fatal by ``trainer.fatal_flags``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from pathlib import Path

from . import kernels
from .config import load_config
from .errors import (ConfigError, ContractViolation, FormatError, IntegrityError,
                     ModelVersionError, NumericError)
from .reference import best_by_reference, build_reference
from .rfm import load_model, model_to_text
from .samplers import REF, backbone_for, manifest_to_text, read_manifest, select
from .search import (Evaluator, Experiment, FeatureCache, build_sample, format_n, search,
                     truncated_selection)
from .synth import generate, split
from .trainer import train
from .treebank import corpus_to_text, read_corpus

log = logging.getLogger("rfmrank")

EXIT_OK, EXIT_CONFIG, EXIT_INTEGRITY, EXIT_NUMERIC = 0, 2, 3, 4


# -- helpers -------------------------------------------------------------------

def _need(cfg, key):
    v = cfg.get(key)
    if v is None:
        raise ConfigError(f"{key} must be set")
    return v


def _input(cfg, key):
    p = _need(cfg, key)
    if not p.is_file():
        raise ConfigError(f"{key}: no such file {p}")
    return p


def _output(cfg, key, required=True):
    p = cfg.get(key)
    if p is None:
        if required:
            raise ConfigError(f"{key} must be set")
        return None
    parent = p.parent if str(p.parent) else Path(".")
    if not parent.is_dir():
        raise ConfigError(f"{key}: directory {parent} does not exist")
    return p


def _write(path, text):
    """Replace ``path`` atomically so no partial file survives a crash."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(path, text):
    if path is None:
        sys.stdout.write(text)
    else:
        _write(path, text)


def _check_fatal(cfg, trace):
    mode = cfg["trainer.fatal_flags"]
    bad = []
    if mode in ("unconverged", "any") and trace.unconverged:
        bad.append(f"{len(trace.unconverged)} features failed Newton convergence")
    if mode in ("frozen", "any") and trace.frozen:
        bad.append(f"{len(trace.frozen)} features frozen at the weight floor")
    if bad:
        raise NumericError("; ".join(bad))


def _selection(cfg, corpus):
    manifest = cfg.get("sampler.manifest")
    if manifest is not None:
        sel = read_manifest(manifest)
        missing = [sid for sid in sel if sid not in corpus]
        if missing:
            raise IntegrityError(f"manifest names unknown sentence {missing[0]!r}")
        for sid, idxs in sel.items():
            if not idxs or any(not 0 <= k < len(corpus[sid].candidates) for k in idxs):
                raise IntegrityError(f"manifest has bad candidate indices for {sid!r}")
        return sel
    scfg = cfg.sampler()
    if scfg.strategy == REF:
        full = build_reference(corpus, truncated_selection(corpus, None), cfg.metric(),
                               cfg["reference.epsilon"])
        return select(corpus, scfg, ref=full)
    return select(corpus, scfg, backbone=backbone_for(corpus) if scfg.strategy == "pcfg" else None)


# -- commands ----------------------------------------------------------------------

def cmd_synth(cfg, args):
    spec = cfg.synth()
    out = _output(cfg, "output.corpus")
    frac = cfg["synth.heldout_fraction"]
    held_out = _output(cfg, "output.heldout", required=frac > 0)
    if not 0 <= frac < 1:
        raise ConfigError("synth.heldout_fraction must lie in [0, 1)")
    corpus, _ = generate(spec)
    if frac > 0:
        corpus, held = split(corpus, frac)
        _write(held_out, corpus_to_text(held))
    _write(out, corpus_to_text(corpus))
    log.info("wrote %d sentences to %s", len(corpus), out)


def cmd_sample(cfg, args):
    src = _input(cfg, "corpus.train")
    out = _output(cfg, "output.manifest", required=False)
    cfg.sampler()
    corpus = read_corpus(src)
    _emit(out, manifest_to_text(_selection(cfg, corpus)))


def cmd_reference(cfg, args):
    src = _input(cfg, "corpus.train")
    out = _output(cfg, "output.reference", required=False)
    w = cfg.metric()
    corpus = read_corpus(src)
    ref = build_reference(corpus, _selection(cfg, corpus), w, cfg["reference.epsilon"])
    _emit(out, ref.to_text())


def _prepare_training(cfg, corpus):
    cache = FeatureCache(cfg.templates(), cfg.pp_predicate())
    return build_sample(corpus, _selection(cfg, corpus), cache, cfg["features.min_count"],
                        cfg.metric(), cfg["reference.epsilon"])


def cmd_train(cfg, args):
    src = _input(cfg, "corpus.train")
    out = _output(cfg, "output.model")
    trace_out = _output(cfg, "output.trace", required=False)
    tcfg = cfg.trainer(args.threads)
    cfg.sampler()
    corpus = read_corpus(src)
    sample, table = _prepare_training(cfg, corpus)
    model, trace = train(sample, table, tcfg, cfg.templates())
    _check_fatal(cfg, trace)
    _write(out, model_to_text(model))
    if trace_out is not None:
        _write(trace_out, trace.to_csv())
    last = trace.records[-1]
    log.info("%d parses, %d features, %d iterations, loglik %.6f", len(sample), len(table),
             last.iteration, last.loglik)


def cmd_search(cfg, args):
    train_p = _input(cfg, "corpus.train")
    held_p = _input(cfg, "corpus.heldout")
    results = _output(cfg, "output.results")
    model_out = _output(cfg, "output.model", required=False)
    tcfg = cfg.trainer(args.threads)
    schedule = cfg.schedule()
    strategy = cfg.sampler()
    weights = cfg.metric()
    corpus, held = read_corpus(train_p), read_corpus(held_p)
    exp = Experiment(corpus, held, templates=cfg.templates(), is_pp=cfg.pp_predicate(),
                     min_count=cfg["features.min_count"], weights=weights,
                     epsilon=cfg["reference.epsilon"], trainer=tcfg,
                     eval_every=cfg["search.eval_every"],
                     heldout_max_parses=cfg["eval.max_parses"])
    result = search(corpus, held, strategy, schedule, tcfg, weights, runs=cfg["sampler.runs"],
                    experiment=exp)
    _write(results, result.to_csv())
    if model_out is not None:
        _write(model_out, model_to_text(result.model))
    log.info("chosen n = %s", format_n(result.chosen_n))


def cmd_eval(cfg, args):
    model_p = _input(cfg, "model.path")
    test_p = _input(cfg, "corpus.test")
    verdict_out = _output(cfg, "output.verdicts", required=False)
    w = cfg.metric()
    model = load_model(model_p)
    if model.templates != cfg.templates():
        raise ModelVersionError(
            f"model was trained with templates {','.join(sorted(model.templates))} but the "
            f"configuration extracts {','.join(sorted(cfg.templates()))}"
        )
    corpus = read_corpus(test_p)
    max_parses = cfg["eval.max_parses"]
    # the target is the reference-best among all candidates, scored or not
    ref = build_reference(corpus, truncated_selection(corpus, None), w, cfg["reference.epsilon"])
    ev = Evaluator(corpus, ref, max_parses, FeatureCache(cfg.templates(), cfg.pp_predicate()))
    predicted = ev.predictions(model) if len(corpus) else []
    lines = []
    hits = 0
    for rec, k in zip(corpus, predicted):
        want = best_by_reference(ref, rec.id)
        hits += int(k) == want
        lines.append(f"{rec.id}\t{int(k)}\t{want}\t{int(int(k) == want)}")
    acc = 100.0 * hits / len(corpus) if len(corpus) else 0.0
    lines.insert(0, f"accuracy\t{acc:.6f}")
    text = "\n".join(lines) + "\n"
    _emit(verdict_out, text)
    if verdict_out is not None:
        print(f"accuracy\t{acc:.6f}")


COMMANDS = {
    "synth": (cmd_synth, "generate a seeded synthetic corpus"),
    "sample": (cmd_sample, "write a per-sentence sample manifest"),
    "reference": (cmd_reference, "dump the reference distribution of a sample"),
    "train": (cmd_train, "estimate a model by iterative scaling"),
    "search": (cmd_search, "search for the informative sample size"),
    "eval": (cmd_eval, "exact-match accuracy of a model on a test corpus"),
}

# convenience flags: (flag, config key, help)
FLAGS = {
    "synth": [("--out", "output.corpus", "corpus file to write"),
              ("--heldout-out", "output.heldout", "held-out corpus file to write"),
              ("--heldout-fraction", "synth.heldout_fraction", "tail fraction held out"),
              ("--sentences", "synth.sentences", None), ("--seed", "synth.seed", None),
              ("--noise", "synth.noise", None), ("--candidates", "synth.candidates", "lo,hi"),
              ("--tokens", "synth.tokens", "lo,hi")],
    "sample": [("--train", "corpus.train", None), ("--out", "output.manifest", None),
               ("--strategy", "sampler.strategy", None), ("--n", "sampler.n", None),
               ("--seed", "sampler.seed", None)],
    "reference": [("--train", "corpus.train", None), ("--out", "output.reference", None),
                  ("--manifest", "sampler.manifest", "use this sample instead of sampling")],
    "train": [("--train", "corpus.train", None), ("--model-out", "output.model", None),
              ("--trace-out", "output.trace", None), ("--manifest", "sampler.manifest", None),
              ("--iterations", "trainer.iterations", None), ("--sigma2", "trainer.sigma2", None)],
    "search": [("--train", "corpus.train", None), ("--heldout", "corpus.heldout", None),
               ("--results-out", "output.results", None), ("--model-out", "output.model", None),
               ("--schedule", "search.schedule", "comma list, e.g. 1,2,3,all")],
    "eval": [("--model", "model.path", None), ("--test", "corpus.test", None),
             ("--max-parses", "eval.max_parses", "candidates scored per sentence (default 100)"),
             ("--out", "output.verdicts", None)],
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="key = value configuration file")
    common.add_argument("-s", "--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration key (repeatable)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for kernels")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="rfmrank", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, parents=[common], help=help_text)
        for flag, key, h in FLAGS.get(name, ()):
            sp.add_argument(flag, dest="flag:" + key, metavar="VALUE", help=h or key)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    overrides = list(args.set)
    for dest, value in vars(args).items():
        if dest.startswith("flag:") and value is not None:
            overrides.append(f"{dest[5:]}={value}")
    handler = COMMANDS[args.command][0]
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = load_config(args.config, overrides)
        log.debug("kernels: %s", kernels.BACKEND)
        handler(cfg, args)
    except (ConfigError, ContractViolation) as err:
        print(f"rfmrank: config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (FormatError, IntegrityError, ModelVersionError) as err:
        print(f"rfmrank: data error: {err}", file=sys.stderr)
        return EXIT_INTEGRITY
    except NumericError as err:
        print(f"rfmrank: numeric failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
