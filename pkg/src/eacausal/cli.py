"""``eacausal`` command line.

Every subcommand prints an aligned text table, or JSON with ``--json``.
The resolved configuration is logged to stderr. Exit codes: 0 success,
1 validation or check failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import confound, corpus as cio, pipeline as ea, sem as sm
from .info import DistributionError, mutual_information
from .seqmodels import (GENERATE, Basis, NgramSeq2Seq, Provenance, SystemKind,
                        evaluate_faithfulness, log_likelihood, make_input, train_ngram)
from .textmetrics import meteor_lite, perspective, rouge_l, rouge_n

log = logging.getLogger("eacausal")
LN2 = math.log(2.0)


class UsageError(Exception):
    pass


# --- plumbing -------------------------------------------------------------

def _threads(args) -> int:
    n = args.threads
    if n is None:
        env = os.environ.get("EACL_THREADS", "").strip()
        if not env:
            return 1
        try:
            n = int(env)
        except ValueError:
            raise UsageError(f"EACL_THREADS={env!r} is not an integer") from None
    if n < 1:
        raise UsageError("thread count must be >= 1")
    return n


def pmap(fn, items, threads: int) -> list:
    """Order-preserving map; results never depend on the thread count."""
    items = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "+inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return f"{v:.6f}" if math.isfinite(v) else ("nan" if math.isnan(v) else str(v))
    return str(v)


def table(rows, headers) -> str:
    cells = [[str(h) for h in headers]] + [[_fmt(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = ["  ".join(c.rjust(w) if j else c.ljust(w) for j, (c, w) in enumerate(zip(r, widths)))
             for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def emit(args, payload: dict, text: str) -> None:
    if args.json:
        print(json.dumps(_jsonable(payload), sort_keys=True, indent=2, allow_nan=False))
    else:
        print(text)


def _log_config(args) -> None:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    cfg["threads_resolved"] = _threads(args)
    log.info("config %s", json.dumps(cfg, sort_keys=True, default=str))


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"{what} must be a comma-separated list of numbers") from None


def _ints(text: str, what: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"{what} must be a comma-separated list of integers") from None


def _detok(seq) -> str:
    return " ".join(seq.tokens)


def _sem_from_args(args) -> sm.Sem:
    if args.sem:
        return sm.load_sem(args.sem)
    return sm.example_sem(args.example, args.n, args.vocab, args.sem_seed, args.n_docs,
                          not args.collisions)


def _add_sem_source(p, required=True):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--sem", help="SEM JSON file")
    g.add_argument("--example", choices=[k.value for k in sm.ExampleKind],
                   help="one of the built-in worked examples")
    p.add_argument("--n", type=int, default=4, help="sentences per document (default 4)")
    p.add_argument("--vocab", type=int, default=None,
                   help="sentence-symbol vocabulary (default: equal to --n)")
    p.add_argument("--sem-seed", type=int, default=0, help="seed of the example documents")
    p.add_argument("--n-docs", type=int, default=16, help="documents in the support of p(x)")
    p.add_argument("--collisions", action="store_true",
                   help="draw sentence symbols with replacement")


# --- verify-theorems ------------------------------------------------------

FLOW_SETS = ((sm.Q,), (sm.Q, sm.X), (sm.Q, sm.XR), (sm.Q, sm.X, sm.XR))


def check_sem(sem: sm.Sem) -> dict:
    """Residuals of every identity the engine promises for one SEM."""
    rep = sm.causal_effect_irrelevant(sem)
    joint = sm.build_joint(sem)
    flow_mi = max(abs(sm.information_flow(sem, s, joint=joint)
                      - mutual_information(joint, s, sm.Y)) for s in FLOW_SETS)
    res = rep.residuals()
    res["ce_vs_cmi"] = abs(rep.ce_entropy - sm.ce_conditional_mi(sem))
    res["flow_vs_mi"] = flow_mi
    return res


def _seed_for(seed: int, i: int) -> int:
    return int(np.random.SeedSequence([seed, i]).generate_state(1)[0])


def cmd_verify_theorems(args) -> int:
    threads = _threads(args)
    scale = 1 / LN2 if args.bits else 1.0
    if args.sem:
        sems = [(0, sm.load_sem(args.sem))]
    else:
        if args.n_sems < 0:
            raise UsageError("--n-sems must be >= 0")
        if args.max_card < 1:
            raise UsageError("--max-card must be >= 1")
        sems = []
        for i in range(args.n_sems):
            s = _seed_for(args.seed, i)
            cards = np.random.default_rng(s).integers(1, args.max_card + 1, size=4)
            sems.append((i, (cards.tolist(), s)))

    def run(item):
        i, job = item
        try:
            sem = job if isinstance(job, sm.Sem) else sm.random_sem(job[0],
                                                                    args.concentration, job[1])
            return i, check_sem(sem), None
        except DistributionError as exc:
            return i, None, f"skip: {exc}"
        except ArithmeticError as exc:
            return i, None, f"violation: {exc}"

    results = pmap(run, sems, threads)
    names = ("flow_vs_entropy", "risk_gap", "ce_vs_cmi", "flow_vs_mi")
    worst = {k: 0.0 for k in names}
    skipped, violations = [], []
    for i, res, note in results:
        if note and note.startswith("skip"):
            log.warning("SEM %d %s", i, note)
            skipped.append(i)
            continue
        if note:
            violations.append({"sem": i, "reason": note})
            continue
        for k in names:
            worst[k] = max(worst[k], res[k])
            if res[k] > args.tol:
                violations.append({"sem": i, "reason": f"{k} residual {res[k]:.3e}"})
    checked = len(results) - len(skipped)
    if checked == 0:
        log.warning("no SEMs checked; the pass is vacuous")
    ok = not violations
    payload = {"n_sems": len(results), "checked": checked, "skipped": skipped,
               "tolerance": args.tol, "unit": "bits" if args.bits else "nats",
               "max_residual": {k: v * scale for k, v in worst.items()},
               "violations": violations, "ok": ok}
    rows = [[k, worst[k] * scale] for k in names]
    text = (table(rows, ["identity", "max residual"])
            + f"\nchecked {checked}/{len(results)} SEMs, {len(violations)} violations: "
            + ("PASS" if ok else "FAIL"))
    emit(args, payload, text)
    return 0 if ok else 1


# --- ce-exact -------------------------------------------------------------

def cmd_ce_exact(args) -> int:
    sem = _sem_from_args(args)
    rep = sm.causal_effect_irrelevant(sem)
    scale = 1 / LN2 if args.bits else 1.0
    out = rep.as_dict(scale)
    out["ce"] = rep.ce_entropy * scale
    out["residuals"] = rep.residuals()
    out["unit"] = "bits" if args.bits else "nats"
    rows = [[k, out[k]] for k in ("ce", "ce_flow", "ce_entropy", "flow_full",
                                  "flow_relevant", "l_f", "l_g")]
    emit(args, out, table(rows, ["quantity", out["unit"]]))
    return 0


# --- ce-estimate ----------------------------------------------------------

def cmd_ce_estimate(args) -> int:
    data = cio.load_corpus(args.corpus)
    if len(data) < 2:
        raise ValueError("ce-estimate needs at least two examples")
    train, test = cio.split_corpus(data, args.split_seed, args.train_fraction)
    if not train or not test:
        raise ValueError("the split left an empty train or held-out part")
    kw = dict(l2=args.l2, epochs=args.epochs, lr=args.lr, seed=args.hash_seed,
              hash_dim=args.hash_dim)
    c1 = confound.train_classifier(train, False, **kw)
    c2 = confound.train_classifier(train, True, **kw)
    if args.save_classifiers:
        c1.save(args.save_classifiers + ".nosummary.json")
        c2.save(args.save_classifiers + ".summary.json")
    est = confound.estimate_ce(c1, c2, test)
    scale = 1 / LN2 if args.bits else 1.0
    out = est.as_dict(scale)
    if not args.per_example:
        out.pop("per_example")
    out.update(n_train=len(train), n_test=len(test), unit="bits" if args.bits else "nats")
    rows = [[k, out[k]] for k in ("h1", "h2", "ce", "ce_se", "ce_total", "ce_total_se")]
    text = table(rows, ["quantity", out["unit"]])
    text += f"\n{out['n_test']} held-out examples, {out['n_sentences']} sentences"
    emit(args, out, text)
    return 0


# --- synth-corpus ---------------------------------------------------------

def cmd_synth_corpus(args) -> int:
    sem = _sem_from_args(args)
    verb = cio.Verbalizer.for_sem(sem, multi_token=args.multi_token, seed=args.seed)
    data = cio.synthesize_corpus(sem, verb, args.count, args.seed, args.n_answers)
    cio.save_corpus(data, args.out)
    labels = [r for ex in data for r in ex.labels()]
    out = {"out": args.out, "count": len(data), "sentences": len(labels),
           "relevant_rate": sum(labels) / len(labels)}
    emit(args, out, table([[k, out[k]] for k in ("out", "count", "sentences",
                                                  "relevant_rate")], ["field", "value"]))
    return 0


# --- metrics --------------------------------------------------------------

def load_predictions(path) -> list[dict]:
    preds = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if not isinstance(rec, dict) or not isinstance(rec.get("summary"), str):
                raise ValueError(f"{path}:{lineno}: record needs a string 'summary'")
            basis = rec.get("basis")
            if basis is not None and (not isinstance(basis, list)
                                      or not all(isinstance(b, str) for b in basis)):
                raise ValueError(f"{path}:{lineno}: 'basis' must be a list of strings")
            preds.append(rec)
    return preds


METRIC_NAMES = ("rouge1", "rouge2", "rougeL", "meteor", "perspective", "length")


def summary_metrics(pred, example: ea.Example, use_stems: bool = True) -> dict:
    ref = ea.tok(example.summary)
    out = {"rouge1": rouge_n(pred, ref, 1, use_stems).f1,
           "rouge2": rouge_n(pred, ref, 2, use_stems).f1,
           "rougeL": rouge_l(pred, ref, use_stems).f1,
           "meteor": meteor_lite(pred, ref),
           "perspective": math.nan,
           "length": float(len(pred))}
    if example.cluster_summaries:
        out["perspective"] = perspective(pred, [ea.tok(s) for s in example.cluster_summaries],
                                         use_stems)
    return out


def mean_metrics(per_example: list[dict], names=METRIC_NAMES) -> dict:
    out = {}
    for k in names:
        vals = [m[k] for m in per_example if not math.isnan(m[k])]
        out[k] = float(np.mean(vals)) if vals else math.nan
    return out


def cmd_metrics(args) -> int:
    preds = load_predictions(args.pred)
    data = cio.load_corpus(args.corpus)
    if len(preds) != len(data):
        raise ValueError(f"{len(preds)} predictions for {len(data)} examples")
    use_stems = not args.no_stem
    per = pmap(lambda pe: summary_metrics(ea.tok(pe[0]["summary"]), pe[1], use_stems),
               zip(preds, data), _threads(args))
    out = mean_metrics(per)
    out["n"] = len(data)
    emit(args, out, table([[k, out[k]] for k in METRIC_NAMES], ["metric", "mean"])
         + f"\n{len(data)} examples")
    return 0


# --- train-eval -----------------------------------------------------------

MODES = ("direct", "sure", "oracle", "pipeline")


def _require_labels(data, what):
    for i, ex in enumerate(data):
        if not ex.has_labels:
            raise ea.LabelError(f"{what} example {i} has no relevance labels")


def train_models(mode: str, train, seed: int, args):
    """Fit the models one mode needs; returns (extractor-or-model, generator)."""
    hp = dict(order=args.order, alpha=args.alpha, copy_weight=args.copy_weight)
    if mode == "direct":
        return train_ngram([ea.direct_pair(e) for e in train], epochs=args.epochs, **hp), None
    if mode == "oracle":
        return train_ngram([ea.generation_pair(e, None) for e in train],
                           epochs=args.epochs, **hp), None
    if mode == "sure":
        model = NgramSeq2Seq(**hp)
        for ep in range(args.epochs):
            model.update(ea.multitask_pairs(train, seed, ep))
        return model, None
    extractor = NgramSeq2Seq(**hp)
    for ep in range(args.epochs):
        extractor.update([ea.extraction_pair(e, ea.sample_answer(e, (seed, ep, i)))
                          for i, e in enumerate(train)])
    generator = train_ngram([ea.generation_pair(e) for e in train], epochs=args.epochs, **hp)
    return extractor, generator


def train_nll(mode: str, models, train, seed: int) -> float:
    """Mean training loss: multitask loss for sure, pair NLL otherwise."""
    model, generator = models
    if mode == "direct":
        pairs = [(model, *ea.direct_pair(e)) for e in train]
    elif mode == "oracle":
        pairs = [(model, *ea.generation_pair(e, None)) for e in train]
    elif mode == "sure":
        return float(np.mean([ea.multitask_loss(model, e, ea.sample_answer(e, (seed, 0, i)))
                              for i, e in enumerate(train)]))
    else:
        pairs = []
        for i, e in enumerate(train):
            pairs.append((model, *ea.extraction_pair(e, ea.sample_answer(e, (seed, 0, i)))))
            pairs.append((generator, *ea.generation_pair(e)))
    return float(np.mean([-log_likelihood(m, s, t) for m, s, t in pairs]))


def eval_example(mode: str, models, verifier, ex: ea.Example, args) -> dict:
    model, generator = models
    q = ea.tok(ex.question)
    ref = ea.tok(ex.summary)
    if mode == "direct":
        src = ea.direct_pair(ex)[0]
        summary = model.generate(src, args.max_len)
        ll = log_likelihood(model, src, ref)
        basis_sents = ex.sentences()
        basis = Basis(ea.concat(basis_sents), Provenance.FULL_INPUT)
        system = SystemKind.DIRECT
    elif mode == "oracle":
        src = ea.generation_pair(ex, None)[0]
        summary = model.generate(src, args.max_len)
        ll = log_likelihood(model, src, ref)
        basis_sents = [s for a in ex.answers for s in a.relevant_sentences()]
        basis = Basis(ea.concat(basis_sents), Provenance.GOLD)
        system = SystemKind.ORACLE
    else:
        res = ea.run_inference(model, ex, args.threshold, args.max_len, generator=generator,
                               denominator=args.denominator)
        summary = res.final_summary
        # the summary is scored given what the system itself selected
        ll = log_likelihood(generator or model, make_input(q, res.basis, GENERATE), ref)
        basis_sents = [a.sentences[j] for a, idx in zip(ex.answers, res.postprocessed)
                       for j in idx]
        basis = Basis(res.basis, Provenance.PREDICTED)
        system = SystemKind.EXTRACT_GENERATE
    out = summary_metrics(summary, ex)
    out["loglik"] = ll
    out["faithfulness"] = math.nan
    out["faithfulness_per_token"] = math.nan
    if verifier is not None:
        f = evaluate_faithfulness(verifier, system, q, basis, summary)
        out["faithfulness"] = f.raw
        out["faithfulness_per_token"] = f.per_token
    out["_summary"] = _detok(summary)
    out["_basis"] = basis_sents
    return out


EVAL_NAMES = METRIC_NAMES + ("loglik", "faithfulness", "faithfulness_per_token")


def _scaled(means: dict) -> dict:
    out = dict(means)
    out["loglik_x100"] = means["loglik"] * 100
    out["faithfulness_x100"] = means["faithfulness"] * 100
    return out


def run_mode(mode: str, train, test, seed: int, verifier, args, threads: int):
    models = train_models(mode, train, seed, args)
    per = pmap(lambda ex: eval_example(mode, models, verifier, ex, args), test, threads)
    return models, per


def cmd_train_eval(args) -> int:
    threads = _threads(args)
    if args.mode not in MODES:
        raise UsageError(f"--mode must be one of {MODES}")
    seeds = _ints(args.seeds, "--seeds")
    if not seeds:
        raise UsageError("--seeds needs at least one seed")
    if args.epochs < 1:
        raise UsageError("--epochs must be >= 1")
    train = cio.load_corpus(args.train)
    test = cio.load_corpus(args.test)
    if not train or not test:
        raise ValueError("train and test corpora must be nonempty")
    if args.mode != "direct":
        _require_labels(train, "train")
    if args.mode == "oracle" or args.analyze_ce:
        _require_labels(test, "test")
    verifier = None
    if all(e.has_labels for e in train):
        # the oracle protocol: verifier sees question plus gold relevant sentences
        verifier = train_ngram([ea.generation_pair(e, None) for e in train], order=args.order,
                               alpha=args.alpha, copy_weight=args.copy_weight,
                               epochs=args.epochs)
    else:
        log.warning("train corpus lacks relevance labels; faithfulness not computed")

    per_seed, all_per = [], []
    for seed in seeds:
        models, per = run_mode(args.mode, train, test, seed, verifier, args, threads)
        means = _scaled(mean_metrics(per, EVAL_NAMES))
        means["seed"] = seed
        means["train_loss"] = train_nll(args.mode, models, train, seed)
        per_seed.append(means)
        all_per.append(per)
    overall = _scaled(mean_metrics(per_seed, EVAL_NAMES + ("train_loss",)))

    if args.save_predictions:
        with open(args.save_predictions, "w", encoding="utf-8", newline="\n") as fh:
            for m in all_per[0]:
                fh.write(json.dumps({"summary": m["_summary"], "basis": m["_basis"]},
                                    sort_keys=True, ensure_ascii=False) + "\n")

    out = {"mode": args.mode, "seeds": seeds, "n_train": len(train), "n_test": len(test),
           "per_seed": per_seed, "mean": overall}

    if args.analyze_ce:
        out["ce_analysis"] = analyze_ce(args, train, test, all_per, verifier, threads)

    cols = ["seed", "rouge1", "rouge2", "rougeL", "meteor", "perspective", "length",
            "loglik", "loglik_x100", "faithfulness", "faithfulness_x100",
            "faithfulness_per_token", "train_loss"]
    rows = [[m[c] for c in cols] for m in per_seed]
    rows.append(["mean"] + [overall[c] for c in cols[1:]])
    text = table(rows, cols)
    if args.analyze_ce:
        text += "\n\n" + _report_table(out["ce_analysis"])
    emit(args, out, text)
    return 0


def analyze_ce(args, train, test, all_per, verifier, threads) -> dict:
    """Per-example CE against this mode's metric gains over a direct baseline."""
    if 2 * args.k > len(test):
        raise ValueError(f"--k {args.k} needs {2 * args.k} test examples, have {len(test)}")
    kw = dict(l2=args.l2, epochs=args.clf_epochs, lr=args.lr)
    c1 = confound.train_classifier(train, False, **kw)
    c2 = confound.train_classifier(train, True, **kw)
    est = confound.estimate_ce(c1, c2, test)
    mine = {k: np.mean([[m[k] for m in per] for per in all_per], axis=0)
            for k in ("loglik", "rouge1", "rougeL")}
    if args.mode == "direct":
        base = mine
    else:
        _, base_per = run_mode("direct", train, test, 0, None, args, threads)
        base = {k: np.array([m[k] for m in base_per]) for k in mine}
    report = confound.top_bottom_report(
        est.per_example, mine["loglik"] - base["loglik"], mine["rouge1"] - base["rouge1"],
        args.k, extra={"rougeL": mine["rougeL"] - base["rougeL"]})
    report["ce"] = est.as_dict()
    report["ce"].pop("per_example")
    report["baseline"] = "direct"
    return report


def _report_table(rep: dict) -> str:
    rows = []
    for name, r in rep["metrics"].items():
        w = r["welch"]
        label = name + (" (x100)" if name == "loglik" else "")
        rows.append([label, r["top"]["mean"], r["top"]["se"], r["bottom"]["mean"],
                     r["bottom"]["se"], w["t"], w["p_value"], w["significant_at_05"]])
    return table(rows, ["delta vs direct", f"top{rep['k']} mean", "se",
                        f"bottom{rep['k']} mean", "se", "t", "p", "sig@0.05"])


# --- distant-label --------------------------------------------------------

def cmd_distant_label(args) -> int:
    data = cio.load_corpus(args.corpus)
    thresholds = _floats(args.thresholds, "--thresholds")
    if not thresholds:
        raise UsageError("--thresholds needs at least one value")
    if args.out and len(thresholds) != 1:
        raise UsageError("--out writes one labelling; give exactly one threshold")
    have_gold = bool(data) and all(e.has_labels for e in data)
    rows, results = [], []
    labelled = None
    for th in thresholds:
        distant = pmap(lambda e: ea.distant_label(e, th, args.metric), data, _threads(args))
        positives = sum(sum(map(bool, row)) for d in distant for row in d)
        res = {"threshold": th, "positives": positives}
        if have_gold:
            counts = ea.Overlap(0, 0, 0, 0)
            for e, d in zip(data, distant):
                o = ea.overlap_report([a.relevance for a in e.answers], d)
                counts = ea.Overlap(counts.tp + o.tp, counts.fp + o.fp,
                                    counts.fn + o.fn, counts.tn + o.tn)
            res.update(counts.as_dict())
        results.append(res)
        labelled = distant
        rows.append([res.get(k) for k in ("threshold", "positives", "TP", "FP", "FN", "TN",
                                         "precision", "recall")])
    if args.out:
        relabelled = [ea.Example(e.question, tuple(ea.Answer(a.sentences, tuple(d))
                                                   for a, d in zip(e.answers, dl)),
                                 e.summary, e.cluster_summaries)
                      for e, dl in zip(data, labelled)]
        cio.save_corpus(relabelled, args.out)
    out = {"metric": args.metric, "n_examples": len(data), "gold_available": have_gold,
           "thresholds": results}
    emit(args, out, table(rows, ["threshold", "positives", "TP", "FP", "FN", "TN",
                                 "precision", "recall"]))
    return 0


# --- score-faithfulness ---------------------------------------------------

_DEFAULT_BASIS = {"extract-generate": "predicted", "direct": "full-input", "oracle": "gold"}


def cmd_score_faithfulness(args) -> int:
    if args.verifier:
        verifier = NgramSeq2Seq.load(args.verifier)
    else:
        train = cio.load_corpus(args.train)
        _require_labels(train, "train")
        verifier = train_ngram([ea.generation_pair(e, None) for e in train], order=args.order,
                               alpha=args.alpha, copy_weight=args.copy_weight)
    data = cio.load_corpus(args.corpus)
    preds = load_predictions(args.pred)
    if len(preds) != len(data):
        raise ValueError(f"{len(preds)} predictions for {len(data)} examples")
    prov = Provenance(args.basis or _DEFAULT_BASIS[args.system])

    def score(item):
        i, (pred, ex) = item
        if prov is Provenance.PREDICTED:
            if pred.get("basis") is None:
                raise ValueError(f"prediction {i} carries no 'basis' sentences")
            sents = pred["basis"]
        elif prov is Provenance.GOLD:
            sents = [s for a in ex.answers for s in a.relevant_sentences()]
        else:
            sents = ex.sentences()
        f = evaluate_faithfulness(verifier, args.system, ea.tok(ex.question),
                                  Basis(ea.concat(sents), prov), ea.tok(pred["summary"]))
        return f.raw, f.per_token

    scores = pmap(score, enumerate(zip(preds, data)), _threads(args))
    raw = float(np.mean([s[0] for s in scores])) if scores else math.nan
    per_tok = float(np.mean([s[1] for s in scores])) if scores else math.nan
    out = {"system": args.system, "basis": prov.value, "n": len(scores),
           "faithfulness": raw, "faithfulness_x100": raw * 100,
           "faithfulness_per_token": per_tok}
    emit(args, out, table([[k, out[k]] for k in ("faithfulness", "faithfulness_x100",
                                                  "faithfulness_per_token")],
                          ["score", "value"]) + f"\n{len(scores)} summaries, "
         f"{args.system} system, {prov.value} basis")
    return 0


# --- parser ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="print JSON instead of a table")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $EACL_THREADS, else 1)")

    ap = argparse.ArgumentParser(prog="eacausal", description=__doc__.splitlines()[0],
                                 formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, func, help_):
        p = sub.add_parser(name, parents=[common], help=help_, description=help_,
                           formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        p.set_defaults(func=func)
        return p

    p = add("verify-theorems", cmd_verify_theorems,
            "fuzz random SEMs and check the causal-effect identities")
    p.add_argument("--n-sems", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-card", type=int, default=4, help="largest alphabet size per variable")
    p.add_argument("--concentration", type=float, default=1.0, help="Dirichlet concentration")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--sem", default=None, help="check this SEM file instead of fuzzing")
    p.add_argument("--bits", action="store_true", help="report in bits")

    p = add("ce-exact", cmd_ce_exact, "exact causal effect of irrelevant sentences for a SEM")
    _add_sem_source(p)
    p.add_argument("--bits", action="store_true", help="report in bits")

    p = add("ce-estimate", cmd_ce_estimate,
            "estimate the causal effect from a labelled corpus with two classifiers")
    p.add_argument("corpus")
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--hash-seed", type=int, default=confound.HASH_SEED)
    p.add_argument("--hash-dim", type=int, default=confound.HASH_DIM)
    p.add_argument("--per-example", action="store_true", help="include per-example values")
    p.add_argument("--save-classifiers", default=None, metavar="PREFIX")
    p.add_argument("--bits", action="store_true", help="report in bits")

    p = add("synth-corpus", cmd_synth_corpus, "sample and verbalize a labelled corpus")
    _add_sem_source(p)
    p.add_argument("--count", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-answers", type=int, default=1)
    p.add_argument("--multi-token", action="store_true", help="two-word phrases per symbol")
    p.add_argument("--out", required=True)

    p = add("metrics", cmd_metrics, "ROUGE, METEOR-lite, Perspective and length of predictions")
    p.add_argument("--pred", required=True, help='JSONL with a "summary" field per line')
    p.add_argument("--corpus", required=True)
    p.add_argument("--no-stem", action="store_true")

    p = add("train-eval", cmd_train_eval, "train n-gram systems and evaluate them")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--mode", choices=MODES, default="sure")
    p.add_argument("--seeds", default="0", help="comma-separated training seeds")
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--copy-weight", type=float, default=0.5)
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--threshold", type=float, default=ea.DEFAULT_THRESHOLD)
    p.add_argument("--denominator", choices=("sentence", "raw"), default="sentence")
    p.add_argument("--max-len", type=int, default=64)
    p.add_argument("--save-predictions", default=None)
    p.add_argument("--analyze-ce", action="store_true",
                   help="top/bottom-k comparison of gains over a direct model by per-example CE")
    p.add_argument("--k", type=int, default=50)
    p.add_argument("--l2", type=float, default=1e-4, help="classifier l2 (with --analyze-ce)")
    p.add_argument("--clf-epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.5)

    p = add("distant-label", cmd_distant_label, "label sentences by overlap with the summary")
    p.add_argument("corpus")
    p.add_argument("--thresholds", default="0.5,0.6,0.7,0.8")
    p.add_argument("--metric", choices=("precision", "recall", "f1"), default="precision")
    p.add_argument("--out", default=None, help="write the relabelled corpus")

    p = add("score-faithfulness", cmd_score_faithfulness,
            "verifier log-likelihood of summaries given the basis they came from")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--verifier", help="saved n-gram verifier")
    g.add_argument("--train", help="labelled corpus to train the verifier on")
    p.add_argument("--corpus", required=True)
    p.add_argument("--pred", required=True, help='JSONL with "summary" and optional "basis"')
    p.add_argument("--system", choices=[k.value for k in SystemKind], required=True)
    p.add_argument("--basis", choices=[k.value for k in Provenance], default=None,
                   help="basis provenance (default: the one the system requires)")
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--copy-weight", type=float, default=0.5)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _log_config(args)
        return int(args.func(args) or 0)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"eacausal: usage error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError, ArithmeticError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"eacausal: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
