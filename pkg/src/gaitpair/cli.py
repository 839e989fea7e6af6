"""Command-line batch runner.

Every command writes into ``--out``. Outputs depend only on the inputs, the
options and ``--seed``, never on ``--workers``.

Exit status: 0 success, 1 runtime error, 2 usage error, 3 protocol abort.
"""

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis, attacks
from .bits import derive_seed, pack_bits
from .fuzzy import CodeError, CodeParams
from .ingest import LOCATIONS, NOISE_FAMILIES, NOISE_LEVELS, IngestError, NoiseModel, load_csv, save_csv, synth_corpus
from .quantizers import QuantizerError, wt_preprocess, wt_quantize, wt_reconcile
from .schemes import SCHEME_NAMES, WalkieTalkieScheme, make_scheme
from .signal import SignalError

log = logging.getLogger("gaitpair")

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_ABORT = 0, 1, 2, 3
ATTACKS = ("one-shot", "wt-leak", "bandana-pattern", "ipi-bias", "video")


class UsageError(Exception):
    pass


class ProtocolAbort(Exception):
    pass


@dataclass
class AttackConfig:
    name: str
    trials: int
    noise: NoiseModel
    key_bits: int | None
    corrected: int | None
    ipi_mean: float
    ipi_sd: float


@dataclass
class RunConfig:
    command: str
    scheme: str
    scheme_options: dict
    inputs: list = field(default_factory=list)
    synth: dict | None = None
    seed: int = 0
    out: Path = Path(".")
    format: str = "json"
    workers: int = 1
    pair_mode: bool = False
    key_bits: int = 128
    attack: AttackConfig | None = None
    rate_hz: float = 50.0

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "scheme": self.scheme,
            "scheme_options": {k: v for k, v in self.scheme_options.items() if v is not None},
            "inputs": [str(p) for p in self.inputs],
            "synth": self.synth,
            "seed": self.seed,
            "rate_hz": self.rate_hz,
            "format": self.format,
        }


# --- argument parsing ---------------------------------------------------------

def _code(text: str) -> CodeParams:
    try:
        return CodeParams.parse(text)
    except (ValueError, CodeError) as exc:
        raise argparse.ArgumentTypeError(f"invalid code {text!r}: {exc}") from None


def _noise(text: str) -> NoiseModel:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("expected family,mu,sigma,level")
    family, mu, sigma, level = parts
    if family not in NOISE_FAMILIES or level not in NOISE_LEVELS:
        raise argparse.ArgumentTypeError(
            f"family must be one of {NOISE_FAMILIES} and level one of {tuple(NOISE_LEVELS)}")
    try:
        return NoiseModel(family, float(mu), float(sigma), level)
    except (ValueError, IngestError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _locations(text: str) -> tuple:
    locs = tuple(s.strip() for s in text.split(",") if s.strip())
    bad = [loc for loc in locs if loc not in LOCATIONS]
    if bad or not locs:
        raise argparse.ArgumentTypeError(f"locations must be drawn from {LOCATIONS}")
    return locs


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("scheme")
    g.add_argument("--scheme", choices=SCHEME_NAMES, default="bandana")
    g.add_argument("--alpha", type=float)
    g.add_argument("--window", type=int)
    g.add_argument("--epsilon", type=float)
    g.add_argument("--levels", type=int, choices=(2, 4))
    g.add_argument("--ipi-q", type=int)
    g.add_argument("--ipi-m", type=float)
    g.add_argument("--code", type=_code, help="BCH code as n,k,t")
    g.add_argument("--thresholds", type=int, help="SAPHE threshold count")
    g.add_argument("--dynamic-range", action="store_true", help="SAPHE thresholds over the observed range")
    src = common.add_argument_group("input")
    src.add_argument("--input", nargs="+", type=Path, default=[],
                     help="CSV files, or directories laid out as SUBJECT/LOCATION.csv")
    src.add_argument("--synth", action="store_true", help="use a synthetic corpus instead of files")
    src.add_argument("--subjects", type=int, default=4)
    src.add_argument("--locations", type=_locations, default=("waist", "shin", "chest"))
    src.add_argument("--cycles", type=int, default=14)
    src.add_argument("--rate", type=float, default=50.0, help="sampling rate of CSV input in Hz")
    run = common.add_argument_group("run")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--out", type=Path, default=Path("out"))
    run.add_argument("--format", choices=("json", "csv"), default="json")
    run.add_argument("--error-json", action="store_true", help="print errors as JSON on stderr")

    parser = argparse.ArgumentParser(prog="gaitpair", description="Gait-based pairing key analysis.")
    sub = parser.add_subparsers(dest="command", required=True)

    q = sub.add_parser("quantize", parents=[common], help="derive key bits from recordings")
    q.add_argument("--pair", action="store_true",
                   help="treat the first two recordings as two devices and run the pairing protocol")
    sub.add_parser("similarity", parents=[common], help="intra- and inter-body fingerprint similarity")
    r = sub.add_parser("randomness", parents=[common], help="random-walk, Markov and ENT statistics")
    r.add_argument("--key-bits", type=int, default=128)
    a = sub.add_parser("attack", parents=[common], help="run an adversary")
    a.add_argument("--attack", choices=ATTACKS, default="one-shot")
    a.add_argument("--trials", type=int, default=100)
    a.add_argument("--noise", type=_noise, default=NoiseModel(), help="family,mu,sigma,level")
    a.add_argument("--key-bits", type=int, help="fingerprint length N")
    a.add_argument("--corrected", type=int, help="correctable bits u")
    a.add_argument("--ipi-mean", type=float, default=1000.0)
    a.add_argument("--ipi-sd", type=float, default=40.8)
    sub.add_parser("export-bits", parents=[common], help="write raw packed key bits")
    sub.add_parser("synth", parents=[common], help="write a synthetic corpus as CSV files")
    return parser


def config_from_args(args) -> RunConfig:
    # a missing source is only an error for commands that read recordings
    if args.input and args.synth:
        raise UsageError("give exactly one input source: --input or --synth")
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    opts = {
        "alpha": args.alpha, "window": args.window, "epsilon": args.epsilon, "levels": args.levels,
        "ipi_q": args.ipi_q, "ipi_m": args.ipi_m, "n_thresholds": args.thresholds,
        "dynamic_range": args.dynamic_range,
        "code": [args.code.n, args.code.k, args.code.t] if args.code else None,
    }
    synth = None
    if args.synth or args.command == "synth":
        synth = {"subjects": args.subjects, "locations": list(args.locations), "cycles": args.cycles}
    attack = None
    if args.command == "attack":
        if args.trials < 1:
            raise UsageError("--trials must be >= 1")
        attack = AttackConfig(args.attack, args.trials, args.noise, args.key_bits, args.corrected,
                              args.ipi_mean, args.ipi_sd)
    return RunConfig(args.command, args.scheme, opts, list(args.input), synth, args.seed,
                     args.out, args.format, args.workers, getattr(args, "pair", False),
                     getattr(args, "key_bits", None) or 128, attack, args.rate)


def scheme_from_config(cfg: RunConfig, **override):
    opts = {**cfg.scheme_options, **override}
    code = CodeParams(*opts.pop("code")) if opts.get("code") else None
    opts.pop("code", None)
    return make_scheme(cfg.scheme, code=code, **opts)


# --- inputs -------------------------------------------------------------------

def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def series_digest(series) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in np.column_stack([series.t, series.acc]):
        w.writerow([f"{v:.6f}" for v in row])
    return hashlib.sha256(buf.getvalue().encode()).hexdigest()


def _name_recording(path: Path):
    """(subject, location) from ``SUBJECT/LOCATION.csv`` or ``SUBJECT_LOCATION.csv``;
    anything else is taken as a waist recording named after the file."""
    if path.stem in LOCATIONS:
        return path.parent.name or "s00", path.stem
    head, _, tail = path.stem.rpartition("_")
    if head and tail in LOCATIONS:
        return head, tail
    return path.stem, "waist"


def load_corpus(cfg: RunConfig):
    """``{subject: {location: series}}`` plus ``{(subject, location): digest}``."""
    if not cfg.synth and not cfg.inputs:
        raise UsageError("give exactly one input source: --input or --synth")
    if cfg.synth:
        corpus = synth_corpus(cfg.synth["subjects"], tuple(cfg.synth["locations"]),
                              seed=derive_seed(cfg.seed, "corpus"), n_cycles=cfg.synth["cycles"])
        digests = {(s, loc): series_digest(x) for s, locs in corpus.items() for loc, x in locs.items()}
        return corpus, digests
    corpus, digests = {}, {}
    for path in cfg.inputs:
        if path.is_dir():
            files = sorted(path.glob("*/*.csv"))
            if not files:
                raise IngestError(f"no SUBJECT/LOCATION.csv files under {path}")
            entries = [(f, f.parent.name, f.stem) for f in files]
        else:
            entries = [(path, *_name_recording(path))]
        for f, subject, loc in entries:
            if loc not in LOCATIONS:
                raise IngestError(f"{f}: unknown location {loc!r}")
            if (subject, loc) in digests:
                raise IngestError(f"{f}: duplicate recording for {subject}/{loc}")
            corpus.setdefault(subject, {})[loc] = load_csv(f, cfg.rate_hz, subject, loc)
            digests[(subject, loc)] = file_digest(f)
    return corpus, digests


def _flatten(corpus):
    return [(s, loc, corpus[s][loc]) for s in sorted(corpus) for loc in sorted(corpus[s])]


@contextmanager
def mapper(workers: int):
    if workers <= 1:
        yield map
        return
    with ProcessPoolExecutor(max_workers=workers) as ex:
        yield lambda fn, items: ex.map(fn, items, chunksize=4)


# --- outputs ------------------------------------------------------------------

def write_text(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="\n")


def write_csv(path: Path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    write_text(path, buf.getvalue())


def _flat_items(d, prefix=""):
    for k, v in sorted(d.items()):
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            yield from _flat_items(v, key + ".")
        elif not isinstance(v, list):
            yield key, v


def write_report(cfg: RunConfig, name: str, report: dict):
    report = {**report, "config": cfg.to_dict()}
    if cfg.format == "json":
        write_text(cfg.out / f"{name}.json", analysis.dumps(report))
    else:
        clean = json.loads(analysis.dumps(report))
        write_csv(cfg.out / f"{name}.csv", ["field", "value"], list(_flat_items(clean)))


# --- commands -------------------------------------------------------------------

def _stream_job(job):
    scheme, subject, loc, series, seed = job
    try:
        return scheme.stream(series, seed), None
    except (SignalError, QuantizerError) as exc:
        return np.zeros(0, dtype=np.uint8), str(exc)


def _streams(cfg, scheme, corpus):
    jobs = [(scheme, s, loc, x, derive_seed(cfg.seed, "stream", s, loc)) for s, loc, x in _flatten(corpus)]
    with mapper(cfg.workers) as m:
        results = list(m(_stream_job, jobs))
    return [(j[1], j[2], bits, err) for j, (bits, err) in zip(jobs, results)]


def cmd_quantize(cfg: RunConfig) -> int:
    corpus, digests = load_corpus(cfg)
    scheme = scheme_from_config(cfg)
    if cfg.pair_mode:
        return _quantize_pair(cfg, scheme, corpus, digests)
    for subject, loc, bits, err in _streams(cfg, scheme, corpus):
        stem = f"{subject}_{loc}"
        if err:
            log.warning("%s: %s", stem, err)
        (cfg.out / f"{stem}.bin").parent.mkdir(parents=True, exist_ok=True)
        (cfg.out / f"{stem}.bin").write_bytes(pack_bits(bits))
        sidecar = {"schema_version": analysis.SCHEMA_VERSION, "scheme": scheme.describe(),
                   "seed": cfg.seed, "subject": subject, "location": loc, "n_bits": int(bits.size),
                   "input_sha256": digests[(subject, loc)], "error": err}
        write_text(cfg.out / f"{stem}.json", analysis.dumps(sidecar))
    return EXIT_OK


def _quantize_pair(cfg, scheme, corpus, digests) -> int:
    items = _flatten(corpus)
    if len(items) < 2:
        raise UsageError("--pair needs two recordings")
    (sa, la, a), (sb, lb, b) = items[:2]
    result = scheme.pair(a, b, derive_seed(cfg.seed, "pair"))
    for tag, bits in (("a", result.fingerprint_a), ("b", result.fingerprint_b)):
        (cfg.out / f"pair_{tag}.bin").parent.mkdir(parents=True, exist_ok=True)
        (cfg.out / f"pair_{tag}.bin").write_bytes(pack_bits(bits))
    report = {"schema_version": analysis.SCHEMA_VERSION, "scheme": scheme.describe(), "seed": cfg.seed,
              "device_a": {"subject": sa, "location": la, "input_sha256": digests[(sa, la)]},
              "device_b": {"subject": sb, "location": lb, "input_sha256": digests[(sb, lb)]},
              "similarity": result.similarity, "success": result.success,
              "aborted": result.aborted, "detail": result.detail}
    write_text(cfg.out / "pair.json", analysis.dumps(report))
    if result.aborted and isinstance(scheme, WalkieTalkieScheme):
        raise ProtocolAbort(result.detail)
    return EXIT_OK


def cmd_similarity(cfg: RunConfig) -> int:
    corpus, _ = load_corpus(cfg)
    scheme = scheme_from_config(cfg)
    with mapper(cfg.workers) as m:
        report = analysis.similarity_matrix(corpus, scheme, cfg.seed, m)
    write_report(cfg, "similarity", report.to_dict())
    write_csv(cfg.out / "similarity_pairs.csv",
              ["kind", "subject_a", "location_a", "subject_b", "location_b", "similarity", "aborted", "success"],
              [[p.kind, p.subject_a, p.location_a, p.subject_b, p.location_b,
                "" if p.similarity is None else repr(p.similarity), int(p.aborted), int(p.success)]
               for p in report.pairs])
    return EXIT_OK


def _collect_keys(cfg, key_bits):
    corpus, _ = load_corpus(cfg)
    override = {}
    if cfg.scheme == "saphe" and not cfg.scheme_options.get("n_thresholds"):
        override["n_thresholds"] = key_bits
    scheme = scheme_from_config(cfg, **override)
    streams = _streams(cfg, scheme, corpus)
    # recordings are short, so keys are cut from the concatenation of all streams
    bits = np.concatenate([b for *_, b, _err in streams]) if streams else np.zeros(0, dtype=np.uint8)
    keys = analysis.split_keys(bits, key_bits)
    return scheme, streams, keys


def cmd_randomness(cfg: RunConfig) -> int:
    scheme, streams, keys = _collect_keys(cfg, cfg.key_bits)
    if not keys:
        raise QuantizerError(f"no complete {cfg.key_bits}-bit keys could be derived")
    report = analysis.randomness_report(keys, scheme.describe(), cfg.seed)
    write_report(cfg, "randomness", report.to_dict())
    length = report.key_bits
    write_csv(cfg.out / "heatmap.csv", ["position"] + [str(d) for d in range(-length, length + 1)],
              [[i + 1] + row for i, row in enumerate(report.heatmap.tolist())])
    write_csv(cfg.out / "markov.csv", ["position", "p_one"],
              [[i + 1, repr(float(p))] for i, p in enumerate(report.markov)])
    analysis.export_bits(keys, cfg.out / "bits.bin")
    return EXIT_OK


def cmd_export_bits(cfg: RunConfig) -> int:
    corpus, _ = load_corpus(cfg)
    scheme = scheme_from_config(cfg)
    streams = _streams(cfg, scheme, corpus)
    cfg.out.mkdir(parents=True, exist_ok=True)
    analysis.export_bits([bits for *_, bits, _ in streams], cfg.out / "bits.bin")
    write_csv(cfg.out / "bits_index.csv", ["subject", "location", "n_bits", "error"],
              [[s, loc, bits.size, err or ""] for s, loc, bits, err in streams])
    return EXIT_OK


def cmd_synth(cfg: RunConfig) -> int:
    corpus = synth_corpus(cfg.synth["subjects"], tuple(cfg.synth["locations"]),
                          seed=derive_seed(cfg.seed, "corpus"), n_cycles=cfg.synth["cycles"])
    manifest = []
    for s, loc, series in _flatten(corpus):
        path = cfg.out / s / f"{loc}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        save_csv(series, path)
        manifest.append({"subject": s, "location": loc, "file": f"{s}/{loc}.csv", "sha256": file_digest(path)})
    write_text(cfg.out / "manifest.json", analysis.dumps({"schema_version": analysis.SCHEMA_VERSION,
                                                         "seed": cfg.seed, "files": manifest}))
    return EXIT_OK


def _wt_victim(corpus, params, seed):
    """Reconciled victim bits for each subject's first two locations."""
    out = []
    for s in sorted(corpus):
        locs = sorted(corpus[s])
        if len(locs) < 2:
            continue
        qa = wt_quantize(wt_preprocess(corpus[s][locs[0]]), params)
        qb = wt_quantize(wt_preprocess(corpus[s][locs[1]]), params)
        out.append(wt_reconcile(qa, qb, params, abort=False)[0])
    if not out:
        raise UsageError("the leak attack needs subjects with at least two locations")
    return out


def cmd_attack(cfg: RunConfig) -> int:
    a = cfg.attack
    seed = derive_seed(cfg.seed, "attack", a.name)
    if a.name == "one-shot":
        code = cfg.scheme_options.get("code")
        n = a.key_bits or (code[0] if code else 32 if cfg.scheme.startswith(("bandana", "ipi")) else 16)
        u = a.corrected if a.corrected is not None else (
            code[2] if code else 8 if cfg.scheme.startswith(("bandana", "ipi")) else 0)
        p = attacks.one_shot(cfg.scheme, n, u)
        report = {"schema_version": analysis.SCHEMA_VERSION, "report": "OneShot", "scheme": cfg.scheme,
                  "key_bits": n, "corrected_bits": u, "probability": p.value,
                  "exact": f"{p.exact.numerator}/{p.exact.denominator}"}
    elif a.name == "bandana-pattern":
        keys = _collect_keys(cfg, 48)[2] if cfg.scheme.startswith("bandana") else []
        hist = analysis.chunk_histogram(keys, 4) if keys else {format(i, "04b"): 1 / 16 for i in range(16)}
        out = attacks.bandana_pattern_attack(hist, (a.key_bits or 32, 8 if a.corrected is None else a.corrected),
                                             a.trials, seed)
        out.extra["histogram"] = hist
        report = out.to_dict()
    elif a.name == "ipi-bias":
        scheme = scheme_from_config(cfg) if cfg.scheme == "ipi" else make_scheme("ipi")
        report = attacks.ipi_bias_attack(a.ipi_mean, a.ipi_sd, scheme.params, a.trials, seed,
                                         (a.key_bits or 32, 8 if a.corrected is None else a.corrected)).to_dict()
    elif a.name == "wt-leak":
        scheme = scheme_from_config(cfg) if cfg.scheme in ("walkie-talkie", "gait-key") else make_scheme("walkie-talkie")
        corpus, _ = load_corpus(cfg)
        victims = _wt_victim(corpus, scheme.params, seed)
        report = attacks.wt_reconciliation_attack(victims, scheme.params, None, seed).to_dict()
    else:
        corpus, _ = load_corpus(cfg)
        victims = [x for *_, x in _flatten(corpus)]
        with mapper(cfg.workers) as m:
            out = attacks.video_impersonation(victims, a.noise, scheme_from_config(cfg), a.trials, seed, m)
        report = out.to_dict()
    write_report(cfg, "attack", report)
    return EXIT_OK


COMMANDS = {
    "quantize": cmd_quantize,
    "similarity": cmd_similarity,
    "randomness": cmd_randomness,
    "attack": cmd_attack,
    "export-bits": cmd_export_bits,
    "synth": cmd_synth,
}


def _configure_logging():
    level = os.environ.get("GAITPAIR_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _fail(args, code: int, exc: Exception) -> int:
    kind = {EXIT_USAGE: "usage", EXIT_ABORT: "abort"}.get(code, "runtime")
    if getattr(args, "error_json", False):
        print(json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc),
                          "exit_code": code}, sort_keys=True), file=sys.stderr)
    else:
        print(f"gaitpair: {kind} error: {exc}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = config_from_args(args)
        cfg.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        return _fail(args, EXIT_USAGE, exc)
    except ProtocolAbort as exc:
        return _fail(args, EXIT_ABORT, exc)
    except (ValueError, OSError, attacks.AttackError) as exc:
        log.debug("command failed", exc_info=True)
        return _fail(args, EXIT_ERROR, exc)


if __name__ == "__main__":
    sys.exit(main())
