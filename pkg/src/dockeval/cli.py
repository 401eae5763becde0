"""Command-line front end.

Batch subcommands read a benchmark directory with one subdirectory per
entry::

    {entry_id}/protein.pdb
    {entry_id}/ligand_ref.sdf
    {entry_id}/ligand_pred.sdf
    {entry_id}/ligand_start.sdf   (optional)

Exit codes: 0 success, 1 per-entry processing failures, 2 usage or
configuration errors. Logs go to stderr as JSON lines; data goes to files or
stdout.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import __version__, crossdock, curate, kernels, ligrmsd, metrics, pocketsim, relax, validity
from .chemio import read_ligand, read_pdb, write_pdb, write_sdf

log = logging.getLogger("dockeval")

EXIT_OK, EXIT_FAILURES, EXIT_USAGE = 0, 1, 2
PROTEIN, REF, PRED, START = "protein.pdb", "ligand_ref.sdf", "ligand_pred.sdf", "ligand_start.sdf"


class UsageError(Exception):
    pass


class _JsonFormatter(logging.Formatter):
    def format(self, record):
        return json.dumps({"level": record.levelname.lower(), "logger": record.name,
                           "msg": record.getMessage()}, sort_keys=True)


def _setup_logging(verbosity: int) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_JsonFormatter())
    root = logging.getLogger("dockeval")
    root.handlers[:] = [handler]
    root.propagate = False
    root.setLevel(logging.DEBUG if verbosity > 1 else logging.INFO if verbosity == 1 else logging.WARNING)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# --------------------------------------------------------------------------- layout helpers

def list_entries(root: Path) -> list[str]:
    if not root.is_dir():
        raise UsageError(f"benchmark directory {root} does not exist")
    return sorted(p.name for p in root.iterdir() if p.is_dir() and not p.name.startswith("."))


def _read_target_map(path: Path | None) -> dict[str, str]:
    if path is None:
        return {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if not {"entry_id", "target_id"} <= set(reader.fieldnames or ()):
            raise UsageError(f"{path}: target map needs entry_id,target_id columns")
        return {r["entry_id"].strip(): r["target_id"].strip() for r in reader}


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


def _relax_config(args) -> relax.RelaxConfig:
    return relax.RelaxConfig(k_backbone=args.k_backbone, k_bond=args.k_bond, k_rep=args.k_rep,
                             gradient_tolerance=args.gradient_tolerance, max_iterations=args.max_iterations,
                             clash_margin=args.clash_margin)


# --------------------------------------------------------------------------- per-entry workers

@dataclass(frozen=True)
class EvalJob:
    entry_id: str
    root: str
    target_id: str
    method: str
    do_relax: bool
    relax_config: relax.RelaxConfig | None
    corpus_index: str | None
    pocket_cutoff: float


def _evaluate_entry(job: EvalJob) -> dict:
    row = {"entry_id": job.entry_id, "target_id": job.target_id, "method": job.method,
           "rmsd": "", "pb_valid": "", "pocket_similarity": "", "relaxed": str(job.do_relax).lower(),
           "run_id": "0", "status": "ok", "error": ""}
    d = Path(job.root) / job.entry_id
    try:
        protein = read_pdb(d / PROTEIN)
        ref = read_ligand(d / REF)
        pred = read_ligand(d / PRED)
        if job.do_relax:
            protein, pred, _ = relax.relax_complex(protein, pred, job.relax_config)
        rmsd, corr = ligrmsd.best_correspondence(pred, ref)
        report = validity.validate(pred, ref, protein, correspondence=corr)
        row["rmsd"] = repr(rmsd)
        row["pb_valid"] = str(report.pb_valid).lower()
        if job.corpus_index:
            corpus = pocketsim.load_corpus(pocketsim.read_corpus_index(job.corpus_index), job.pocket_cutoff)
            corpus = [(cid, p) for cid, p in corpus if cid != job.entry_id]
            query = pocketsim.extract_pocket(protein, ref, job.pocket_cutoff, job.entry_id)
            row["pocket_similarity"] = repr(pocketsim.max_similarity_vs_corpus(query, corpus).score)
    except (OSError, ValueError, RuntimeError) as exc:
        row["status"] = "error"
        row["error"] = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    return row


def _map(fn, jobs, workers: int):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


# --------------------------------------------------------------------------- subcommands

def cmd_validate(args) -> int:
    if args.dir:
        root = Path(args.dir)
        out, failures = {}, 0
        for eid in list_entries(root):
            try:
                pred = read_ligand(root / eid / PRED)
            except (OSError, ValueError) as exc:
                out[eid] = validity.load_failure_report(str(exc)).to_dict()
                failures += 1
                continue
            try:
                ref = read_ligand(root / eid / REF) if (root / eid / REF).exists() else None
                protein = read_pdb(root / eid / PROTEIN) if (root / eid / PROTEIN).exists() else None
                out[eid] = validity.validate(pred, ref, protein).to_dict()
            except (OSError, ValueError, RuntimeError) as exc:
                log.error("entry %s failed: %s", eid, exc)
                out[eid] = {"error": str(exc)}
                failures += 1
        _write(args.out, json.dumps(out, indent=2, sort_keys=True) + "\n")
        return EXIT_FAILURES if failures else EXIT_OK
    if not args.pred:
        raise UsageError("validate needs --pred or --dir")
    try:
        pred = read_ligand(args.pred)
    except (OSError, ValueError) as exc:
        _write(args.out, validity.load_failure_report(str(exc)).to_json() + "\n")
        return EXIT_FAILURES
    try:
        ref = read_ligand(args.ref) if args.ref else None
        protein = read_pdb(args.protein) if args.protein else None
        report = validity.validate(pred, ref, protein)
    except (OSError, ValueError, RuntimeError) as exc:
        log.error("validation failed: %s", exc)
        return EXIT_FAILURES
    _write(args.out, report.to_json() + "\n")
    return EXIT_OK


def cmd_rmsd(args) -> int:
    pairs = []
    if args.dir:
        root = Path(args.dir)
        pairs = [(eid, root / eid / PRED, root / eid / REF) for eid in list_entries(root)]
    elif args.pred and args.ref:
        pairs = [(Path(args.pred).stem, Path(args.pred), Path(args.ref))]
    else:
        raise UsageError("rmsd needs --pred and --ref, or --dir")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["entry_id", "rmsd", "naive_rmsd", "status", "error"])
    failures = 0
    for eid, p, r in pairs:
        try:
            pred, ref = read_ligand(p), read_ligand(r)
            value = ligrmsd.symmetry_rmsd(pred, ref)
            try:
                naive = repr(ligrmsd.naive_rmsd(pred, ref))
            except ValueError:
                naive = ""
            w.writerow([eid, repr(value), naive, "ok", ""])
        except (OSError, ValueError, RuntimeError) as exc:
            failures += 1
            log.error("entry %s failed: %s", eid, exc)
            w.writerow([eid, "", "", "error", str(exc)])
    _write(args.out, buf.getvalue())
    return EXIT_FAILURES if failures else EXIT_OK


def cmd_evaluate(args) -> int:
    root = Path(args.dir)
    targets = _read_target_map(Path(args.target_map) if args.target_map else None)
    cfg = _relax_config(args) if args.relax else None
    jobs = [EvalJob(eid, str(root), targets.get(eid, eid), args.method, args.relax, cfg,
                    args.corpus, args.pocket_cutoff) for eid in list_entries(root)]
    rows = _map(_evaluate_entry, jobs, args.workers)
    buf = io.StringIO()
    cols = list(metrics.RECORD_FIELDS) + ["status", "error"]
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow(row)
    _write(args.out, buf.getvalue())
    if args.out and args.out != "-":
        meta = {"argv": sys.argv[1:], "version": __version__, "kernels": kernels.backend_name,
                "finished_unix": time.time()}
        Path(args.out + ".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    failures = [r for r in rows if r["status"] != "ok"]
    for r in failures:
        log.error("entry %s failed: %s", r["entry_id"], r["error"])
    ok = metrics.read_records(buf.getvalue())
    if ok:
        rate = metrics.success_rate(ok, args.criterion, args.rmsd_threshold)
        target = metrics.target_level_success(ok, args.criterion, args.rmsd_threshold)
        stream = sys.stderr if args.out in (None, "-") else sys.stdout
        print(f"success_rate[{args.criterion}] = {metrics.format_percent(rate)} "
              f"(target-level {metrics.format_percent(target)}, n={len(ok)}, errors={len(failures)})", file=stream)
    return EXIT_FAILURES if failures else EXIT_OK


def cmd_relax(args) -> int:
    try:
        protein = read_pdb(args.protein)
        ligand = read_ligand(args.ligand)
        result = relax.relax_complex(protein, ligand, _relax_config(args))
    except (OSError, ValueError) as exc:
        log.error("relaxation failed: %s", exc)
        return EXIT_FAILURES
    Path(args.out_protein).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out_protein).write_bytes(write_pdb(result.protein))
    Path(args.out_ligand).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out_ligand).write_bytes(write_sdf(result.ligand))
    _write(args.stats, json.dumps(result.stats.to_dict(), indent=2, sort_keys=True) + "\n")
    return EXIT_OK if result.stats.converged else EXIT_FAILURES


def cmd_crossdock(args) -> int:
    try:
        ref_protein = read_pdb(args.reference_protein)
        ref_ligand = read_ligand(args.reference_ligand)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read reference: {exc}") from None
    root = Path(args.dir)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows, failures = [], 0
    for eid in list_entries(root):
        try:
            protein = read_pdb(root / eid / PROTEIN)
            ligand = read_ligand(root / eid / REF)
        except (OSError, ValueError) as exc:
            failures += 1
            rows.append(crossdock.CandidateReport(eid, None, None, "reject", f"error: {exc}"))
            continue
        row, _, moved = crossdock.evaluate_candidate(eid, protein, ligand, ref_protein, ref_ligand,
                                                     args.max_ca_rmsd, args.max_displacement)
        rows.append(row)
        if row.reason.startswith("error"):
            failures += 1
        if moved is not None and row.decision == crossdock.ACCEPT:
            (out_dir / f"{eid}_ligand.sdf").write_bytes(write_sdf(moved))
    (out_dir / "alignment_report.csv").write_text(crossdock.report_csv(rows))
    return EXIT_FAILURES if failures else EXIT_OK


def cmd_pocket_sim(args) -> int:
    entries = pocketsim.read_corpus_index(args.corpus, args.released_before)
    corpus = pocketsim.load_corpus(entries, args.cutoff)
    if not corpus:
        raise UsageError("corpus is empty")
    root = Path(args.dir)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["entry_id", "pocket_similarity", "best_match", "stratum", "status", "error"])
    failures = 0
    for eid in list_entries(root):
        try:
            query = pocketsim.extract_pocket(read_pdb(root / eid / PROTEIN), read_ligand(root / eid / REF),
                                             args.cutoff, eid)
            match = pocketsim.max_similarity_vs_corpus(query, [(c, p) for c, p in corpus if c != eid])
            stratum = "similar" if match.score >= args.threshold else "dissimilar"
            w.writerow([eid, repr(match.score), match.best_match_id, stratum, "ok", ""])
        except (OSError, ValueError) as exc:
            failures += 1
            log.error("entry %s failed: %s", eid, exc)
            w.writerow([eid, "", "", "", "error", str(exc)])
    _write(args.out, buf.getvalue())
    return EXIT_FAILURES if failures else EXIT_OK


def cmd_curate(args) -> int:
    try:
        entries = curate.load_manifest(args.manifest)
    except (OSError, ValueError) as exc:
        raise UsageError(f"manifest: {exc}") from None
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = curate.FilterConfig(pipeline=args.pipeline)
    try:
        if args.pipeline == curate.SELF_DOCK:
            result = curate.build_self_dock_set(entries, cfg)
            selected = [{"pdb_id": e.pdb_id, "ccd_id": e.ccd_id} for e in result.entries]
            trace = result.trace
        else:
            if not args.structures:
                raise UsageError("the cross pipeline needs --structures")
            sroot = Path(args.structures)
            result = curate.build_cross_dock_set(
                entries, lambda e: (read_pdb(sroot / e.key / PROTEIN), read_ligand(sroot / e.key / REF)),
                cfg, workers=args.workers)
            selected = [{"target": p.target, "protein_entry": p.protein_entry, "ligand_entry": p.ligand_entry}
                        for p in result.pairs]
            for p in result.pairs:
                d = out_dir / "pairs" / f"{p.protein_entry}__{p.ligand_entry}"
                d.mkdir(parents=True, exist_ok=True)
                (d / PROTEIN).write_bytes(write_pdb(p.protein))
                (d / REF).write_bytes(write_sdf(p.ligand))
            (out_dir / "alignment_report.csv").write_text(crossdock.report_csv(result.reports))
            trace = result.trace
    except curate.ManifestError as exc:
        raise UsageError(str(exc)) from None
    except (OSError, ValueError) as exc:
        log.error("curation failed: %s", exc)
        return EXIT_FAILURES
    (out_dir / "trace.csv").write_text(trace.to_csv())
    (out_dir / "selected.json").write_text(json.dumps(selected, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_report(args) -> int:
    records = []
    for path in args.records:
        try:
            records.extend(metrics.read_records(Path(path).read_text()))
        except OSError as exc:
            raise UsageError(str(exc)) from None
    try:
        csv_text, json_text = metrics.generate_report(records, args.stratify, args.similarity_threshold,
                                                      args.rmsd_threshold)
    except metrics.MetricsError as exc:
        raise UsageError(str(exc)) from None
    if args.out_csv:
        _write(args.out_csv, csv_text)
    _write(args.out_json, json_text)
    return EXIT_OK


# --------------------------------------------------------------------------- parser

def _relax_flags(p) -> None:
    d = relax.RelaxConfig()
    p.add_argument("--k-backbone", type=float, default=d.k_backbone, help="backbone restraint, kJ/mol/nm^2")
    p.add_argument("--k-bond", type=float, default=d.k_bond, help="bond restraint, kJ/mol/nm^2")
    p.add_argument("--k-rep", type=float, default=d.k_rep, help="clash repulsion, kJ/mol/nm^2")
    p.add_argument("--clash-margin", type=float, default=d.clash_margin, help="repulsion onset margin, nm")
    p.add_argument("--gradient-tolerance", type=float, default=d.gradient_tolerance, help="kJ/mol/nm")
    p.add_argument("--max-iterations", type=int, default=d.max_iterations)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dockeval", description="Protein-ligand docking evaluation toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="JSON or TOML file with flag values (keys use underscores)")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("validate", help="run the validity checks")
    p.add_argument("--pred")
    p.add_argument("--ref")
    p.add_argument("--protein")
    p.add_argument("--dir", help="benchmark directory (batch mode)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("rmsd", help="symmetry-corrected ligand RMSD")
    p.add_argument("--pred")
    p.add_argument("--ref")
    p.add_argument("--dir")
    p.add_argument("--out")
    p.set_defaults(func=cmd_rmsd)

    p = sub.add_parser("evaluate", help="RMSD + validity for every entry, as a record CSV")
    p.add_argument("--dir", required=True)
    p.add_argument("--out")
    p.add_argument("--method", default="unknown")
    p.add_argument("--criterion", choices=metrics.CRITERIA, default=metrics.RMSD_ONLY)
    p.add_argument("--rmsd-threshold", type=float, default=metrics.RMSD_SUCCESS)
    p.add_argument("--target-map", help="CSV with entry_id,target_id")
    p.add_argument("--corpus", help="corpus index CSV for pocket similarity")
    p.add_argument("--pocket-cutoff", type=float, default=pocketsim.POCKET_CUTOFF)
    p.add_argument("--relax", action="store_true", help="relax each complex before scoring")
    _relax_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("relax", help="restrained minimisation of one complex")
    p.add_argument("--protein", required=True)
    p.add_argument("--ligand", required=True)
    p.add_argument("--out-protein", required=True)
    p.add_argument("--out-ligand", required=True)
    p.add_argument("--stats")
    _relax_flags(p)
    p.set_defaults(func=cmd_relax)

    p = sub.add_parser("crossdock", help="align candidates onto a reference and transfer ligands")
    p.add_argument("--reference-protein", required=True)
    p.add_argument("--reference-ligand", required=True)
    p.add_argument("--dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--max-ca-rmsd", type=float, default=crossdock.MAX_CA_RMSD)
    p.add_argument("--max-displacement", type=float, default=crossdock.MAX_LIGAND_DISPLACEMENT)
    p.set_defaults(func=cmd_crossdock)

    p = sub.add_parser("pocket-sim", help="maximum pocket similarity against a corpus")
    p.add_argument("--dir", required=True)
    p.add_argument("--corpus", required=True, help="CSV: entry_id,protein_path,ligand_path,release_date")
    p.add_argument("--released-before")
    p.add_argument("--cutoff", type=float, default=pocketsim.POCKET_CUTOFF)
    p.add_argument("--threshold", type=float, default=pocketsim.SIMILARITY_THRESHOLD)
    p.add_argument("--out")
    p.set_defaults(func=cmd_pocket_sim)

    p = sub.add_parser("curate", help="replay the dataset selection pipelines")
    p.add_argument("--manifest", required=True)
    p.add_argument("--pipeline", choices=(curate.SELF_DOCK, curate.CROSS_DOCK), default=curate.SELF_DOCK)
    p.add_argument("--structures", help="directory of {pdb}_{ccd}/protein.pdb + ligand_ref.sdf")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("report", help="aggregate record CSVs")
    p.add_argument("--records", nargs="+", required=True)
    p.add_argument("--stratify", action="store_true")
    p.add_argument("--similarity-threshold", type=float, default=metrics.SIMILARITY_THRESHOLD)
    p.add_argument("--rmsd-threshold", type=float, default=metrics.RMSD_SUCCESS)
    p.add_argument("--out-json")
    p.add_argument("--out-csv")
    p.set_defaults(func=cmd_report)
    return parser


def load_config(path: str) -> dict:
    text = Path(path).read_bytes()
    if path.endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        data = tomllib.loads(text.decode())
    else:
        data = json.loads(text)
    if not isinstance(data, dict):
        raise UsageError("config must be a key-value mapping")
    return {k.replace("-", "_"): v for k, v in data.items()}


def _apply_config(parser, argv, args):
    try:
        cfg = load_config(args.config)
    except (OSError, ValueError) as exc:
        raise UsageError(f"config {args.config}: {exc}") from None
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions} | {a.dest for a in parser._actions}
    unknown = sorted(set(cfg) - known)
    if unknown:
        raise UsageError(f"unknown config key(s): {', '.join(unknown)}")
    parser.set_defaults(**{k: v for k, v in cfg.items() if k in {a.dest for a in parser._actions}})
    sub.set_defaults(**cfg)
    # required flags satisfied by the config are no longer required
    for a in sub._actions:
        if a.dest in cfg:
            a.required = False
    return parser.parse_args(argv)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        if "--config" in argv or any(a.startswith("--config=") for a in argv):
            pre = _Parser(add_help=False)
            pre.add_argument("--config")
            known, _ = pre.parse_known_args(argv)
            cmd = next((a for a in argv if a in parser._subparsers._group_actions[0].choices), None)
            if cmd is None:
                raise UsageError("missing subcommand")
            args = argparse.Namespace(config=known.config, command=cmd)
            args = _apply_config(parser, argv, args)
        else:
            args = parser.parse_args(argv)
        _setup_logging(args.verbose)
        if args.workers < 1:
            raise UsageError("--workers must be at least 1")
        return args.func(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
