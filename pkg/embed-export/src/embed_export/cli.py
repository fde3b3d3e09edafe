"""Command line front end for the exporters.

Exit codes follow the toolchain convention: 0 on success, 1 for usage
errors and anticipated failures (bad input files, unparseable structures),
2 for unexpected internal errors (with a traceback on stderr).
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback

from . import __version__
from .errors import ExportError, PocketError
from .jobs import ExportJob, available_encoders, run_export
from .manifest import build_dataset, load_description
from .pocket import pocket_from_coordinates


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; this toolchain uses 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="embed-export",
        description="Export per-residue and per-atom embedding files.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    def add_encoder_flags(p):
        p.add_argument(
            "--encoder",
            default="descriptor-fallback",
            help=f"encoder id (available: {', '.join(available_encoders())})",
        )
        p.add_argument("--device", default="cpu", help="compute device (default: cpu)")

    p_protein = sub.add_parser(
        "export-protein",
        help="embed sequences from a FASTA-style file, one file per record",
    )
    p_protein.add_argument("--fasta", required=True, help="input sequence file")
    p_protein.add_argument("--out", required=True, help="output directory")
    add_encoder_flags(p_protein)

    p_molecule = sub.add_parser(
        "export-molecule",
        help="embed structure strings from a text file, one file per record",
    )
    p_molecule.add_argument(
        "--structures", required=True, help="input file, one 'structure [id]' per line"
    )
    p_molecule.add_argument("--out", required=True, help="output directory")
    add_encoder_flags(p_molecule)

    p_pocket = sub.add_parser(
        "pocket",
        help="pick pocket residues by a distance-cutoff heuristic",
    )
    p_pocket.add_argument(
        "--coords",
        required=True,
        help="JSON file with 'residues' (n x 3) and 'ligand' (k x 3) coordinates",
    )
    p_pocket.add_argument("--cutoff", required=True, type=float, help="distance cutoff")

    p_dataset = sub.add_parser(
        "dataset",
        help="build a full dataset directory with manifest from a description file",
    )
    p_dataset.add_argument("--input", required=True, help="dataset description JSON")
    p_dataset.add_argument("--out", required=True, help="output directory")

    return parser


def _cmd_export(args, kind: str) -> int:
    input_path = args.fasta if kind == "protein" else args.structures
    job = ExportJob(
        input_path=input_path,
        kind=kind,
        out_dir=args.out,
        encoder=args.encoder,
        device=args.device,
    )
    for item in run_export(job):
        print(f"{item.record_id}: {item.rows} rows -> {item.path}")
    return 0


def _cmd_pocket(args) -> int:
    try:
        with open(args.coords, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as err:
        raise PocketError(f"{args.coords}: not valid JSON ({err})") from err
    if not isinstance(data, dict) or "residues" not in data or "ligand" not in data:
        raise PocketError(f"{args.coords}: expected an object with 'residues' and 'ligand'")
    indices = pocket_from_coordinates(data["residues"], data["ligand"], args.cutoff)
    print(json.dumps(indices))
    return 0


def _cmd_dataset(args) -> int:
    description = load_description(args.input)
    path = build_dataset(description, args.out)
    print(path)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: a command is required", file=sys.stderr)
        return 1
    try:
        if args.command == "export-protein":
            return _cmd_export(args, "protein")
        if args.command == "export-molecule":
            return _cmd_export(args, "molecule")
        if args.command == "pocket":
            return _cmd_pocket(args)
        return _cmd_dataset(args)
    except ExportError as err:
        print(f"{parser.prog}: error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"{parser.prog}: error: {err}", file=sys.stderr)
        return 1
    except SystemExit:
        raise
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
