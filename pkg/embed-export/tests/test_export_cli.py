import json
import subprocess
import sys

import pytest

from embed_export.cli import main


def _write_inputs(tmp_path):
    fasta = tmp_path / "seqs.fasta"
    fasta.write_text(">t0\nMKTAYIAK\n>t1\nGDVEK\n")
    structures = tmp_path / "mols.txt"
    structures.write_text("CCO ethanol\nc1ccccc1 benzene\n")
    return fasta, structures


def test_help_exits_zero():
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0


def test_no_command_is_usage_error(capsys):
    assert main([]) == 1
    assert "a command is required" in capsys.readouterr().err


def test_unknown_command_exits_one():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1


def test_missing_required_flag_exits_one(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["export-protein", "--out", "somewhere"])
    assert exc.value.code == 1
    assert "--fasta" in capsys.readouterr().err


def test_export_protein_command(tmp_path, capsys):
    fasta, _ = _write_inputs(tmp_path)
    out = tmp_path / "targets"
    rc = main(["export-protein", "--fasta", str(fasta), "--out", str(out)])
    assert rc == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("t0: 8 rows")
    assert lines[1].startswith("t1: 5 rows")
    assert (out / "t0.mtpe").exists()
    assert (out / "t0.encoder.json").exists()
    assert (out / "targets.fragment.json").exists()


def test_export_molecule_command(tmp_path, capsys):
    _, structures = _write_inputs(tmp_path)
    out = tmp_path / "mols"
    rc = main(["export-molecule", "--structures", str(structures), "--out", str(out)])
    assert rc == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines == [
        f"ethanol: 3 rows -> {out / 'ethanol.mtpe'}",
        f"benzene: 6 rows -> {out / 'benzene.mtpe'}",
    ]


def test_unparseable_structure_exits_one(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("CCO a\nC1CC b\n")
    rc = main(["export-molecule", "--structures", str(bad), "--out", str(tmp_path / "o")])
    assert rc == 1
    err = capsys.readouterr().err
    assert "error:" in err
    assert "input 1 ('b')" in err


def test_missing_input_file_exits_one(tmp_path, capsys):
    rc = main(
        ["export-protein", "--fasta", str(tmp_path / "nope.fasta"), "--out", str(tmp_path)]
    )
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_unknown_encoder_exits_one(tmp_path, capsys):
    fasta, _ = _write_inputs(tmp_path)
    rc = main(
        [
            "export-protein",
            "--fasta",
            str(fasta),
            "--out",
            str(tmp_path / "t"),
            "--encoder",
            "giant-plm-v9",
        ]
    )
    assert rc == 1
    assert "descriptor-fallback" in capsys.readouterr().err


def test_pocket_command(tmp_path, capsys):
    coords = tmp_path / "coords.json"
    coords.write_text(
        json.dumps(
            {
                "residues": [[float(i), 0.0, 0.0] for i in range(10)],
                "ligand": [[3.5, 0.0, 0.0]],
            }
        )
    )
    rc = main(["pocket", "--coords", str(coords), "--cutoff", "1.6"])
    assert rc == 0
    assert json.loads(capsys.readouterr().out) == [2, 3, 4, 5]


def test_pocket_command_bad_json_exits_one(tmp_path, capsys):
    coords = tmp_path / "coords.json"
    coords.write_text("{not json")
    rc = main(["pocket", "--coords", str(coords), "--cutoff", "2.0"])
    assert rc == 1
    assert "not valid JSON" in capsys.readouterr().err


def test_pocket_command_missing_keys_exits_one(tmp_path, capsys):
    coords = tmp_path / "coords.json"
    coords.write_text(json.dumps({"residues": [[0.0, 0.0, 0.0]]}))
    rc = main(["pocket", "--coords", str(coords), "--cutoff", "2.0"])
    assert rc == 1
    assert "'residues' and 'ligand'" in capsys.readouterr().err


def test_dataset_command(tmp_path, capsys):
    description = {
        "task": "regression",
        "targets": {"t0": {"sequence": "MKTAYIAK", "pocket_indices": [1, 3]}},
        "samples": [
            {
                "sample_id": "s0",
                "structure": "CCO",
                "target_id": "t0",
                "label": 0.5,
                "split": "train",
            },
            {
                "sample_id": "s1",
                "structure": "CCC",
                "target_id": "t0",
                "label": 1.5,
                "split": "test",
            },
        ],
    }
    desc_path = tmp_path / "desc.json"
    desc_path.write_text(json.dumps(description))
    out = tmp_path / "corpus"
    rc = main(["dataset", "--input", str(desc_path), "--out", str(out)])
    assert rc == 0
    printed = capsys.readouterr().out.strip()
    manifest = json.loads((out / "manifest.json").read_text())
    assert printed.endswith("manifest.json")
    assert manifest["schema_version"] == 1
    assert manifest["targets"]["t0"]["pocket_indices"] == [1, 3]
    assert (out / "targets" / "t0.mtpe").exists()
    assert (out / "molecules" / "s0.mtpe").exists()


def test_dataset_command_bad_description_exits_one(tmp_path, capsys):
    desc_path = tmp_path / "desc.json"
    desc_path.write_text(json.dumps({"task": "regression", "targets": {}, "samples": []}))
    rc = main(["dataset", "--input", str(desc_path), "--out", str(tmp_path / "c")])
    assert rc == 1
    assert "non-empty" in capsys.readouterr().err


def test_internal_error_exits_two(tmp_path, capsys, monkeypatch):
    fasta, _ = _write_inputs(tmp_path)

    def boom(job):
        raise RuntimeError("wires crossed")

    monkeypatch.setattr("embed_export.cli.run_export", boom)
    rc = main(["export-protein", "--fasta", str(fasta), "--out", str(tmp_path / "t")])
    assert rc == 2
    assert "wires crossed" in capsys.readouterr().err


def test_console_script_runs():
    proc = subprocess.run(
        ["embed-export", "--version"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert "embed-export" in proc.stdout


def test_module_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "embed_export.cli", "--help"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
