"""Per-residue protein embeddings from a descriptor fallback encoder.

The fallback encoder has no learned weights and downloads nothing.  Each
residue is mapped to a fixed vector of physicochemical properties, and a
short sinusoidal position code is appended so that downstream pooling can
distinguish otherwise identical residues.  The mapping is a pure function of
the sequence, so exporting the same sequence twice yields identical bytes.
"""

from __future__ import annotations

import numpy as np

from .errors import SequenceError

RESIDUE_CODES = "ACDEFGHIKLMNPQRSTVWY"

# Per-residue property rows.  Columns:
#   hydropathy (Kyte-Doolittle), residue mass (Da), net charge at pH 7,
#   polar flag, aromatic flag, side-chain volume (A^3), isoelectric point,
#   side-chain H-bond donors, side-chain H-bond acceptors,
#   helix propensity (kcal/mol, lower favors helix)
_PROPERTIES = {
    "A": (1.8, 89.1, 0.0, 0, 0, 88.6, 6.0, 0, 0, 0.00),
    "C": (2.5, 121.2, 0.0, 1, 0, 108.5, 5.1, 1, 0, 0.68),
    "D": (-3.5, 133.1, -1.0, 1, 0, 111.1, 2.8, 0, 2, 0.69),
    "E": (-3.5, 147.1, -1.0, 1, 0, 138.4, 3.2, 0, 2, 0.40),
    "F": (2.8, 165.2, 0.0, 0, 1, 189.9, 5.5, 0, 0, 0.54),
    "G": (-0.4, 75.1, 0.0, 0, 0, 60.1, 6.0, 0, 0, 1.00),
    "H": (-3.2, 155.2, 0.1, 1, 1, 153.2, 7.6, 1, 1, 0.61),
    "I": (4.5, 131.2, 0.0, 0, 0, 166.7, 6.0, 0, 0, 0.41),
    "K": (-3.9, 146.2, 1.0, 1, 0, 168.6, 9.7, 1, 0, 0.26),
    "L": (3.8, 131.2, 0.0, 0, 0, 166.7, 6.0, 0, 0, 0.21),
    "M": (1.9, 149.2, 0.0, 0, 0, 162.9, 5.7, 0, 0, 0.24),
    "N": (-3.5, 132.1, 0.0, 1, 0, 114.1, 5.4, 1, 1, 0.65),
    "P": (-1.6, 115.1, 0.0, 0, 0, 112.7, 6.3, 0, 0, 3.16),
    "Q": (-3.5, 146.2, 0.0, 1, 0, 143.8, 5.7, 1, 1, 0.39),
    "R": (-4.5, 174.2, 1.0, 1, 0, 173.4, 10.8, 3, 0, 0.21),
    "S": (-0.8, 105.1, 0.0, 1, 0, 89.0, 5.7, 1, 1, 0.50),
    "T": (-0.7, 119.1, 0.0, 1, 0, 116.1, 5.6, 1, 1, 0.66),
    "V": (4.2, 117.1, 0.0, 0, 0, 140.0, 6.0, 0, 0, 0.61),
    "W": (-0.9, 204.2, 0.0, 0, 1, 227.8, 5.9, 1, 0, 0.49),
    "Y": (-1.3, 181.2, 0.0, 1, 1, 193.6, 5.7, 1, 1, 0.53),
}

# Divisors that bring each property column into roughly unit range.
_SCALES = np.array(
    [5.0, 250.0, 1.0, 1.0, 1.0, 250.0, 12.0, 3.0, 2.0, 3.2], dtype=np.float64
)

POSITION_PAIRS = 3
PROTEIN_WIDTH = len(_SCALES) + 2 * POSITION_PAIRS

FEATURE_NAMES = [
    "hydropathy",
    "residue_mass",
    "net_charge",
    "polar",
    "aromatic",
    "side_chain_volume",
    "isoelectric_point",
    "hbond_donors",
    "hbond_acceptors",
    "helix_propensity",
] + [f"position_{fn}{k}" for k in range(POSITION_PAIRS) for fn in ("sin", "cos")]


def _position_code(n: int) -> np.ndarray:
    """Sinusoidal position features with geometrically spaced wavelengths."""
    idx = np.arange(n, dtype=np.float64)[:, None]
    out = np.empty((n, 2 * POSITION_PAIRS), dtype=np.float64)
    for k in range(POSITION_PAIRS):
        angle = idx[:, 0] / (50.0**k)
        out[:, 2 * k] = np.sin(angle)
        out[:, 2 * k + 1] = np.cos(angle)
    return out


def protein_embedding(sequence: str) -> np.ndarray:
    """Embed one sequence as a float32 matrix with one row per residue.

    Residue codes are case-insensitive.  An empty sequence or any character
    outside the 20 standard one-letter codes is rejected, with every bad
    index reported at once.
    """
    if not isinstance(sequence, str):
        raise SequenceError(f"sequence must be a string, got {type(sequence).__name__}")
    if len(sequence) == 0:
        raise SequenceError("sequence is empty")
    upper = sequence.upper()
    bad = [(i, sequence[i]) for i, ch in enumerate(upper) if ch not in _PROPERTIES]
    if bad:
        listing = ", ".join(f"{ch!r} at index {i}" for i, ch in bad)
        raise SequenceError(f"invalid residue codes: {listing}")
    table = np.array([_PROPERTIES[ch] for ch in upper], dtype=np.float64)
    table /= _SCALES
    out = np.concatenate([table, _position_code(len(upper))], axis=1)
    return out.astype(np.float32)


def read_fasta(path) -> list[tuple[str, str]]:
    """Read (record id, sequence) pairs from a FASTA-style text file.

    Record ids are the first whitespace-separated token after '>'.  Sequence
    lines are concatenated with surrounding whitespace stripped.  Duplicate
    ids and headerless leading sequence data are rejected.
    """
    records: list[tuple[str, str]] = []
    current_id: str | None = None
    chunks: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith(">"):
                if current_id is not None:
                    records.append((current_id, "".join(chunks)))
                header = line[1:].strip()
                if not header:
                    raise SequenceError(f"{path}: empty record header on line {line_no}")
                current_id = header.split()[0]
                chunks = []
            else:
                if current_id is None:
                    raise SequenceError(
                        f"{path}: sequence data before any '>' header on line {line_no}"
                    )
                chunks.append(line)
    if current_id is not None:
        records.append((current_id, "".join(chunks)))
    if not records:
        raise SequenceError(f"{path}: no records found")
    seen: set[str] = set()
    for rid, _ in records:
        if rid in seen:
            raise SequenceError(f"{path}: duplicate record id {rid!r}")
        seen.add(rid)
    return records
