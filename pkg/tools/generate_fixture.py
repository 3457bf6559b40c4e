"""Regenerate the bundled synthetic heart-disease fixture.

Produces a 303-row table with the 13-attribute schema, the "?" missing
marker, and the 0..4 raw label range of the public Cleveland file.  The
class marginals (164/55/36/35/13) and the missing-cell pattern (four "?"
in Ca, two in Thal) mirror the real file; feature values are sampled
from class-conditional distributions so the table is actually learnable:

- the low target bit (classes 1 and 3) drives Cp, Slope, Fbs;
- the high target bit (classes 2+) drives Restecg and part of Oldpeak;
- a severity score (the label itself) grades Age, Trestbps, Chol,
  Thalach, Oldpeak, Ca, and Thal;
- Exang carries the low bit XOR the high bit, an interaction term.

Both bits are monotone in their direct carriers, so a network with no
hidden layer can learn them; the low bit additionally depends on
severity non-monotonically (on for 1 and 3, off for 0 and 2), which only
a hidden layer can exploit.  Overlap between the conditionals sets the
noise floor.

Usage: python3 tools/generate_fixture.py [--seed 7] [--out PATH]
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

N_ROWS_PER_LABEL = {0: 164, 1: 55, 2: 36, 3: 35, 4: 13}
MISSING_CA_ROWS = 4
MISSING_THAL_ROWS = 2

DEFAULT_OUT = (
    Path(__file__).resolve().parent.parent
    / "src"
    / "heartnet"
    / "fixtures"
    / "cleveland_synthetic.csv"
)


def _clip_int(rng: np.random.Generator, mean: float, sd: float, lo: int, hi: int) -> int:
    return int(np.clip(round(rng.normal(mean, sd)), lo, hi))


def make_row(rng: np.random.Generator, label: int) -> list[str]:
    sev = min(label, 3)
    # label 4 rows sit a little further out along every severity axis
    sev_x = 3.4 if label == 4 else float(sev)
    bit1 = 1 if sev >= 2 else 0
    bit0 = sev & 1

    age = _clip_int(rng, 45 + 5.0 * sev_x, 6.5, 29, 77)
    sex = int(rng.random() < 0.58 + 0.06 * bit1)
    cp_probs = (0.08, 0.12, 0.25, 0.55) if bit0 else (0.28, 0.27, 0.27, 0.18)
    cp = int(rng.choice((1, 2, 3, 4), p=cp_probs))
    trestbps = _clip_int(rng, 122 + 5.5 * sev_x, 11.0, 94, 200)
    chol = _clip_int(rng, 228 + 10.0 * sev_x, 36.0, 126, 564)
    fbs = int(rng.random() < 0.12 + 0.14 * bit0)
    recg_probs = (0.22, 0.06, 0.72) if bit1 else (0.66, 0.04, 0.30)
    restecg = int(rng.choice((0, 1, 2), p=recg_probs))
    thalach = _clip_int(rng, 166 - 9.0 * sev_x - 6.0 * bit1, 13.0, 71, 202)
    # interaction carrier: informative for the low bit only once the high
    # bit is known, so it rewards a hidden layer
    exang = int(rng.random() < 0.18 + 0.52 * (bit0 ^ bit1))
    oldpeak = float(np.clip(round(rng.normal(0.30 + 0.70 * sev_x + 0.40 * bit1, 0.45), 1), 0.0, 6.2))
    slope_probs = (0.20, 0.50, 0.30) if bit0 else (0.50, 0.40, 0.10)
    slope = int(rng.choice((1, 2, 3), p=slope_probs))
    ca_probs_by_sev = (
        (0.80, 0.14, 0.04, 0.02),
        (0.55, 0.28, 0.12, 0.05),
        (0.25, 0.32, 0.27, 0.16),
        (0.10, 0.22, 0.33, 0.35),
    )
    ca = int(rng.choice((0, 1, 2, 3), p=ca_probs_by_sev[sev]))
    p7 = min(0.10 + 0.23 * sev_x, 0.85)
    thal = int(rng.choice((3, 6, 7), p=(1.0 - 0.10 - p7, 0.10, p7)))

    return [
        str(age),
        str(sex),
        str(cp),
        str(trestbps),
        str(chol),
        str(fbs),
        str(restecg),
        str(thalach),
        str(exang),
        f"{oldpeak:.1f}",
        str(slope),
        str(ca),
        str(thal),
        str(label),
    ]


def generate(seed: int) -> list[list[str]]:
    rng = np.random.default_rng(seed)
    labels = np.repeat(
        list(N_ROWS_PER_LABEL), [N_ROWS_PER_LABEL[k] for k in N_ROWS_PER_LABEL]
    )
    rng.shuffle(labels)
    rows = [make_row(rng, int(label)) for label in labels]

    # blank Ca in four rows and Thal in two others, like the real file
    blanked = rng.choice(len(rows), size=MISSING_CA_ROWS + MISSING_THAL_ROWS, replace=False)
    for i in blanked[:MISSING_CA_ROWS]:
        rows[i][11] = "?"
    for i in blanked[MISSING_CA_ROWS:]:
        rows[i][12] = "?"
    return rows


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--out", type=Path, default=DEFAULT_OUT)
    args = parser.parse_args()

    rows = generate(args.seed)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text("\n".join(",".join(row) for row in rows) + "\n", encoding="utf-8")

    label_counts = {}
    for row in rows:
        label_counts[row[13]] = label_counts.get(row[13], 0) + 1
    missing = sum(cell == "?" for row in rows for cell in row)
    print(f"wrote {args.out}: {len(rows)} rows, labels {sorted(label_counts.items())}, "
          f"{missing} missing cells")


if __name__ == "__main__":
    main()
