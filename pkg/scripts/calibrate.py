"""Regenerate src/gibbsddrm/data/calibration.json from the calibration seeds (1000 and up)."""

import json
import sys
from pathlib import Path

from gibbsddrm.bench import calibrate
from gibbsddrm.schemas import CALIBRATION_SCHEMA, validate

OUT = Path(__file__).resolve().parents[1] / "src" / "gibbsddrm" / "data" / "calibration.json"


def main():
    out = calibrate(log=lambda msg: print(msg, file=sys.stderr, flush=True))
    validate(out, CALIBRATION_SCHEMA)
    OUT.write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
