# Copyright (C) 2026 The BSA Authors
# SPDX-License-Identifier: Apache-2.0
"""Run the CLI over a few configurations and validate every JSON file it writes."""

import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema

CONFIGS = [
    [],
    ["--mode", "two_stage", "--k", "2"],
    ["--r", "1", "--mode", "select_all", "--window", "none"],
    ["--sparsity", "0.9", "--mode", "two_stage", "--similarity", "dot"],
]


def main() -> int:
    bsa, schema_dir = sys.argv[1], pathlib.Path(sys.argv[2])
    schemas = {
        name: json.loads((schema_dir / f"{name}.schema.json").read_text())
        for name in ("q2k", "qsel", "report")
    }
    for schema in schemas.values():
        jsonschema.Draft202012Validator.check_schema(schema)

    with tempfile.TemporaryDirectory() as tmp:
        bundle = pathlib.Path(tmp) / "in.bsal"
        subprocess.run([bsa, "gen", "--seed", "8", "--shape", "4x8x8x8", "--out", str(bundle)], check=True)
        for i, extra in enumerate(CONFIGS):
            out_dir = pathlib.Path(tmp) / f"run{i}"
            cmd = [bsa, "run", "--bundle", str(bundle), "--out-dir", str(out_dir), "--skip-full", *extra]
            subprocess.run(cmd, check=True, stdout=subprocess.DEVNULL)
            for name, schema in schemas.items():
                doc = json.loads((out_dir / f"{name}.json").read_text())
                jsonschema.validate(doc, schema, cls=jsonschema.Draft202012Validator)
            print(f"ok: {' '.join(extra) or '(defaults)'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
