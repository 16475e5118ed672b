"""CSV logs with a versioned schema header, and run manifests."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

MANIFEST = "manifest.json"


def _fmt(v) -> str:
    if isinstance(v, bool) or v is None:
        return "" if v is None else str(int(v))
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    if hasattr(v, "item"):
        return _fmt(v.item())
    return str(v)


def write_csv(path, schema: str, columns, rows) -> Path:
    """Write ``#schema=<schema>`` then a header row and data rows."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"#schema={schema}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path) -> tuple[str, dict[str, list[str]]]:
    """Return ``(schema, {column: values})``."""
    with Path(path).open(newline="") as fh:
        first = fh.readline().rstrip("\n")
        if not first.startswith("#schema="):
            raise ValueError(f"{path}: missing #schema= header")
        reader = csv.reader(fh)
        header = next(reader)
        cols: dict[str, list[str]] = {h: [] for h in header}
        for row in reader:
            for h, v in zip(header, row):
                cols[h].append(v)
    return first[len("#schema="):], cols


def sha256(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(run_dir, extra: dict | None = None) -> Path:
    run_dir = Path(run_dir)
    files = sorted(p for p in run_dir.rglob("*") if p.is_file() and p.name != MANIFEST)
    doc = {
        "files": {p.relative_to(run_dir).as_posix(): sha256(p) for p in files},
        **(extra or {}),
    }
    out = run_dir / MANIFEST
    out.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return out


def verify_manifest(run_dir) -> list[str]:
    """Problems found: files missing from the manifest, absent, or with a stale checksum."""
    run_dir = Path(run_dir)
    listed = json.loads((run_dir / MANIFEST).read_text())["files"]
    problems = []
    present = {p.relative_to(run_dir).as_posix() for p in run_dir.rglob("*")
               if p.is_file() and p.name != MANIFEST}
    for name in sorted(present - set(listed)):
        problems.append(f"unlisted: {name}")
    for name, digest in sorted(listed.items()):
        if name not in present:
            problems.append(f"missing: {name}")
        elif sha256(run_dir / name) != digest:
            problems.append(f"checksum mismatch: {name}")
    return problems
