"""Flat key-value configuration, run manifests, and CSV output."""

from __future__ import annotations

import json
import time
from pathlib import Path
from typing import Iterable, Mapping

from .errors import ConfigError

try:
    from importlib.metadata import version as _pkg_version

    CODE_VERSION = _pkg_version("kvicsek")
except Exception:  # pragma: no cover - metadata missing in odd installs
    CODE_VERSION = "0.1.0"


def parse_config(path: str | Path) -> dict[str, str]:
    """Parse one `key = value` per line; '#' starts a comment; no nesting."""
    out: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        out[key] = value.strip()
    return out


class Options:
    """Typed accessors over merged string options; raises ConfigError on misuse."""

    def __init__(self, raw: Mapping[str, str]):
        self.raw = dict(raw)
        self.resolved: dict[str, object] = {}

    def _record(self, key, value):
        self.resolved[key] = value
        return value

    def f(self, key: str, default: float) -> float:
        try:
            return self._record(key, float(self.raw.get(key, default)))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"option {key!r} must be a number, got {self.raw[key]!r}") from exc

    def i(self, key: str, default: int) -> int:
        try:
            return self._record(key, int(self.raw.get(key, default)))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"option {key!r} must be an integer, got {self.raw[key]!r}") from exc

    def s(self, key: str, default: str) -> str:
        return self._record(key, str(self.raw.get(key, default)))

    def grid3(self, key: str, default: str) -> tuple[int, int, int]:
        text = str(self.raw.get(key, default))
        parts = [p for p in text.replace(";", ",").split(",") if p.strip()]
        if len(parts) != 3:
            raise ConfigError(f"option {key!r} must be 'n1,n2,ntheta', got {text!r}")
        try:
            nums = tuple(int(p) for p in parts)
        except ValueError as exc:
            raise ConfigError(f"option {key!r} must hold integers, got {text!r}") from exc
        self._record(key, ",".join(str(n) for n in nums))
        return nums  # type: ignore[return-value]


def write_manifest(out_dir: Path, preset: str, seed: int, resolved: Mapping[str, object]) -> Path:
    """Write the manifest before any data product; returns its path."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "manifest.json"
        payload = {
            "preset": preset,
            "seed": seed,
            "config": dict(sorted(resolved.items(), key=lambda kv: kv[0])),
            "code_version": CODE_VERSION,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        }
        path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write manifest under {out_dir}: {exc}") from exc
    return path


def _format_cell(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def write_csv(path: Path, header: Iterable[str], rows: Iterable[Iterable]) -> Path:
    """Single header row, '.' decimal separator, floats formatted %.17g."""
    path = Path(path)
    lines = [",".join(header)]
    lines.extend(",".join(_format_cell(c) for c in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")
    return path
