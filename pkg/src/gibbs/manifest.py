from pathlib import Path
from typing import Any


def flatten(data: dict[str, Any], prefix: str = "") -> dict[str, Any]:
    flat = {}
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(flatten(value, name + "."))
        elif isinstance(value, (list, tuple)) and any(isinstance(item, dict) for item in value):
            for i, item in enumerate(value):
                flat.update(flatten(item, f"{name}.{i}."))
        else:
            flat[name] = value

    return flat


def format_value(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"

    if isinstance(value, (list, tuple)):
        return ",".join(format_value(item) for item in value)

    return str(value)


def dumps_manifest(data: dict[str, Any]) -> str:
    return "".join(f"{key}={format_value(value)}\n" for key, value in sorted(flatten(data).items()))


def loads_manifest(text: str) -> dict[str, str]:
    entries = {}
    for line in text.splitlines():
        if line.strip() == "":
            continue

        key, value = line.split("=", 1)
        entries[key.strip()] = value.strip()

    return entries


def write_manifest(path: Path, data: dict[str, Any]) -> None:
    path.write_text(dumps_manifest(data), encoding="utf-8")


def read_manifest(path: Path) -> dict[str, str]:
    return loads_manifest(path.read_text(encoding="utf-8"))
