import logging
from importlib import resources
from pathlib import Path
from typing import Any

import yaml
from pydantic import ValidationError

from .errors import CaseParseError, SchemaVersionError
from .schemas import SCHEMA_VERSION, Case, ForeseenLmps
from .validation import ensure_valid

logger = logging.getLogger(__name__)

BUNDLED_CASES = ("oracle", "rts24_dh")


def _read_yaml(path: Path) -> Any:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CaseParseError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark is not None else ""
        raise CaseParseError(f"{path}: invalid YAML{where}: {getattr(exc, 'problem', exc)}") from exc


def _field_errors(exc: ValidationError) -> list[str]:
    return [f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors()]


def parse_case(data: Any, source: str = "<case>") -> Case:
    if not isinstance(data, dict):
        raise CaseParseError(f"{source}: a case file must be a mapping")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(f"{source}: schema_version {version!r} is not supported (expected {SCHEMA_VERSION})")
    try:
        case = Case.model_validate(data)
    except ValidationError as exc:
        raise CaseParseError(_field_errors(exc)) from exc
    return ensure_valid(case)


def load_case(path: Path | str) -> Case:
    """Parse, validate and return the case stored at `path`."""
    path = Path(path)
    case = parse_case(_read_yaml(path), str(path))
    logger.info("loaded case %s (%d periods, %d heat units) from %s",
                case.name, len(case.periods), len(case.heat_units), path)
    return case


def load_profile(path: Path | str) -> ForeseenLmps:
    """Foreseen-LMP profile: `default` and/or `by_bus` series."""
    path = Path(path)
    data = _read_yaml(path)
    try:
        return ForeseenLmps.model_validate(data or {})
    except ValidationError as exc:
        raise CaseParseError(_field_errors(exc)) from exc


def with_profile(case: Case, profile: ForeseenLmps) -> Case:
    """Copy of the case bidding on another foreseen-LMP profile, revalidated."""
    data = case.model_dump(mode="json")
    data["bids"]["foreseen_lmps"] = profile.model_dump(mode="json")
    return parse_case(data, case.name)


def bundled_case_path(name: str) -> Path:
    if name not in BUNDLED_CASES:
        raise CaseParseError(f"unknown bundled case {name!r}; available: {', '.join(BUNDLED_CASES)}")
    return Path(str(resources.files("heatuc") / "data" / "cases" / f"{name}.yaml"))


def bundled_case(name: str) -> Case:
    return load_case(bundled_case_path(name))


def resolve_case_path(value: str) -> Path:
    """A file path, or the name of a bundled case."""
    path = Path(value)
    if path.exists() or value not in BUNDLED_CASES:
        return path
    return bundled_case_path(value)
