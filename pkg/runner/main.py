"""
Точка входа: python -m runner.main <subcommand> ...

Код выхода: 0 - все проверки прошли, 1 - нарушено свойство или ошибка
вычисления, 2 - ошибка использования (неизвестный ключ, нет seed, ...).
"""
import argparse
import csv
import logging
import os
import platform
import sys
import time
from datetime import datetime, timezone
from fractions import Fraction
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from dotenv import load_dotenv
from pydantic import ValidationError

from core import __version__
from core.exceptions import TCSpaceError, UsageError
from core.schemas import CheckSummary, RunConfigBase, RunManifest
from core.settings import get_settings

from .plots import PLOTTERS
from .router import Route, router

# Загрузка .env
load_dotenv()

# Настройка логирования
logging.basicConfig(
    level=os.getenv("LOG_LEVEL", "INFO"),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[logging.StreamHandler()]
)
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

VERSIONED_PACKAGES = ("numpy", "scipy", "pydantic", "pydantic-settings", "matplotlib")


# ==================== CONFIG ====================

def read_flat_config(file_path: Path) -> Dict[str, str]:
    """Строки `key = value`; `#` - комментарий; пустые строки пропускаются"""
    try:
        text = Path(file_path).read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"Cannot read config file {file_path}: {e}") from e
    values: Dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise UsageError(f"{file_path}:{number}: expected 'key = value', got {raw.strip()!r}")
        if key in values:
            raise UsageError(f"{file_path}:{number}: key {key!r} is set twice")
        values[key] = value.strip()
    return values


def build_config(route: Route, args: argparse.Namespace) -> RunConfigBase:
    """Файл конфигурации, затем флаги командной строки; проверка моделью"""
    values: Dict[str, Any] = {}
    if args.config is not None:
        values.update(read_flat_config(args.config))
    if args.seed is not None:
        values["seed"] = args.seed
    for flag in route.flags:
        value = getattr(args, flag, None)
        if value is not None:
            values[flag] = value

    valid = list(route.config_model.model_fields)
    unknown = sorted(set(values) - set(valid))
    if unknown:
        raise UsageError(
            f"Unknown config key(s) for {route.name}: {', '.join(unknown)}. "
            f"Valid keys: {', '.join(valid)}"
        )
    return route.config_model.model_validate(values)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m runner.main",
        description="Verification and experiment runner for dynamic programming on path spaces",
    )
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for route in router.routes.values():
        sub = commands.add_parser(route.name, help=route.summary, description=route.summary)
        sub.add_argument("--seed", type=int, help="master seed (required)")
        sub.add_argument("--config", type=Path, help="flat key = value config file")
        sub.add_argument("--out", "--report", dest="out", type=Path, help="CSV report path")
        sub.add_argument("--plot", action="store_true", help="also write an SVG next to the report")
        for flag in route.flags:
            sub.add_argument(f"--{flag}", type=int)
    return parser


# ==================== OUTPUT ====================

def format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, Fraction):
        return str(value)
    return str(value)


def write_csv(file_path: Path, columns: Sequence[str], rows: List[Dict[str, Any]]) -> Path:
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with open(file_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_cell(row.get(column)) for column in columns])
    return file_path


def package_versions() -> Dict[str, str]:
    versions = {"python": platform.python_version(), "tcdpp": __version__}
    for name in VERSIONED_PACKAGES:
        try:
            versions[name] = version(name)
        except PackageNotFoundError:
            versions[name] = "not installed"
    return versions


def write_manifest(file_path: Path, manifest: RunManifest) -> Path:
    file_path.parent.mkdir(parents=True, exist_ok=True)
    file_path.write_text(manifest.model_dump_json(indent=2), encoding="utf-8")
    return file_path


# ==================== RUN ====================

def execute(route: Route, config: RunConfigBase, out: Path, plot: bool) -> int:
    started_at = datetime.now(timezone.utc)
    start = time.perf_counter()
    logger.info("=" * 60)
    logger.info(f"{route.name}: seed={config.seed}")
    logger.info("=" * 60)

    exit_code = EXIT_OK
    outputs: List[Path] = []
    try:
        result = route.handler(config)
        outputs.append(write_csv(out, route.columns, result.rows))
        if result.checks and route.name != "verify-core":
            checks_path = out.with_name(f"{out.stem}.checks.csv")
            outputs.append(write_csv(
                checks_path, tuple(CheckSummary.model_fields), [c.model_dump() for c in result.checks],
            ))
        if plot and route.name in PLOTTERS:
            outputs.append(PLOTTERS[route.name](result.plots, out.with_suffix(".svg")))
        if not result.ok:
            exit_code = EXIT_FAILURE
    except UsageError:
        raise
    except TCSpaceError as e:
        logger.error(f"Failed to run {route.name}: {e}")
        exit_code = EXIT_FAILURE

    manifest = RunManifest(
        command=route.name,
        config=config.model_dump(mode="json"),
        seed=config.seed,
        versions=package_versions(),
        started_at=started_at,
        wall_time_sec=time.perf_counter() - start,
        outputs=[str(p) for p in outputs],
        exit_code=exit_code,
    )
    manifest_path = write_manifest(out.with_name(f"{out.stem}.manifest.json"), manifest)

    logger.info("=" * 60)
    logger.info(
        f"{route.name}: {'all checks passed' if exit_code == EXIT_OK else 'FAILED'} "
        f"in {manifest.wall_time_sec:.1f}s; manifest {manifest_path}"
    )
    logger.info("=" * 60)
    return exit_code


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Разбор аргументов, проверка конфигурации и запуск подкоманды"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    route = router.get(args.command)
    out = args.out or get_settings().output_dir / f"{route.name}.csv"
    try:
        config = build_config(route, args)
        return execute(route, config, out, args.plot)
    except UsageError as e:
        logger.error(f"Usage error: {e}")
        return EXIT_USAGE
    except ValidationError as e:
        logger.error(f"Invalid configuration for {route.name}: {e}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(run())
