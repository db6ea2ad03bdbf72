"""Experiment plans: instances, algorithm variants and run counts."""

import re
from dataclasses import dataclass, field, replace
from enum import StrEnum
from pathlib import Path
from typing import cast

import pandas as pd

from rail_reschedule.evolution import (
    ConfigurationError,
    EAConfig,
    Replacement,
    TemperatureSchedule,
)
from rail_reschedule.inoculation import (
    PRESET_H,
    PRESET_T,
    GradualPerturbation,
    InitScheme,
    Layers,
    MassMutation,
    validate_scheme,
)
from rail_reschedule.instance_io import (
    InstanceParseError,
    InstanceValidationError,
    load_problem,
)
from rail_reschedule.scheduler import SchedulerConfig
from rail_reschedule.utils import console, parse_bool


# Constants
DEFAULT_RUNS = 11
RANDOM_INIT = "random"
REQUIRED_VARIANT_COLUMNS = {"variant_id", "temperature", "binomial", "init", "replacement"}
OPTIONAL_VARIANT_COLUMNS = {"tournament_size", "radius"}
VARIANT_ID_PATTERN = re.compile(r"^[A-Za-z0-9][A-Za-z0-9+_.-]*$")


class Timing(StrEnum):
    """What the ``elapsed_s`` trace column records."""

    WALL = "wall"
    NONE = "none"


@dataclass(frozen=True)
class Variant:
    """
    One algorithmic variant of the comparison.

    ``init = None`` starts from uniformly random permutations instead of an
    inoculated population.
    """

    variant_id: str
    temperature: TemperatureSchedule
    init: InitScheme | None
    replacement: Replacement = Replacement.PLUS
    tournament_size: int = 10
    radius: int | None = None

    @property
    def slug(self) -> str:
        """File-system friendly form of the id."""
        return re.sub(r"[^A-Za-z0-9_.-]", "_", self.variant_id.replace("+", "_plus_"))

    def ea_config(self, base: EAConfig, seed: int) -> EAConfig:
        """Return the shared EA settings specialised to this variant and seed."""
        return replace(
            base,
            replacement=self.replacement,
            tournament_size=self.tournament_size,
            radius=self.radius,
            temperature=self.temperature,
            seed=seed,
        )


CONSTANT_BINOMIAL = TemperatureSchedule.constant(4.0, binomial=True)
ANNEALED = TemperatureSchedule.annealed(3, 50.0, 4.0, 0.2)

PRESETS: dict[str, Variant] = {
    "MM": Variant("MM", CONSTANT_BINOMIAL, MassMutation(3)),
    "GPer": Variant("GPer", CONSTANT_BINOMIAL, GradualPerturbation(0, 1)),
    "R": Variant("R", ANNEALED, MassMutation(3)),
    "H": Variant("H", CONSTANT_BINOMIAL, PRESET_H, Replacement.EPT),
    "T": Variant("T", CONSTANT_BINOMIAL, PRESET_T, Replacement.EPT),
    "H+R": Variant("H+R", ANNEALED, PRESET_H, Replacement.EPT),
    "T+R": Variant("T+R", ANNEALED, PRESET_T, Replacement.EPT),
    "RANDOM": Variant("RANDOM", CONSTANT_BINOMIAL, None),
}


def _numbers(text: str) -> list[str]:
    return [part.strip() for part in text.strip().strip("()").split(",") if part.strip()]


def parse_init(text: str) -> InitScheme | None:
    """
    Parse an initialisation column value.

    ``3`` is mass mutation with ``pR = 3``, ``(0,1)`` gradual perturbation
    from 0 in steps of 1, ``(50/3,50/500)`` two layers of 50 % each and
    ``random`` a non-inoculated population.

    Raises
    ------
    ValueError
        If the text matches none of these forms.
    """
    cleaned = text.strip()
    if cleaned.lower() == RANDOM_INIT:
        return None
    if not cleaned.startswith("("):
        return MassMutation(int(cleaned))
    parts = _numbers(cleaned)
    if parts and all("/" in part for part in parts):
        layers = []
        for part in parts:
            percent, _, pr = part.partition("/")
            layers.append((float(percent), int(pr)))
        return Layers(tuple(layers))
    if len(parts) == 2:
        return GradualPerturbation(int(parts[0]), int(parts[1]))
    raise ValueError(f"Unrecognised init scheme: {text!r}")


def parse_temperature(text: str, binomial: bool) -> TemperatureSchedule:
    """
    Parse a temperature column value.

    A bare number is a constant strength; ``(n0,T0,Tinf,gamma)`` an
    annealed one.

    Raises
    ------
    ValueError
        If the text is malformed or the parameters are inconsistent.
    """
    cleaned = text.strip()
    if not cleaned.startswith("("):
        return TemperatureSchedule.constant(float(cleaned), binomial)
    parts = _numbers(cleaned)
    if len(parts) != 4:
        raise ValueError(f"Annealed temperature needs 4 values: {text!r}")
    return TemperatureSchedule.annealed(
        int(parts[0]), float(parts[1]), float(parts[2]), float(parts[3]), binomial
    )


def _cell(row: pd.Series, column: str) -> str | None:
    if column not in row or pd.isna(row[column]) or str(row[column]).strip() == "":
        return None
    return str(row[column]).strip()


def validate_variants_frame(df: pd.DataFrame) -> tuple[bool, list[str]]:
    """
    Validate a variant table.

    Parameters
    ----------
    df : pd.DataFrame
        DataFrame read from a variant CSV.

    Returns
    -------
    tuple[bool, list[str]]
        Tuple of (is_valid, list of error messages).
    """
    errors = []

    missing_columns = REQUIRED_VARIANT_COLUMNS - set(df.columns)
    if missing_columns:
        errors.append(f"Missing required columns: {sorted(missing_columns)}")
        return False, errors

    extra_columns = set(df.columns) - REQUIRED_VARIANT_COLUMNS - OPTIONAL_VARIANT_COLUMNS
    if extra_columns:
        console.print(
            f"[yellow]Warning:[/yellow] Extra columns will be ignored: {sorted(extra_columns)}"
        )

    for idx in range(len(df)):
        row = df.iloc[idx]
        row_num = idx + 2  # +2 because of 0-indexing and header row

        variant_id = _cell(row, "variant_id")
        if variant_id is None:
            errors.append(f"Row {row_num}: Missing variant_id")
        elif not VARIANT_ID_PATTERN.match(variant_id):
            errors.append(f"Row {row_num}: Invalid variant_id '{variant_id}'")

        binomial = False
        raw_binomial = _cell(row, "binomial")
        try:
            binomial = parse_bool(raw_binomial or "false")
        except ValueError:
            errors.append(f"Row {row_num}: Invalid binomial '{raw_binomial}'")

        raw_temperature = _cell(row, "temperature")
        if raw_temperature is None:
            errors.append(f"Row {row_num}: Missing temperature")
        else:
            try:
                parse_temperature(raw_temperature, binomial)
            except ValueError as e:
                errors.append(f"Row {row_num}: Invalid temperature '{raw_temperature}': {e}")

        raw_init = _cell(row, "init")
        if raw_init is None:
            errors.append(f"Row {row_num}: Missing init")
        else:
            try:
                scheme = parse_init(raw_init)
            except ValueError:
                errors.append(f"Row {row_num}: Invalid init '{raw_init}'")
            else:
                if scheme is not None:
                    is_valid, scheme_errors = validate_scheme(scheme)
                    if not is_valid:
                        errors.extend(f"Row {row_num}: {error}" for error in scheme_errors)

        raw_replacement = _cell(row, "replacement")
        if raw_replacement not in {item.value for item in Replacement}:
            errors.append(f"Row {row_num}: Invalid replacement '{raw_replacement}'")

        for column in sorted(OPTIONAL_VARIANT_COLUMNS):
            raw = _cell(row, column)
            if raw is not None and (not raw.isdigit() or int(raw) < 1):
                errors.append(f"Row {row_num}: {column} must be a positive integer")

    # Check for duplicate variant ids
    duplicates = df[df.duplicated(subset=["variant_id"], keep=False)]
    if not duplicates.empty:
        errors.append(
            f"Duplicate variant_id values: {sorted(set(duplicates['variant_id'].astype(str)))}"
        )

    return len(errors) == 0, errors


def variant_from_row(row: pd.Series) -> Variant:
    """Build a variant from a validated table row."""
    binomial = parse_bool(_cell(row, "binomial") or "false")
    tournament_size = _cell(row, "tournament_size")
    radius = _cell(row, "radius")
    return Variant(
        variant_id=cast(str, _cell(row, "variant_id")),
        temperature=parse_temperature(cast(str, _cell(row, "temperature")), binomial),
        init=parse_init(cast(str, _cell(row, "init"))),
        replacement=Replacement(cast(str, _cell(row, "replacement"))),
        tournament_size=int(tournament_size) if tournament_size else 10,
        radius=int(radius) if radius else None,
    )


def load_variants_csv(csv_path: str | Path) -> list[Variant]:
    """
    Read algorithm variants from a CSV file.

    Parameters
    ----------
    csv_path : str | Path
        File with columns ``variant_id, temperature, binomial, init,
        replacement`` and optionally ``tournament_size, radius``.

    Returns
    -------
    list[Variant]
        Variants in file order.

    Raises
    ------
    FileNotFoundError
        If the file does not exist.
    ConfigurationError
        If the table fails validation.
    """
    path = Path(csv_path)
    if not path.exists():
        raise FileNotFoundError(f"Variant file not found: {path}")
    df = pd.read_csv(path, dtype=str)
    is_valid, errors = validate_variants_frame(df)
    if not is_valid:
        raise ConfigurationError("; ".join(errors))
    return [variant_from_row(df.iloc[idx]) for idx in range(len(df))]


def select_presets(variant_ids: list[str]) -> list[Variant]:
    """
    Look up preset variants by id.

    Raises
    ------
    ConfigurationError
        If an id is not a known preset.
    """
    unknown = [variant_id for variant_id in variant_ids if variant_id not in PRESETS]
    if unknown:
        raise ConfigurationError(
            f"Unknown variants {unknown}; choose from {', '.join(PRESETS)}"
        )
    return [PRESETS[variant_id] for variant_id in variant_ids]


@dataclass(frozen=True)
class ExperimentPlan:
    """
    A battery of seeded runs.

    Every (instance, variant, run) triple is one cell. Run ``k`` of every
    variant uses seed ``base_seed + k``, so variants are compared on common
    random streams.

    Parameters
    ----------
    instances : tuple[Path, ...]
        Instance files.
    variants : tuple[Variant, ...]
        Algorithm variants.
    runs : int
        Runs per (instance, variant).
    base_seed : int
        Seed of run 0.
    ea : EAConfig
        Population sizes, generation count, time budget and evaluation
        threads shared by all variants.
    scheduler : SchedulerConfig
        Decoder settings.
    inoculant_ea : EAConfig
        Settings of the inoculant pre-solve.
    timing : Timing
        Whether traces record wall-clock time.
    cell_workers : int
        Cells executed concurrently.
    """

    instances: tuple[Path, ...]
    variants: tuple[Variant, ...]
    runs: int = DEFAULT_RUNS
    base_seed: int = 0
    ea: EAConfig = field(default_factory=EAConfig)
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    inoculant_ea: EAConfig = field(default_factory=EAConfig)
    timing: Timing = Timing.NONE
    cell_workers: int = 1

    def seed_for(self, run: int) -> int:
        """Seed of run ``run``."""
        return self.base_seed + run

    @property
    def cell_count(self) -> int:
        """Number of (instance, variant, run) cells."""
        return len(self.instances) * len(self.variants) * self.runs


def validate_plan(plan: ExperimentPlan) -> tuple[bool, list[str]]:
    """
    Validate an experiment plan, loading every instance once.

    Parameters
    ----------
    plan : ExperimentPlan
        Plan to check.

    Returns
    -------
    tuple[bool, list[str]]
        Tuple of (is_valid, list of error messages).
    """
    errors = []
    if plan.runs < 1:
        errors.append("At least one run per variant is required")
    if plan.cell_workers < 1:
        errors.append("cell_workers must be at least 1")
    if not plan.variants:
        errors.append("Plan has no variants")
    if not plan.instances:
        errors.append("Plan has no instances")

    variant_ids = [variant.variant_id for variant in plan.variants]
    if len(set(variant_ids)) != len(variant_ids):
        errors.append("Variant ids must be unique")
    slugs = [variant.slug for variant in plan.variants]
    if len(set(slugs)) != len(slugs):
        errors.append("Variant ids must stay unique once made file-system safe")
    for variant in plan.variants:
        if variant.init is not None:
            is_valid, scheme_errors = validate_scheme(variant.init)
            if not is_valid:
                errors.extend(f"Variant {variant.variant_id}: {e}" for e in scheme_errors)

    stems = [Path(path).stem for path in plan.instances]
    if len(set(stems)) != len(stems):
        errors.append("Instance file names must be unique")
    for path in plan.instances:
        try:
            load_problem(path)
        except FileNotFoundError:
            errors.append(f"Instance not found: {path}")
        except (InstanceParseError, InstanceValidationError) as e:
            errors.append(f"Instance {path} is invalid: {e}")

    return len(errors) == 0, errors
