import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

from energy import ActivityModel, CloudModel, EnergyModel, FiniteRangeModel, PairwiseModel, SumModel
from errors import ConfigError, DivergentTailError, GibbsError
from geometry import SUPPORTED_DIMENSIONS, Box, as_point
from potentials import ExponentialPotential, Potential, PowerTailPotential, StepPotential
from sampler import DEFAULT_BURN_IN, DEFAULT_PROPOSAL_MIX, DEFAULT_THINNING, METHODS, SamplerSpec
from testfunctions import FUNCTIONS, LocalFunction, standard_battery

MODEL_KINDS = ("pairwise", "cloud", "finite_range", "activity", "sum")
POTENTIAL_KINDS = ("power", "exponential", "step")
REPORTS = ("intensity", "partition", "dlr", "stationarize")
METHOD_KEYS = {
    "rejection": ("max_attempts",),
    "mcmc": ("burn_in", "thinning", "sweeps", "birth", "death", "move"),
}

MODEL_FIELDS = ("kind", "potential", "beta", "p", "kappa", "range", "hardcore", "R", "quad_tol", "theta", "empty_energy", "stability_A")

KEYS = {
    "dimension", "seed", "output_dir",
    "window.n", "window.lower", "window.upper",
    *(f"model.{name}" for name in MODEL_FIELDS), "model.terms",
    "sampler.method", "sampler.samples", "sampler.max_attempts", "sampler.sweeps", "sampler.burn_in",
    "sampler.thinning", "sampler.chains", "sampler.birth", "sampler.death", "sampler.move",
    "diagnostics.reports", "diagnostics.delta.half_width", "diagnostics.delta.centers", "diagnostics.functions",
    "diagnostics.radius", "diagnostics.cap", "diagnostics.eps", "diagnostics.inner_draws", "diagnostics.xi_cap",
    "diagnostics.partition_draws", "diagnostics.exteriors", "diagnostics.copies", "diagnostics.samples_dir",
}

TERM_KEY = re.compile(r"^model\.term\.(\d+)\.(\w+)$")
SECTION = re.compile(r"^\[([\w.]+)\]$")


@dataclass(frozen=True)
class Entry:
    value: str
    line: int


@dataclass
class DiagnosticsConfig:
    reports: tuple[str, ...] = ("intensity",)
    half_width: float = 0.5
    centers: tuple[tuple[float, ...], ...] = ()
    functions: tuple[str, ...] = ("count", "vacancy", "pairs", "nn")
    radius: float = 0.25
    cap: int = 20
    eps: float = 1e-12
    inner_draws: int = 200
    xi_cap: float = 0.0
    partition_draws: int = 2000
    exteriors: int = 20
    copies: int = 0
    samples_dir: Optional[Path] = None

    def deltas(self) -> list[Box]:
        return [Box(tuple(c - self.half_width for c in center), tuple(c + self.half_width for c in center)) for center in self.centers]

    def battery(self) -> list[tuple[Box, LocalFunction]]:
        return standard_battery(self.deltas(), self.functions, self.radius, self.cap)


@dataclass
class ExperimentConfig:
    dimension: int
    seed: int
    output_dir: Path
    window: Box
    model: EnergyModel
    sampler: dict[str, Any]
    diagnostics: DiagnosticsConfig
    entries: dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_file(cls, path: Path) -> "ExperimentConfig":
        return parse_config(read_config_text(path), path.parent)

    def sampler_spec(self, seed: Optional[int] = None) -> SamplerSpec:
        options = dict(self.sampler)
        method = options.pop("method")
        samples = options.pop("samples")

        return SamplerSpec.with_defaults(self.model, self.window, method, self.seed if seed is None else seed, samples, **options)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        entries = {**self.entries, "seed": str(seed)}
        return ExperimentConfig(self.dimension, seed, self.output_dir, self.window, self.model, self.sampler, self.diagnostics, entries)

    def with_output_dir(self, output_dir: Path) -> "ExperimentConfig":
        entries = {**self.entries, "output_dir": str(output_dir)}
        return ExperimentConfig(self.dimension, self.seed, output_dir, self.window, self.model, self.sampler, self.diagnostics, entries)


def read_config_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file: {e.strerror}", field=str(path)) from e


def tokenize(text: str, violations: list[ConfigError]) -> dict[str, Entry]:
    entries: dict[str, Entry] = {}
    section = ""

    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line == "":
            continue

        header = SECTION.match(line)
        if header is not None:
            section = header.group(1) + "."
            continue

        if "=" not in line:
            violations.append(ConfigError("expected 'key = value'", line=number))
            continue

        key, value = (part.strip() for part in line.split("=", 1))
        key = section + key

        if key not in KEYS and not is_term_key(key):
            violations.append(ConfigError("unknown key", field=key, line=number))
            continue

        if key in entries:
            violations.append(ConfigError(f"duplicate key, first set on line {entries[key].line}", field=key, line=number))
            continue

        entries[key] = Entry(value, number)

    return entries


def is_term_key(key: str) -> bool:
    match = TERM_KEY.match(key)
    return match is not None and match.group(2) in MODEL_FIELDS


class Fields:
    """Typed access to parsed entries; conversion failures are collected rather than raised."""

    def __init__(self, entries: dict[str, Entry], violations: list[ConfigError]) -> None:
        self.entries = entries
        self.violations = violations

    def line(self, key: str) -> Optional[int]:
        return self.entries[key].line if key in self.entries else None

    def error(self, key: str, message: str) -> None:
        self.violations.append(ConfigError(message, field=key, line=self.line(key)))

    def get(self, key: str, convert: Callable[[str], Any], default: Any = None, required: bool = False) -> Any:
        if key not in self.entries:
            if required:
                self.error(key, "missing required key")
            return default

        try:
            return convert(self.entries[key].value)
        except (ValueError, GibbsError) as e:
            self.error(key, f"invalid value '{self.entries[key].value}' ({e})")
            return default

    def positive(self, key: str, convert: Callable[[str], Any], default: Any, allow_zero: bool = False) -> Any:
        value = self.get(key, convert, default)
        if value is not None and not (value >= 0 if allow_zero else value > 0):
            self.error(key, f"out of range, must be {'nonnegative' if allow_zero else 'positive'}, got {value}")
            return default

        return value


def parse_floats(value: str) -> tuple[float, ...]:
    return tuple(as_point([float(part) for part in value.split(",")]))


def parse_names(value: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in value.split(",") if part.strip() != "")


def parse_points(value: str) -> tuple[tuple[float, ...], ...]:
    return tuple(parse_floats(part) for part in value.split(";") if part.strip() != "")


def build_potential(fields: Fields, prefix: str) -> Optional[Potential]:
    kind = fields.get(f"{prefix}.potential", str, required=True)
    if kind is None:
        return None

    beta = fields.get(f"{prefix}.beta", float, 1.0)
    hardcore = fields.positive(f"{prefix}.hardcore", float, 0.0, allow_zero=True)

    if kind == "power":
        p = fields.positive(f"{prefix}.p", float, None)
        return PowerTailPotential(beta, p, hardcore) if p is not None else None
    elif kind == "exponential":
        kappa = fields.positive(f"{prefix}.kappa", float, None)
        return ExponentialPotential(beta, kappa, hardcore) if kappa is not None else None
    elif kind == "step":
        step_range = fields.positive(f"{prefix}.range", float, None)
        return StepPotential(beta, step_range, hardcore) if step_range is not None else None

    fields.error(f"{prefix}.potential", f"unknown potential '{kind}', expected one of {', '.join(POTENTIAL_KINDS)}")
    return None


def build_model(fields: Fields, prefix: str, dim: int) -> Optional[EnergyModel]:
    kind = fields.get(f"{prefix}.kind", str, required=True)
    if kind is None:
        return None

    if kind not in MODEL_KINDS:
        fields.error(f"{prefix}.kind", f"unknown model kind '{kind}', expected one of {', '.join(MODEL_KINDS)}")
        return None

    stability_A = fields.get(f"{prefix}.stability_A", float)

    try:
        if kind == "activity":
            return ActivityModel(fields.get(f"{prefix}.theta", float, 0.0), dim, fields.get(f"{prefix}.empty_energy", float, 0.0))

        if kind == "sum":
            if prefix != "model":
                fields.error(f"{prefix}.kind", "sum terms cannot be sums themselves")
                return None

            count = fields.positive("model.terms", int, None)
            if count is None:
                fields.error("model.terms", "sum models need a positive term count")
                return None

            terms = [build_model(fields, f"model.term.{i}", dim) for i in range(count)]
            return SumModel(terms) if all(term is not None for term in terms) else None

        potential = build_potential(fields, prefix)

        if kind == "cloud":
            R = fields.positive(f"{prefix}.R", float, None)
            if R is None:
                if f"{prefix}.R" not in fields.entries:
                    fields.error(f"{prefix}.R", "missing required key")
                return None

            quad_tol = fields.positive(f"{prefix}.quad_tol", float, 1e-4)
            return CloudModel(potential, R, dim, quad_tol, stability_A) if potential is not None else None

        if potential is None:
            return None

        if kind == "finite_range":
            return FiniteRangeModel(potential, dim, stability_A)

        return PairwiseModel(potential, dim, stability_A)
    except DivergentTailError as e:
        fields.error(f"{prefix}.potential", str(e))
    except GibbsError as e:
        fields.error(f"{prefix}.kind", str(e))

    return None


def build_window(fields: Fields, dim: int) -> Optional[Box]:
    if "window.lower" in fields.entries or "window.upper" in fields.entries:
        if "window.n" in fields.entries:
            fields.error("window.n", "give either window.n or window.lower/window.upper, not both")

        lower = fields.get("window.lower", parse_floats, required=True)
        upper = fields.get("window.upper", parse_floats, required=True)
        if lower is None or upper is None:
            return None

        try:
            window = Box(lower, upper)
        except (ValueError, GibbsError) as e:
            fields.error("window.upper", str(e))
            return None
    else:
        window = Box.centered_cube(fields.positive("window.n", float, 1.0), dim)

    if window.dim != dim:
        fields.error("window.lower", f"window has dimension {window.dim}, expected {dim}")
        return None

    return window


def build_sampler(fields: Fields) -> dict[str, Any]:
    method = fields.get("sampler.method", str, "rejection")
    if method not in METHODS:
        fields.error("sampler.method", f"unknown method '{method}', expected one of {', '.join(METHODS)}")
        method = "rejection"

    options: dict[str, Any] = {
        "method": method,
        "samples": fields.positive("sampler.samples", int, 100),
        "chains": fields.positive("sampler.chains", int, 1),
    }

    for other, keys in METHOD_KEYS.items():
        for key in keys:
            if other != method and f"sampler.{key}" in fields.entries:
                fields.error(f"sampler.{key}", f"only applies to method '{other}', the sampler method is '{method}'")

    if method == "rejection":
        options["max_attempts"] = fields.positive("sampler.max_attempts", int, 100_000)
    else:
        options["burn_in"] = fields.positive("sampler.burn_in", int, DEFAULT_BURN_IN, allow_zero=True)
        options["thinning"] = fields.positive("sampler.thinning", int, DEFAULT_THINNING)
        if "sampler.sweeps" in fields.entries:
            options["mcmc_sweeps"] = fields.positive("sampler.sweeps", int, None)

        mix = tuple(fields.positive(f"sampler.{move}", float, default, allow_zero=True)
                    for move, default in zip(("birth", "death", "move"), DEFAULT_PROPOSAL_MIX))
        options["proposal_mix"] = mix

    return options


def build_diagnostics(fields: Fields, dim: int, base_dir: Optional[Path]) -> DiagnosticsConfig:
    reports = fields.get("diagnostics.reports", parse_names, ("intensity",))
    for name in reports:
        if name not in REPORTS:
            fields.error("diagnostics.reports", f"unknown report '{name}', expected any of {', '.join(REPORTS)}")

    functions = fields.get("diagnostics.functions", parse_names, DiagnosticsConfig.functions)
    for name in functions:
        if name not in FUNCTIONS:
            fields.error("diagnostics.functions", f"unknown test function '{name}', expected any of {', '.join(FUNCTIONS)}")

    centers = fields.get("diagnostics.delta.centers", parse_points, ((0.0,) * dim,))
    if any(len(center) != dim for center in centers):
        fields.error("diagnostics.delta.centers", f"every center needs {dim} coordinates")
        centers = ((0.0,) * dim,)

    samples_dir = fields.get("diagnostics.samples_dir", Path)
    if samples_dir is not None and base_dir is not None:
        samples_dir = base_dir / samples_dir

    return DiagnosticsConfig(
        reports=tuple(name for name in reports if name in REPORTS),
        half_width=fields.positive("diagnostics.delta.half_width", float, 0.5),
        centers=centers,
        functions=tuple(name for name in functions if name in FUNCTIONS),
        radius=fields.positive("diagnostics.radius", float, 0.25),
        cap=fields.positive("diagnostics.cap", int, 20),
        eps=fields.positive("diagnostics.eps", float, 1e-12),
        inner_draws=fields.positive("diagnostics.inner_draws", int, 200),
        xi_cap=fields.positive("diagnostics.xi_cap", float, 0.0, allow_zero=True),
        partition_draws=fields.positive("diagnostics.partition_draws", int, 2000),
        exteriors=fields.positive("diagnostics.exteriors", int, 20),
        copies=fields.positive("diagnostics.copies", int, 0, allow_zero=True),
        samples_dir=samples_dir,
    )


def collect(text: str, base_dir: Optional[Path] = None) -> tuple[Optional[ExperimentConfig], list[ConfigError]]:
    violations: list[ConfigError] = []
    entries = tokenize(text, violations)
    fields = Fields(entries, violations)

    dimension = fields.get("dimension", int, required=True)
    if dimension is not None and dimension not in SUPPORTED_DIMENSIONS:
        fields.error("dimension", f"out of range, must be one of {SUPPORTED_DIMENSIONS}")
        dimension = None

    seed = fields.get("seed", int, 0)
    if not 0 <= seed < 2 ** 64:
        fields.error("seed", "out of range, must be a 64-bit unsigned integer")

    output_dir = Path(fields.get("output_dir", str, "output"))
    if base_dir is not None:
        output_dir = base_dir / output_dir

    sampler = build_sampler(fields)
    if dimension is None:
        return None, violations

    window = build_window(fields, dimension)
    model = build_model(fields, "model", dimension)
    diagnostics = build_diagnostics(fields, dimension, base_dir)

    if window is None or model is None or len(violations) > 0:
        return None, violations

    config = ExperimentConfig(dimension, seed, output_dir, window, model, sampler, diagnostics, {key: entry.value for key, entry in entries.items()})

    try:
        config.sampler_spec()
    except GibbsError as e:
        violations.append(ConfigError(str(e), field="sampler", line=min((entry.line for key, entry in entries.items() if key.startswith("sampler.")), default=None)))

    for delta in diagnostics.deltas():
        if not delta.within(window):
            fields.error("diagnostics.delta.centers", f"{delta} does not fit inside the window {window}")

    if "stationarize" in diagnostics.reports and not window.is_centered_cube():
        fields.error("diagnostics.reports", f"stationarize needs a centered cube window ]-n,n]^d, got {window}")

    return (config if len(violations) == 0 else None), violations


def parse_config(text: str, base_dir: Optional[Path] = None) -> ExperimentConfig:
    config, violations = collect(text, base_dir)
    if len(violations) > 0:
        raise violations[0]

    return config


def validate_config(path: Path) -> list[str]:
    """Every violation in the file, without running anything; an empty list means runnable."""
    _, violations = collect(read_config_text(path), path.parent)
    return [str(violation) for violation in violations]
