"""Experiment configuration files.

A config is INI text read with :mod:`configparser`::

    [market]
    beta = 76
    gamma = 0.05
    alpha = 1
    n = 26, 744
    xi = 1000
    xi_split = 262, 738

    [solver]
    epsilon = 0.001
    max_iter = 1000

    [ranges]            ; optional, Monte-Carlo draws
    xi1 = 50, 950
    beta = 30, 200
    n1 = 20, 1000
    n2 = 20, 1000

Every error raised while reading a file is a :class:`ConfigError` that names the
offending line and key.
"""

import configparser
from dataclasses import dataclass
import re

from .dynamics import DEFAULT_EPSILON, DEFAULT_MAX_ITER, ParameterRanges
from .exceptions import ConfigError
from .model import GovernmentPolicy, MarketConfig

_MARKET_KEYS = {"beta", "gamma", "alpha", "n", "xi", "xi_split", "providers"}
_SOLVER_KEYS = {"epsilon", "max_iter", "grid_size", "xi_lo"}
_RANGE_KEYS = {"xi1", "beta", "n1", "n2"}


@dataclass(frozen=True)
class ExperimentConfig:
    market: MarketConfig
    policy: GovernmentPolicy = None
    epsilon: float = DEFAULT_EPSILON
    max_iter: int = DEFAULT_MAX_ITER
    grid_size: int = 19
    xi_lo: float = 50.0
    ranges: ParameterRanges = None

    def require_policy(self):
        if self.policy is None:
            raise ConfigError("this command needs a grant split", field="xi_split")
        return self.policy

    def parameter_ranges(self):
        if self.ranges is not None:
            return self.ranges
        return ParameterRanges(total_subsidy=self.market.total_subsidy, gamma=self.market.gamma)


def _key_lines(text):
    """Map ``(section, key)`` to the 1-based line where it is defined."""
    lines, section = {}, None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        head = re.match(r"\[([^\]]+)\]", line)
        if head:
            section = head.group(1).strip().lower()
            lines[(section, None)] = number
            continue
        m = re.match(r"([^=:;#\s][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            lines[(section, m.group(1).strip().lower())] = number
    return lines


class _Reader:
    def __init__(self, parser, lines):
        self.parser = parser
        self.lines = lines

    def fail(self, section, key, message):
        raise ConfigError(message, field=key, line=self.lines.get((section, key)))

    def raw(self, section, key):
        return self.parser.get(section, key)

    def number(self, section, key, kind=float):
        text = self.raw(section, key)
        try:
            value = kind(text) if kind is float else _as_int(text)
        except ValueError:
            self.fail(section, key, f"cannot read {text!r} as {kind.__name__}")
        return value

    def numbers(self, section, key, kind=float, length=None):
        parts = [p.strip() for p in self.raw(section, key).split(",") if p.strip()]
        try:
            values = tuple(kind(p) if kind is float else _as_int(p) for p in parts)
        except ValueError:
            self.fail(section, key, f"cannot read {self.raw(section, key)!r} as a list of {kind.__name__}")
        if length is not None and len(values) != length:
            self.fail(section, key, f"expected {length} values, got {len(values)}")
        return values

    def build(self, section, key, factory):
        """Run a constructor and re-raise its ConfigError with line information."""
        try:
            return factory()
        except ConfigError as exc:
            field = exc.field if exc.field is not None else key
            line = self.lines.get((section, _config_key(field))) or self.lines.get((section, key))
            raise ConfigError(exc.message, field=field, line=line) from None


def _as_int(text):
    value = float(text)
    if not value.is_integer():
        raise ValueError(text)
    return int(value)


# Model-level field names that differ from the config keys.
_FIELD_TO_KEY = {"E": "providers", "J": "providers", "delta": "xi_split"}


def _config_key(field):
    base = re.sub(r"\[\d+\]$", "", field)
    return _FIELD_TO_KEY.get(base, base)


def parse_config(text):
    """Parse config text into an :class:`ExperimentConfig`."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside any [section]", line=exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"not a section header or key = value pair: {line}", line=lineno) from None
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], line=getattr(exc, "lineno", None)) from None
    lines = _key_lines(text)
    r = _Reader(parser, lines)

    allowed = {"market": _MARKET_KEYS, "solver": _SOLVER_KEYS, "ranges": _RANGE_KEYS}
    for section in parser.sections():
        if section not in allowed:
            r.fail(section, None, f"unknown section [{section}]")
        for key in parser.options(section):
            if key not in allowed[section]:
                r.fail(section, key, f"unknown key in [{section}]")
    if not parser.has_section("market"):
        raise ConfigError("missing [market] section")
    for key in ("beta", "n"):
        if not parser.has_option("market", key):
            raise ConfigError("required key is missing", field=key, line=lines.get(("market", None)))

    opt = lambda section, key: parser.has_option(section, key)  # noqa: E731
    kwargs = {
        "populations": r.numbers("market", "n", kind=int),
        "beta": r.number("market", "beta"),
    }
    for key, name in (("gamma", "gamma"), ("alpha", "alpha"), ("xi", "total_subsidy")):
        if opt("market", key):
            kwargs[name] = r.number("market", key)
    if opt("market", "providers"):
        kwargs["provider_count"] = r.number("market", "providers", kind=int)
    market = r.build("market", "n", lambda: MarketConfig(**kwargs))

    policy = None
    if opt("market", "xi_split"):
        grants = r.numbers("market", "xi_split")
        policy = r.build("market", "xi_split", lambda: GovernmentPolicy(grants))
        r.build("market", "xi_split", lambda: policy.validate(market))

    solver = {}
    if parser.has_section("solver"):
        if opt("solver", "epsilon"):
            solver["epsilon"] = r.number("solver", "epsilon")
            if not solver["epsilon"] > 0:
                r.fail("solver", "epsilon", "must be > 0")
        for key in ("max_iter", "grid_size"):
            if opt("solver", key):
                solver[key] = r.number("solver", key, kind=int)
                if solver[key] < (1 if key == "max_iter" else 2):
                    r.fail("solver", key, "value too small")
        if opt("solver", "xi_lo"):
            solver["xi_lo"] = r.number("solver", "xi_lo")

    ranges = None
    if parser.has_section("ranges"):
        bounds = {}
        for key in _RANGE_KEYS:
            if opt("ranges", key):
                bounds[key] = r.numbers("ranges", key, kind=int, length=2)
        ranges = r.build(
            "ranges",
            None,
            lambda: ParameterRanges(
                total_subsidy=market.total_subsidy, gamma=market.gamma, **bounds
            ),
        )
    return ExperimentConfig(market, policy, ranges=ranges, **solver)


def load_config(path):
    """Read and parse a config file. An unreadable file raises OSError."""
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _fmt(value):
    if isinstance(value, float) and value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value) if isinstance(value, float) else str(value)


def _fmt_list(values):
    return ", ".join(_fmt(v) for v in values)


def dump_config(config):
    """Canonical text for ``config``; ``dump(parse(dump(c))) == dump(c)``."""
    m = config.market
    out = [
        "[market]",
        f"beta = {_fmt(m.beta)}",
        f"gamma = {_fmt(m.gamma)}",
        f"alpha = {_fmt(m.alpha)}",
        f"n = {_fmt_list(m.populations)}",
        f"xi = {_fmt(m.total_subsidy)}",
    ]
    if m.provider_count != 2:
        out.append(f"providers = {m.provider_count}")
    if config.policy is not None:
        out.append(f"xi_split = {_fmt_list(config.policy.grants)}")
    out += [
        "",
        "[solver]",
        f"epsilon = {_fmt(config.epsilon)}",
        f"max_iter = {config.max_iter}",
        f"grid_size = {config.grid_size}",
        f"xi_lo = {_fmt(config.xi_lo)}",
    ]
    if config.ranges is not None:
        rg = config.ranges
        out += ["", "[ranges]"]
        out += [f"{k} = {_fmt_list(getattr(rg, k))}" for k in ("xi1", "beta", "n1", "n2")]
    return "\n".join(out) + "\n"
