"""Scenario-driven command line front end.

A scenario is an INI file with a ``[scenario]`` block naming the mode and
parameter blocks for that mode. Results are written as CSV tables of
arrival CDFs plus a key-value summary, atomically (temp file + rename),
so a failed run leaves no partial outputs.

Exit codes: 0 success, 2 scenario parse/validation error, 3 solver
non-convergence, 4 invalid model parameters.
"""

from __future__ import annotations

import argparse
import configparser
import math
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import abm as abm_mod
from . import fluid as fluid_mod
from .dists import ServiceDist, make_deterministic, make_geometric, make_geometric_mixture
from .signals import SignalParams, posterior_views, signal_marginals
from .solver import SolverConfig, iterated_best_response, solve_fr
from .workload import SlotGame

MODES = ("fluid", "discrete_br", "discrete_fr", "abm", "compare", "signal")

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_NO_CONVERGENCE = 3
EXIT_INVALID_PARAMS = 4


class ScenarioError(ValueError):
    """Scenario file is malformed or inconsistent."""


class ConvergenceError(RuntimeError):
    """Solver failed to converge; the report text is attached."""


@dataclass
class Scenario:
    mode: str
    seed: int
    sections: configparser.ConfigParser

    def get(self, section: str, key: str, cast, default=None):
        if not self.sections.has_option(section, key):
            if default is not None:
                return default
            raise ScenarioError(f"missing field [{section}] {key}")
        raw = self.sections.get(section, key)
        try:
            return cast(raw)
        except ValueError as exc:
            raise ScenarioError(f"bad value for [{section}] {key}: {raw!r}") from exc

    def require(self, section: str) -> None:
        if not self.sections.has_section(section):
            raise ScenarioError(f"mode {self.mode!r} needs a [{section}] block")


def load_scenario(path: str | Path, overrides: list[str] = (), seed: int | None = None) -> Scenario:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    text = Path(path)
    if not text.is_file():
        raise ScenarioError(f"scenario file not found: {path}")
    try:
        with open(text) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ScenarioError(f"scenario parse error: {exc}") from exc
    for item in overrides:
        key, _, value = item.partition("=")
        section, _, field = key.partition(".")
        if not (section and field and value):
            raise ScenarioError(f"override must look like section.key=value, got {item!r}")
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section.strip(), field.strip(), value.strip())
    if not parser.has_section("scenario"):
        raise ScenarioError("scenario file needs a [scenario] block")
    mode = parser.get("scenario", "mode", fallback=None)
    if mode not in MODES:
        raise ScenarioError(f"[scenario] mode must be one of {MODES}, got {mode!r}")
    file_seed = parser.getint("scenario", "seed", fallback=0)
    return Scenario(mode, seed if seed is not None else file_seed, parser)


def _service(scn: Scenario, section: str, which: str) -> ServiceDist:
    family = scn.get(section, "service", str)
    chi = scn.get(section, f"chi_{which}", float)
    if family == "deterministic":
        return make_deterministic(chi)
    if family == "geometric":
        return make_geometric(chi)
    if family == "mixture":
        key = f"cv_{which}"
        if scn.sections.has_option(section, key):
            cv = scn.get(section, key, float)
        else:
            cv = scn.get(section, "cv_scale", float, 2.0) * math.sqrt(1.0 - 1.0 / chi)
        return make_geometric_mixture(chi, cv)
    raise ScenarioError(f"unknown service family {family!r}")


def _slot_game(scn: Scenario) -> SlotGame:
    scn.require("game")
    return SlotGame(
        lam_a=scn.get("game", "lambda_a", float),
        lam_b=scn.get("game", "lambda_b", float),
        tau=scn.get("game", "tau", int),
        n_slots=scn.get("game", "slots", int),
        x_a=_service(scn, "game", "a"),
        x_b=_service(scn, "game", "b"),
    )


def _signal_params(scn: Scenario) -> SignalParams:
    scn.require("signal")
    scn.require("game")
    return SignalParams(
        lam=scn.get("signal", "lambda", float),
        p=scn.get("signal", "p", float),
        q=scn.get("signal", "q", float),
        x_a=_service(scn, "game", "a"),
        x_b=_service(scn, "game", "b"),
    )


def _solver_config(scn: Scenario) -> SolverConfig:
    if not scn.sections.has_section("solver"):
        return SolverConfig()
    return SolverConfig(
        eps=scn.get("solver", "eps", float, SolverConfig.eps),
        delta=scn.get("solver", "delta", float, SolverConfig.delta),
        max_outer=scn.get("solver", "max_outer", int, SolverConfig.max_outer),
        norm=scn.get("solver", "norm", str, SolverConfig.norm),
    )


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _csv_lines(header: list[str], columns: list[np.ndarray]) -> list[str]:
    lines = [",".join(header)]
    for row in zip(*columns):
        lines.append(",".join(_fmt(float(v)) for v in row))
    return lines


def _summary_lines(pairs: list[tuple[str, object]]) -> list[str]:
    return [f"{key} = {_fmt(value)}" for key, value in pairs]


def _report_pairs(prefix: str, rep) -> list[tuple[str, object]]:
    return [
        (f"{prefix}.wbar_a", rep.wbar_a),
        (f"{prefix}.wbar_b", rep.wbar_b),
        (f"{prefix}.iterations", rep.iterations),
        (f"{prefix}.converged", rep.converged),
        (f"{prefix}.max_support_spread", rep.max_support_spread),
        (f"{prefix}.max_offsupport_violation", rep.max_offsupport_violation),
    ]


def _run_fluid(scn: Scenario, outputs: dict) -> list[tuple[str, object]]:
    scn.require("fluid")
    params = fluid_mod.FluidParams(
        lam_a=scn.get("fluid", "lambda_a", float),
        lam_b=scn.get("fluid", "lambda_b", float),
        mu_a=scn.get("fluid", "mu_a", float),
        mu_b=scn.get("fluid", "mu_b", float),
        horizon=scn.get("fluid", "horizon", float),
    )
    tags = sorted(fluid_mod.classify(params), key=fluid_mod.CASE_TAGS.index)
    wanted = scn.get("fluid", "case", str, "auto")
    tag = tags[0] if wanted == "auto" else wanted
    eq = fluid_mod.solve_case(params, tag)
    grid_n = scn.get("fluid", "grid_n", int, 1001)
    check = fluid_mod.verify_fluid(params, eq, max(grid_n, 2))
    grid = np.unique(
        np.concatenate(
            [np.linspace(0.0, params.horizon, grid_n)]
            + [np.array([s.start, s.end]) for s in eq.segments_a + eq.segments_b]
        )
    )
    outputs["cdf.csv"] = _csv_lines(
        ["time", "F_a", "F_b"], [grid, eq.cdf("a", grid), eq.cdf("b", grid)]
    )
    pairs = [
        ("mode", "fluid"),
        ("cases.classified", " ".join(tags)),
        ("cases.solved", tag),
        ("atom_a", eq.atom_a),
        ("atom_b", eq.atom_b),
        ("q0", eq.q0),
        ("non_unique", eq.non_unique),
        ("verify.max_violation", check.max_violation),
    ]
    for side in ("a", "b"):
        for i, seg in enumerate(eq.segments(side)):
            pairs.append((f"segment_{side}{i}", f"{seg.start!r}:{seg.end!r}:{seg.density!r}"))
    return pairs


def _slot_times(game: SlotGame) -> np.ndarray:
    return np.arange(game.n_slots, dtype=float) * game.tau


def _run_discrete_br(scn: Scenario, outputs: dict) -> list[tuple[str, object]]:
    game = _slot_game(scn)
    cfg = _solver_config(scn)
    pa, pb, rep = iterated_best_response(game, cfg)
    outputs["cdf.csv"] = _csv_lines(
        ["time", "F_a", "F_b"], [_slot_times(game), pa.cdf(), pb.cdf()]
    )
    pairs = [("mode", "discrete_br")] + _report_pairs("br", rep)
    if not rep.converged:
        raise ConvergenceError("\n".join(_summary_lines(pairs)))
    return pairs


def _run_discrete_fr(scn: Scenario, outputs: dict) -> list[tuple[str, object]]:
    game = _slot_game(scn)
    sig = _signal_params(scn)
    cfg = _solver_config(scn)
    pa, pb, (rep_a, rep_b) = solve_fr(sig, game.tau, game.n_slots, cfg)
    view_a, view_b = posterior_views(sig)
    outputs["cdf.csv"] = _csv_lines(
        ["time", "F_a", "F_b"], [_slot_times(game), pa.cdf(), pb.cdf()]
    )
    pairs = [
        ("mode", "discrete_fr"),
        ("posterior.nu_a", f"{view_a.nu[0]!r} {view_a.nu[1]!r}"),
        ("posterior.nu_b", f"{view_b.nu[0]!r} {view_b.nu[1]!r}"),
        ("posterior.zeta_a", view_a.zeta),
        ("posterior.zeta_b", view_b.zeta),
    ]
    pairs += _report_pairs("fr_a", rep_a) + _report_pairs("fr_b", rep_b)
    if not (rep_a.converged and rep_b.converged):
        raise ConvergenceError("\n".join(_summary_lines(pairs)))
    return pairs


def _abm_config(scn: Scenario, game: SlotGame, sig: SignalParams, seed: int) -> abm_mod.AbmConfig:
    scn.require("abm")
    return abm_mod.AbmConfig(
        pool=scn.get("abm", "pool", int),
        lam=sig.lam,
        days=scn.get("abm", "days", int),
        p=sig.p,
        q=sig.q,
        x_a=game.x_a,
        x_b=game.x_b,
        tau=game.tau,
        n_slots=game.n_slots,
        c1=scn.get("abm", "c1", float, 1.0),
        c2=scn.get("abm", "c2", float, 0.005),
        seed=seed,
    )


def _run_abm(scn: Scenario, outputs: dict) -> list[tuple[str, object]]:
    game = _slot_game(scn)
    sig = _signal_params(scn)
    cfg = _abm_config(scn, game, sig, scn.seed)
    res = abm_mod.run_abm(cfg)
    outputs["cdf.csv"] = _csv_lines(
        ["time", "F_a", "F_b"], [_slot_times(game), res.cdf("a"), res.cdf("b")]
    )
    return [
        ("mode", "abm"),
        ("abm.days", res.days),
        ("abm.wbar_a", float(res.wbar_pop[0])),
        ("abm.wbar_b", float(res.wbar_pop[1])),
        ("abm.contributing_a", int(res.contributing[0])),
        ("abm.contributing_b", int(res.contributing[1])),
    ]


def _run_compare(scn: Scenario, outputs: dict) -> list[tuple[str, object]]:
    """Bounded-rational, fully-rational and learning outcomes side by side."""
    sig = _signal_params(scn)
    scn.require("game")
    tau = scn.get("game", "tau", int)
    n_slots = scn.get("game", "slots", int)
    cfg = _solver_config(scn)
    marg = signal_marginals(sig.p, sig.q)
    game_br = SlotGame(sig.lam * marg[0], sig.lam * marg[1], tau, n_slots, sig.x_a, sig.x_b)
    pa_br, pb_br, rep_br = iterated_best_response(game_br, cfg)
    pa_fr, pb_fr, (rep_fr_a, rep_fr_b) = solve_fr(sig, tau, n_slots, cfg)
    res = abm_mod.run_abm(_abm_config(scn, game_br, sig, scn.seed))
    times = _slot_times(game_br)
    outputs["cdf_br.csv"] = _csv_lines(["time", "F_a", "F_b"], [times, pa_br.cdf(), pb_br.cdf()])
    outputs["cdf_fr.csv"] = _csv_lines(["time", "F_a", "F_b"], [times, pa_fr.cdf(), pb_fr.cdf()])
    outputs["cdf_abm.csv"] = _csv_lines(["time", "F_a", "F_b"], [times, res.cdf("a"), res.cdf("b")])
    sup = lambda x, y: float(np.max(np.abs(x - y)))
    pairs = [("mode", "compare"), ("lambda_a", game_br.lam_a), ("lambda_b", game_br.lam_b)]
    pairs += _report_pairs("br", rep_br)
    pairs += _report_pairs("fr_a", rep_fr_a) + _report_pairs("fr_b", rep_fr_b)
    pairs += [
        ("abm.wbar_a", float(res.wbar_pop[0])),
        ("abm.wbar_b", float(res.wbar_pop[1])),
        ("dist.abm_vs_br_a", sup(res.cdf("a"), pa_br.cdf())),
        ("dist.abm_vs_br_b", sup(res.cdf("b"), pb_br.cdf())),
        ("dist.abm_vs_fr_a", sup(res.cdf("a"), pa_fr.cdf())),
        ("dist.abm_vs_fr_b", sup(res.cdf("b"), pb_fr.cdf())),
    ]
    if not (rep_br.converged and rep_fr_a.converged and rep_fr_b.converged):
        raise ConvergenceError("\n".join(_summary_lines(pairs)))
    return pairs


def _run_signal(scn: Scenario, outputs: dict) -> list[tuple[str, object]]:
    sig = _signal_params(scn)
    marg = signal_marginals(sig.p, sig.q)
    view_a, view_b = posterior_views(sig)
    return [
        ("mode", "signal"),
        ("marginal_a", marg[0]),
        ("marginal_b", marg[1]),
        ("nu_a", f"{view_a.nu[0]!r} {view_a.nu[1]!r}"),
        ("nu_b", f"{view_b.nu[0]!r} {view_b.nu[1]!r}"),
        ("eta_a", f"{view_a.eta[0]!r} {view_a.eta[1]!r}"),
        ("eta_b", f"{view_b.eta[0]!r} {view_b.eta[1]!r}"),
        ("zeta_a", view_a.zeta),
        ("zeta_b", view_b.zeta),
    ]


_RUNNERS = {
    "fluid": _run_fluid,
    "discrete_br": _run_discrete_br,
    "discrete_fr": _run_discrete_fr,
    "abm": _run_abm,
    "compare": _run_compare,
    "signal": _run_signal,
}


def _write_atomic(out_dir: Path, files: dict[str, list[str]]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    staged = []
    try:
        for name, lines in files.items():
            fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=f".{name}.")
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write("\n".join(lines) + "\n")
            staged.append((tmp, out_dir / name))
        for tmp, dest in staged:
            os.replace(tmp, dest)
    except BaseException:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)
        raise


def run_scenario(scn: Scenario, out_dir: str | Path) -> int:
    outputs: dict[str, list[str]] = {}
    exit_code = EXIT_OK
    try:
        pairs = _RUNNERS[scn.mode](scn, outputs)
    except ConvergenceError as exc:
        print(f"solver did not converge:\n{exc}", file=sys.stderr)
        outputs["summary.txt"] = str(exc).splitlines()
        _write_atomic(Path(out_dir), outputs)
        return EXIT_NO_CONVERGENCE
    pairs.insert(0, ("seed", scn.seed))
    outputs["summary.txt"] = _summary_lines(pairs)
    _write_atomic(Path(out_dir), outputs)
    return exit_code


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="arrivalgames")
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="run a scenario file")
    runp.add_argument("scenario")
    runp.add_argument("--out", default="out", help="output directory")
    runp.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    runp.add_argument(
        "--override",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override a scenario field (repeatable)",
    )
    args = parser.parse_args(argv)
    try:
        scn = load_scenario(args.scenario, args.override, args.seed)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        return run_scenario(scn, args.out)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValueError as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_INVALID_PARAMS


if __name__ == "__main__":
    sys.exit(main())
