"""Command-line front end.

Exit codes are a stable contract: 0 ok / on edge, 1 negative verdict,
2 invalid assemblage, 3 falsification alarm, 64 usage or unreadable input,
65 semantically invalid data.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass

import click
import numpy as np

from . import serialize
from .assemblage import (
    Assemblage,
    MeasurementSet,
    from_quantum,
    lhs_point,
    load_assemblage,
    mix,
    to_json_dict,
    validate,
)
from .edge import det_criterion, is_on_edge, max_subtraction, rank_screen, total_rank_bound
from .errors import NsedgeError, NotOnEdgeError, SearchExhaustedError
from .fixtures import fixture_assemblage, fixture_state
from .linalg import RankTolerance
from .realization import (
    make_rng,
    pure_state_edge_recipe,
    random_lhs_assemblage,
    rank_nogo_scan,
    rank_two_edge_recipe,
)
from .scenario import Scenario, box_by_index, iter_deterministic_boxes, position_str, support_set
from .witness import certify, evaluate

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_INVALID = 2
EXIT_ALARM = 3
EXIT_USAGE = 64
EXIT_DATA = 65


@dataclass
class CliConfig:
    rank_tol: RankTolerance
    ns_tol: float
    intersection_tol: float
    seed: int
    json_out: bool


class _ExitCodeGroup(click.Group):
    """Group whose usage errors exit with the documented code."""

    def main(self, *args, **kwargs):
        kwargs.setdefault("standalone_mode", False)
        try:
            return super().main(*args, **kwargs)
        except click.exceptions.Exit as exc:
            sys.exit(exc.exit_code)
        except click.UsageError as exc:
            click.echo(f"error: {exc.format_message()}", err=True)
            sys.exit(EXIT_USAGE)
        except click.ClickException as exc:
            exc.show()
            sys.exit(EXIT_USAGE)


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _emit(config: CliConfig, payload: dict, human_lines) -> None:
    if config.json_out:
        click.echo(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for line in human_lines:
            click.echo(line)


def _fmt_complex(z: complex) -> str:
    return f"{z.real:.6g}{z.imag:+.6g}j"


def _fmt_matrix(m: np.ndarray, indent: str = "    ") -> list[str]:
    return [indent + "  ".join(_fmt_complex(z) for z in row) for row in np.asarray(m)]


def _load_input(path: str | None, fixture: str | None) -> Assemblage:
    if (path is None) == (fixture is None):
        _fail(EXIT_USAGE, "provide exactly one of an input file or --fixture")
    if fixture is not None:
        try:
            return fixture_assemblage(fixture)
        except (KeyError, ValueError) as exc:
            _fail(EXIT_USAGE, str(exc))
    try:
        return load_assemblage(path)
    except (OSError, json.JSONDecodeError, ValueError, NsedgeError) as exc:
        _fail(EXIT_USAGE, f"cannot read assemblage from {path}: {exc}")
    raise AssertionError("unreachable")


def _require_valid(config: CliConfig, asm: Assemblage) -> None:
    report = validate(asm, ns_tol=config.ns_tol)
    if not report.ok:
        _fail(
            EXIT_DATA,
            f"input is not a valid assemblage (worst violation {report.worst_violation:.3e})",
        )


@click.group(cls=_ExitCodeGroup)
@click.option("--tol-rank-abs", type=float, default=1e-10, show_default=True, help="Absolute eigenvalue cutoff for numerical rank.")
@click.option("--tol-rank-rel", type=float, default=1e-8, show_default=True, help="Relative eigenvalue cutoff for numerical rank.")
@click.option("--tol-ns", type=float, default=1e-8, show_default=True, help="Tolerance for normalization/no-signaling checks.")
@click.option("--tol-intersect", type=float, default=1e-8, show_default=True, help="Kernel eigenvalue threshold for common-image detection.")
@click.option("--seed", type=int, default=0, show_default=True, help="Seed for all sampling commands.")
@click.option("--json", "json_out", is_flag=True, help="Emit machine-readable JSON instead of human output.")
@click.pass_context
def cli(ctx, tol_rank_abs, tol_rank_rel, tol_ns, tol_intersect, seed, json_out):
    """Analyze no-signaling assemblages: validity, edge membership, witnesses."""
    if min(tol_rank_abs, tol_rank_rel, tol_ns, tol_intersect) <= 0:
        _fail(EXIT_USAGE, "all tolerances must be positive")
    ctx.obj = CliConfig(
        rank_tol=RankTolerance(abs_tol=tol_rank_abs, rel_tol=tol_rank_rel),
        ns_tol=tol_ns,
        intersection_tol=tol_intersect,
        seed=seed,
        json_out=json_out,
    )


@cli.command("validate")
@click.argument("input_file", required=False, type=click.Path())
@click.option("--fixture", help="Use a built-in assemblage instead of a file.")
@click.pass_obj
def cmd_validate(config: CliConfig, input_file, fixture):
    """Check positivity, normalization and no-signaling of an assemblage."""
    asm = _load_input(input_file, fixture)
    report = validate(asm, ns_tol=config.ns_tol)
    lines = [
        f"psd:          {'ok' if report.psd_ok else 'VIOLATED'}",
        f"normalization:{'ok' if report.normalization_ok else 'VIOLATED':>9}",
        f"no-signaling: {'ok' if report.no_signaling_ok else 'VIOLATED'}",
        f"worst violation: {report.worst_violation:.3e}",
    ]
    for item in report.offending[:20]:
        lines.append(f"  offending: {item}")
    _emit(config, report.to_dict(), lines)
    sys.exit(EXIT_OK if report.ok else EXIT_INVALID)


@cli.command("edge")
@click.argument("input_file", required=False, type=click.Path())
@click.option("--fixture", help="Use a built-in assemblage instead of a file.")
@click.option("--diagnostics", is_flag=True, help="Include determinant values and rank screens.")
@click.option("--mix-lhs", type=float, default=None, help="Premix with this weight of a deterministic LHS point before testing.")
@click.pass_obj
def cmd_edge(config: CliConfig, input_file, fixture, diagnostics, mix_lhs):
    """Decide whether an assemblage lies on the edge (no subtractable LHS part)."""
    asm = _load_input(input_file, fixture)
    _require_valid(config, asm)
    if mix_lhs is not None:
        if not 0.0 < mix_lhs <= 1.0:
            _fail(EXIT_USAGE, "--mix-lhs expects a weight in (0, 1]")
        s = asm.scenario
        state = np.zeros((s.trusted_dim, s.trusted_dim), dtype=complex)
        state[0, 0] = 1.0
        point = lhs_point(next(iter_deterministic_boxes(s)), state, s)
        asm = mix([(1.0 - mix_lhs, asm), (mix_lhs, point)])
    report = is_on_edge(
        asm, rank_tol=config.rank_tol, intersection_tol=config.intersection_tol
    )
    payload = report.to_dict()
    lines = [f"on_edge: {report.on_edge}"]
    if report.marginal_boxes:
        lines.append(f"marginal boxes (undecided band): {report.marginal_boxes}")

    best = None
    if not report.on_edge and report.witness_box is not None:
        # best subtractable weight over all certified boxes
        for diag in report.per_box:
            if diag.margin <= config.intersection_tol:
                box = box_by_index(asm.scenario, diag.box_index)
                from .edge import subtractable_along

                vec = subtractable_along(asm, box, config.rank_tol, config.intersection_tol)
                if vec is None:
                    continue
                sub = max_subtraction(asm, box, vec, config.rank_tol)
                if best is None or sub.epsilon > best[1]:
                    best = (diag.box_index, sub.epsilon)
        if best is not None:
            payload["best_box_index"] = best[0]
            payload["best_epsilon"] = best[1]
            lines.append(f"subtractable: box {best[0]} with epsilon {best[1]:.9g}")
        lines.append(f"first witness box: {report.witness_box_index}")
    if diagnostics:
        dets = [
            det_criterion(asm, box, config.rank_tol)
            for box in iter_deterministic_boxes(asm.scenario)
        ]
        screen = rank_screen(asm, config.rank_tol)
        rank_sum, bound, satisfied = total_rank_bound(asm, config.rank_tol)
        payload["diagnostics"] = {
            "det_criterion": dets,
            "min_det": min(dets),
            "rank_screen_fired": screen is not None,
            "rank_screen_tables": [list(t) for t in screen.tables] if screen else None,
            "total_rank": rank_sum,
            "total_rank_bound": bound,
            "total_rank_bound_satisfied": satisfied,
        }
        lines.append(f"min |det(prod R - 1)| over boxes: {min(dets):.6g}")
        lines.append(f"rank screen fired: {screen is not None}")
        lines.append(f"total rank {rank_sum} vs bound {bound} (satisfied: {satisfied})")
    _emit(config, payload, lines)
    sys.exit(EXIT_OK if report.on_edge else EXIT_NEGATIVE)


@cli.command("subtract")
@click.argument("input_file", required=False, type=click.Path())
@click.option("--fixture", help="Use a built-in assemblage instead of a file.")
@click.option("--box", "box_index", type=int, default=None, help="Subtract along this box index instead of the first found.")
@click.option("--out", type=click.Path(), default=None, help="Write the subtraction certificate to this file.")
@click.pass_obj
def cmd_subtract(config: CliConfig, input_file, fixture, box_index, out):
    """Remove the maximal LHS part along one deterministic box."""
    from .edge import subtractable_along

    asm = _load_input(input_file, fixture)
    _require_valid(config, asm)
    if box_index is not None:
        try:
            box = box_by_index(asm.scenario, box_index)
        except ValueError as exc:
            _fail(EXIT_USAGE, str(exc))
        vec = subtractable_along(asm, box, config.rank_tol, config.intersection_tol)
        if vec is None:
            _fail(EXIT_NEGATIVE, f"no LHS part is subtractable along box {box_index}")
    else:
        report = is_on_edge(asm, config.rank_tol, config.intersection_tol)
        if report.witness_box is None:
            _fail(EXIT_NEGATIVE, "assemblage is on the edge; nothing to subtract")
        box = report.witness_box
        box_index = report.witness_box_index
        vec = report.witness_vector
    sub = max_subtraction(asm, box, vec, config.rank_tol)
    recon = sub.reconstruction_error(asm)
    if recon > 1e-9:
        _fail(EXIT_DATA, f"reconstruction identity failed ({recon:.3e}); refusing to write")
    payload = sub.to_json_dict()
    payload["box_index"] = box_index
    payload["reconstruction_error"] = recon
    if out:
        with open(out, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    lines = [
        f"box index: {box_index}",
        f"epsilon:   {sub.epsilon:.9g}",
        f"reconstruction error: {recon:.3e}",
    ] + ([f"written: {out}"] if out else [])
    _emit(config, payload, lines)
    sys.exit(EXIT_OK)


@cli.command("witness")
@click.argument("input_file", required=False, type=click.Path())
@click.option("--fixture", help="Use a built-in assemblage instead of a file.")
@click.option("--epsilon", type=float, default=None, help="Use this shift instead of the maximal LHS floor (must not exceed it).")
@click.option("--check-lhs", type=int, default=0, help="Evaluate the witness on this many random LHS assemblages.")
@click.option("--out", type=click.Path(), default=None, help="Write the certificate to this file.")
@click.pass_obj
def cmd_witness(config: CliConfig, input_file, fixture, epsilon, check_lhs, out):
    """Build the canonical witness from an edge assemblage."""
    asm = _load_input(input_file, fixture)
    _require_valid(config, asm)
    seed_id = fixture if fixture else input_file
    try:
        cert = certify(asm, seed_id=seed_id, epsilon=epsilon, rank_tol=config.rank_tol)
    except NotOnEdgeError as exc:
        _fail(EXIT_NEGATIVE, str(exc))
    except NsedgeError as exc:
        _fail(EXIT_USAGE, str(exc))
    payload = cert.to_json_dict()
    lines = [
        f"epsilon: {cert.epsilon:.12g}",
        f"argmin box tables: {[list(t) for t in cert.argmin_box.tables]}",
        f"detection value on seed: {evaluate(cert.witness, asm):.9g}",
    ]
    if check_lhs > 0:
        rng = make_rng(config.seed, 0xB0)
        worst = min(
            evaluate(cert.witness, random_lhs_assemblage(asm.scenario, rng))
            for _ in range(check_lhs)
        )
        payload["lhs_check"] = {"samples": check_lhs, "min_value": worst, "seed": config.seed}
        lines.append(f"min over {check_lhs} random LHS assemblages: {worst:.3e}")
    if out:
        with open(out, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        lines.append(f"written: {out}")
    _emit(config, payload, lines)
    sys.exit(EXIT_OK)


def _load_state_file(path: str):
    try:
        with open(path) as fh:
            data = json.load(fh)
        dims = tuple(int(v) for v in data["dims"])
        if "vector" in data:
            return serialize.vector_from_json(data["vector"]), dims, True
        return serialize.matrix_from_json(data["matrix"]), dims, False
    except (OSError, json.JSONDecodeError, ValueError, KeyError, TypeError) as exc:
        _fail(EXIT_USAGE, f"cannot read state from {path}: {exc}")


@cli.command("realize")
@click.argument("mode", type=click.Choice(["pure", "rank2"]))
@click.argument("state_file", required=False, type=click.Path())
@click.option("--fixture", help="Use a built-in state (ghz, example1) instead of a file.")
@click.option("--a-povm", "a_povm_file", type=click.Path(), default=None, help="JSON file with the first party's binary measurement(s) (rank2 mode).")
@click.option("--max-tries", type=int, default=1000, show_default=True)
@click.option("--out", type=click.Path(), default=None, help="Prefix for <out>.recipe.json and <out>.assemblage.json.")
@click.pass_obj
def cmd_realize(config: CliConfig, mode, state_file, fixture, a_povm_file, max_tries, out):
    """Find measurements realizing an edge assemblage from a given state."""
    if (state_file is None) == (fixture is None):
        _fail(EXIT_USAGE, "provide exactly one of STATE_FILE or --fixture")
    if fixture is not None:
        try:
            state, dims = fixture_state(fixture)
        except KeyError as exc:
            _fail(EXIT_USAGE, str(exc))
        is_vector = state.ndim == 1
    else:
        state, dims, is_vector = _load_state_file(state_file)
    rng = make_rng(config.seed, 0xEA)

    try:
        if mode == "pure":
            if not is_vector:
                _fail(EXIT_USAGE, "pure mode expects a state vector")
            recipe = pure_state_edge_recipe(state, rng, max_tries=max_tries)
        else:
            if is_vector:
                state = np.outer(state, state.conj())
            if a_povm_file is not None:
                try:
                    with open(a_povm_file) as fh:
                        raw = json.load(fh)
                    a_meas = tuple(
                        tuple(serialize.matrix_from_json(m, 2) for m in setting) for setting in raw
                    )
                except (OSError, json.JSONDecodeError, ValueError, TypeError) as exc:
                    _fail(EXIT_USAGE, f"cannot read measurements from {a_povm_file}: {exc}")
            elif fixture == "example1":
                from .fixtures import example1_measurements

                a_meas = example1_measurements().elements[0]
            else:
                _fail(EXIT_USAGE, "rank2 mode needs --a-povm (or --fixture example1)")
            recipe = rank_two_edge_recipe(state, a_meas, rng, max_tries=max_tries)
    except SearchExhaustedError as exc:
        _fail(EXIT_NEGATIVE, str(exc))
    except NsedgeError as exc:
        _fail(EXIT_DATA, str(exc))

    asm = recipe.realize()
    payload = {"recipe": recipe.to_json_dict(), "assemblage": to_json_dict(asm)}
    lines = [
        f"provenance: {recipe.provenance}",
        f"tries: {recipe.tries}",
        "edge verified: True",
    ]
    if out:
        with open(f"{out}.recipe.json", "w") as fh:
            json.dump(payload["recipe"], fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(f"{out}.assemblage.json", "w") as fh:
            json.dump(payload["assemblage"], fh, indent=2, sort_keys=True)
            fh.write("\n")
        lines.append(f"written: {out}.recipe.json, {out}.assemblage.json")
    _emit(config, payload, lines)
    sys.exit(EXIT_OK)


@cli.command("scan")
@click.option("--rank", type=int, required=True, help="State rank (must be >= 3).")
@click.option("--samples", type=int, required=True)
@click.option("--kind", type=click.Choice(["pvm", "povm"]), default="pvm", show_default=True)
@click.option("--out", type=click.Path(), default=None, help="Write the scan report to this file.")
@click.pass_obj
def cmd_scan(config: CliConfig, rank, samples, kind, out):
    """Randomized check that rank >= 3 three-qubit states never reach the edge."""
    try:
        report = rank_nogo_scan(samples, rank, kind, seed=config.seed)
    except NsedgeError as exc:
        _fail(EXIT_USAGE, str(exc))
    payload = report.to_json_dict()
    epsilons = [s.epsilon for s in report.samples if s.epsilon is not None]
    lines = [
        f"samples: {samples}  rank: {rank}  kind: {kind}  seed: {config.seed}",
        f"edge verdicts: {report.edge_count}",
        f"discarded borderline: {report.discarded_borderline}",
    ]
    if epsilons:
        lines.append(f"epsilon range: [{min(epsilons):.6g}, {max(epsilons):.6g}]")
    if out:
        with open(out, "w") as fh:
            fh.write(report.to_json())
            fh.write("\n")
        lines.append(f"written: {out}")
    _emit(config, payload, lines)
    if report.edge_count > 0:
        click.echo(
            "ALARM: an on-edge verdict appeared where none should exist; "
            "this contradicts the rank no-go claim or the numerics.",
            err=True,
        )
        sys.exit(EXIT_ALARM)
    sys.exit(EXIT_OK)


@cli.command("boxes")
@click.option("--settings", default="2,2", show_default=True, help="Comma-separated setting counts.")
@click.option("--outcomes", default="2,2", show_default=True, help="Comma-separated outcome counts.")
@click.option("--support", is_flag=True, help="Also print each box's support positions.")
@click.pass_obj
def cmd_boxes(config: CliConfig, settings, outcomes, support):
    """Enumerate the local deterministic boxes of a scenario."""
    try:
        s = Scenario(
            settings=tuple(int(v) for v in settings.split(",")),
            outcomes=tuple(int(v) for v in outcomes.split(",")),
            trusted_dim=1,
        )
        boxes = list(iter_deterministic_boxes(s))
    except (ValueError, NsedgeError) as exc:
        _fail(EXIT_USAGE, str(exc))
    payload = {
        "count": len(boxes),
        "boxes": [
            {
                "index": i,
                "tables": [list(t) for t in box.tables],
                **(
                    {"support": [position_str(p, s) for p in support_set(box, s)]}
                    if support
                    else {}
                ),
            }
            for i, box in enumerate(boxes)
        ],
    }
    lines = [f"{len(boxes)} deterministic boxes"]
    for entry in payload["boxes"]:
        desc = f"  [{entry['index']:>3}] tables {entry['tables']}"
        if support:
            desc += f"  support {{{', '.join(entry['support'])}}}"
        lines.append(desc)
    _emit(config, payload, lines)
    sys.exit(EXIT_OK)


def entry(argv=None):
    """Console-script entry point."""
    cli.main(args=argv, prog_name="nsedge")


if __name__ == "__main__":
    entry()
