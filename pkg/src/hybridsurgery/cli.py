"""Command-line runner: protocols, fixture checks, lattice cross-checks.

Every subcommand emits a schema-versioned JSON report.  Identical arguments
give byte-identical output.  Exit codes: 0 when every check passes, 1 when
a check fails, 2 for usage errors and refused runs (bad arguments, cap
exceeded, malformed fixtures).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__

SCHEMA_VERSION = 1
FIDELITY_TOL = 1e-9


class UsageError(Exception):
    pass


@dataclass
class Check:
    name: str
    ok: bool
    detail: str = ""


@dataclass
class Report:
    command: str
    config: dict
    checks: list[Check] = field(default_factory=list)
    payload: dict = field(default_factory=dict)
    fixtures: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and all(c.ok for c in self.checks)

    @property
    def status(self) -> str:
        if self.error is not None:
            return "error"
        return "pass" if self.ok else "fail"

    @property
    def exit_code(self) -> int:
        return {"pass": 0, "fail": 1, "error": 2}[self.status]

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "tool": "hybridsurgery",
            "version": __version__,
            "command": self.command,
            "config": self.config,
            "status": self.status,
            "error": self.error,
            "checks": [asdict(c) for c in self.checks],
            "fixtures": self.fixtures,
            "payload": self.payload,
        }

    def dumps(self) -> str:
        return json.dumps(_clean(self.to_json()), indent=2, sort_keys=True) + "\n"


def _clean(obj):
    """Round floats so reports are stable across BLAS builds."""
    if isinstance(obj, float):
        return float(f"{obj:.12g}")
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    if isinstance(obj, (np.floating,)):
        return _clean(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _map(fn, items, jobs: int):
    """Ordered map, in worker processes when jobs > 1."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- run-protocol

PROTOCOLS = ("teleport-s", "magic-two-qubit", "gate-two-qubit", "t-magic", "t-gate", "s3-qubit", "s3-qutrit")


def _parse_record(text: str | None) -> dict | None:
    if text is None:
        return None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"--record is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise UsageError("--record must be a JSON object of label -> outcome")
    return {k: tuple(v) if isinstance(v, list) else v for k, v in raw.items()}


def _parse_theta(text: str) -> complex:
    table = {"1": 1, "-1": -1, "i": 1j}
    if text not in table:
        raise UsageError("--theta must be one of 1, -1, i")
    return complex(table[text])


def _basis(index: int, dim: int) -> np.ndarray:
    if not 0 <= index < dim:
        raise UsageError(f"--input must be in 0..{dim - 1}")
    return np.eye(dim)[index]


def run_protocol(args) -> Report:
    from . import protocols as P
    from .protocols import ProtocolError

    name = args.protocol
    config = {
        "protocol": name,
        "n": args.n,
        "seed": args.seed,
        "record": args.record,
        "exhaustive": args.exhaustive,
        "input": args.input,
        "variant": args.variant,
        "theta": args.theta,
        "coefficients": args.coefficients,
        "flavour": args.flavour,
    }
    report = Report("run-protocol", config)
    record = _parse_record(args.record)
    seed = args.seed
    try:
        if name == "teleport-s":
            res = P.teleport_S_to_dihedral(args.n, record, seed)
        elif name == "magic-two-qubit":
            res = P.magic_state_two_qubit(record, seed)
        elif name == "gate-two-qubit":
            res = P.gate_teleport_two_qubit(_basis(args.input or 0, 4), record, seed)
        elif name == "t-magic":
            res = P.magic_state_single_qubit(args.n, record, seed, args.flavour)
        elif name == "t-gate":
            res = P.gate_teleport_single_qubit(args.n, _basis(args.input or 0, 2), args.variant, record, seed)
        elif name == "s3-qubit":
            res = P.s3_qubit_magic(record, seed)
        elif name == "s3-qutrit":
            coeffs = [complex(c) for c in (args.coefficients or "1,0,0").split(",")]
            # the qutrit pipeline is post-selected; a seed alone does not sample it
            res = P.s3_qutrit_magic(_parse_theta(args.theta or "i"), coeffs, record, None)
        else:
            raise UsageError(f"unknown protocol {name!r}; choose from {', '.join(PROTOCOLS)}")
    except KeyError as exc:
        raise UsageError(f"{name}: forced record has no outcome for {exc}") from None
    except (ProtocolError, ValueError) as exc:
        raise UsageError(f"{name}: {exc}") from None

    report.checks.append(Check("run fidelity", res.fidelity >= 1 - FIDELITY_TOL, f"{res.fidelity:.12f}"))
    if res.effective_unitary is not None:
        report.checks.append(Check("unitary matches target up to phase", res.global_phase is not None))
    post_selected = name == "s3-qutrit"
    if args.exhaustive and not post_selected:
        worst = res.min_fidelity
        report.checks.append(Check("every branch fidelity", worst >= 1 - FIDELITY_TOL, f"min {worst:.12f}"))
        if name not in ("gate-two-qubit", "t-gate"):
            tot = res.total_probability
            report.checks.append(Check("branch probabilities sum to 1", abs(tot - 1) < 1e-10, f"{tot:.12f}"))
    payload = res.to_json()
    if not args.exhaustive:
        payload.pop("branches", None)
    payload["post_selected"] = post_selected
    report.payload = payload
    if args.dump_state and res.final_state is not None:
        Path(args.dump_state).write_text(res.final_state.dumps() + "\n")
    return report


# ---------------------------------------------------------------- verify


def _fixture_kind(path: Path, lines: list[str]) -> str:
    for line in lines:
        s = line.strip()
        if s.startswith("# kind:"):
            return s.split(":", 1)[1].strip()
    stem = path.name
    for kind in ("anyons", "folded-lagrangians", "algebras", "errors"):
        if stem.startswith(kind):
            return kind
    raise UsageError(f"{path}: cannot tell the fixture kind (add a '# kind:' line)")


def _data_lines(lines: list[str]):
    for no, raw in enumerate(lines, 1):
        s = raw.strip()
        if s and not s.startswith("#"):
            yield no, s


def _split(no: int, line: str, n: int) -> list[str]:
    parts = [p.strip() for p in line.split(";")]
    if len(parts) != n:
        raise UsageError(f"line {no}: expected {n} ';'-separated fields, got {len(parts)}")
    return parts


def _check_folded(item) -> tuple[int, str, bool, str]:
    from .center import LabelError, parse_algebra, verify_folded_lagrangian

    no, line = item
    name, g, gp, unfolded, folded = _split(no, line, 5)
    try:
        A = parse_algebra(folded, g, gp)
        U = None if unfolded == "-" else parse_algebra(unfolded, g)
    except LabelError as exc:
        return no, name, False, f"parse error: {exc}"
    rep = verify_folded_lagrangian(A, U)
    return no, name, rep.ok, rep.first_failure() or f"dim {rep.condensability.total_dimension}"


def _check_algebra(item) -> tuple[int, str, bool, str]:
    from .center import LabelError, check_condensable, parse_algebra, rough_lagrangian, smooth_lagrangian

    no, line = item
    name, g, text, verdict = _split(no, line, 4)
    if verdict not in ("lagrangian", "condensable", "rejected"):
        raise UsageError(f"line {no}: unknown verdict {verdict!r}")
    try:
        A = {"rough": rough_lagrangian, "smooth": smooth_lagrangian}.get(text, lambda G: parse_algebra(text, G))(g)
    except LabelError as exc:
        return no, name, False, f"parse error: {exc}"
    rep = check_condensable(A)
    got = "rejected" if not rep.condensable else ("lagrangian" if rep.lagrangian else "condensable")
    detail = f"{got}, dim {rep.total_dimension}" + (f" ({rep.failures[0]})" if rep.failures else "")
    return no, name, got == verdict, detail


def _check_error_row(item) -> tuple[int, str, bool, str]:
    from .syndrome import ERRORS, SyndromeError, syndrome_of_error

    no, line = item
    err, kinds, anyon = _split(no, line, 3)
    if err not in ERRORS:
        raise UsageError(f"line {no}: unknown error {err!r}")
    try:
        sv = syndrome_of_error(error=err)
    except SyndromeError as exc:
        return no, err, False, str(exc)
    want = sorted(k.strip() for k in kinds.split(","))
    ok = sv.violated == want and sv.anyon == anyon and (sv.eigenstate or not sv.abelian_sector)
    return no, err, ok, f"{', '.join(sv.violated)} / {sv.anyon}"


def verify_fixture(path: str | Path, jobs: int = 1) -> list[Check]:
    """One check per fixture line; raises UsageError on malformed files."""
    from .center import LabelError, verify_anyon_rows

    path = Path(path)
    if not path.exists():
        raise UsageError(f"fixture {path} not found")
    lines = path.read_text().splitlines()
    kind = _fixture_kind(path, lines)
    if kind == "anyons":
        try:
            rows = verify_anyon_rows(lines, "D4")
        except LabelError as exc:
            raise UsageError(f"{path}: {exc}") from None
        return [Check(f"{path.name}:{r.line} {r.label}", r.ok, r.detail) for r in rows]
    fn = {"folded-lagrangians": _check_folded, "algebras": _check_algebra, "errors": _check_error_row}.get(kind)
    if fn is None:
        raise UsageError(f"{path}: unknown fixture kind {kind!r}")
    items = list(_data_lines(lines))
    for no, line in items:  # validate shape up front so workers never see bad lines
        _split(no, line, {"folded-lagrangians": 5, "algebras": 4, "errors": 3}[kind])
    out = _map(fn, items, jobs)
    return [Check(f"{path.name}:{no} {name}", ok, detail) for no, name, ok, detail in out]


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def verify(args) -> Report:
    report = Report("verify", {"fixtures": [Path(p).name for p in args.fixtures]})
    for p in args.fixtures:
        report.checks.extend(verify_fixture(p, args.jobs))
        report.fixtures[Path(p).name] = _sha256(Path(p))
    report.payload = {"lines": len(report.checks), "passed": sum(c.ok for c in report.checks)}
    return report


# ---------------------------------------------------------------- cross-check


def _cross_one(job):
    from .lattice import lattice_vs_logical

    fragment, rows, inputs, seed, cap = job
    return lattice_vs_logical(fragment, rows, inputs, seed, cap).to_json()


def cross_check(args) -> Report:
    from .lattice import FRAGMENTS, CapExceeded, LatticeError, lattice_vs_logical

    frags = [args.fragment] if args.fragment else ["z4-d4", "d4-z2z2", "d4-z2", "trivial"]
    for f in frags:
        if f not in FRAGMENTS:
            raise UsageError(f"unknown fragment {f!r}; choose from {', '.join(sorted(FRAGMENTS))}")
    cap = args.cap_amplitudes
    report = Report("cross-check", {"fragments": frags, "rows": args.rows, "inputs": args.inputs,
                                    "seed": args.seed, "cap_amplitudes": cap})
    try:
        if args.dump_state:
            def dump(merged, _path=args.dump_state):
                merged.state.save(_path)

            results = [lattice_vs_logical(frags[0], args.rows, args.inputs, args.seed, cap, on_merge=dump).to_json()]
            results += _map(_cross_one, [(f, args.rows, args.inputs, args.seed, cap) for f in frags[1:]], args.jobs)
        else:
            results = _map(_cross_one, [(f, args.rows, args.inputs, args.seed, cap) for f in frags], args.jobs)
    except CapExceeded as exc:
        report.error = f"refused: {exc}"
        report.payload = {"required": exc.required, "allowed": exc.allowed}
        return report
    except LatticeError as exc:
        raise UsageError(str(exc)) from None
    for r in results:
        report.checks.append(Check(f"{r['fragment']} rows={r['rows']}", r["ok"],
                                   f"max deviation {r['max_deviation']:.3e}, {len(r['branches'])} branches"))
    report.payload = {"fragments": results}
    return report


# ---------------------------------------------------------------- syndrome-table / anyons


def syndrome_table_cmd(args) -> Report:
    from .syndrome import check_table, commutator_relations, minimal_syndrome_patch, syndrome_csv, syndrome_table

    layout = minimal_syndrome_patch()
    edge = None
    if args.edge:
        try:
            kind, rest = args.edge[0].lower(), args.edge[1:].strip("()")
            x, y = (int(t) for t in rest.split(","))
            edge = layout.edge(kind, x, y)
        except Exception:
            raise UsageError(f"--edge must look like V(1,0) or H(0,1), got {args.edge!r}") from None
    rows = syndrome_table(layout, edge)
    report = Report("syndrome-table", {"edge": rows[0].edge})
    for err, ok, detail in check_table(rows):
        report.checks.append(Check(f"error {err}", ok, detail))
    comm = commutator_relations(layout)
    for name, dev in comm.relations:
        report.checks.append(Check(name, dev < 1e-9, f"{dev:.1e}"))
    report.checks.append(Check("remaining generator pairs commute", not comm.nontrivial_pairs,
                               f"{comm.trivial_pairs} commuting pairs"))
    report.payload = {"rows": [r.row() for r in rows]}
    csv_text = syndrome_csv(rows)
    if args.csv:
        Path(args.csv).write_text(csv_text)
    report.payload["csv"] = csv_text
    return report


def anyons_cmd(args) -> Report:
    from .center import center
    from .groups import GroupError

    try:
        Z = center(args.group)
    except (GroupError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    S = Z.S
    unit = float(np.max(np.abs(S.conj().T @ S - np.eye(len(Z)))))
    total = sum(a.qdim**2 for a in Z)
    n = Z.group.order
    report = Report("anyons", {"group": args.group})
    report.checks.append(Check("sum of qdim^2 = |G|^2", total == n * n, f"{total}"))
    report.checks.append(Check("S unitary", unit < 1e-12, f"{unit:.1e}"))
    report.payload = {
        "anyons": [{"name": a.name, "class": Z.group.label(a.rep), "qdim": a.qdim, "spin": a.spin} for a in Z],
    }
    if args.s_matrix:
        report.payload["S"] = S
    return report


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", "-o", help="write the JSON report here instead of stdout")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for fixture lines and fragments")
    common.add_argument("--cap-amplitudes", type=lambda s: int(float(s)), default=None,
                        help="state-vector size limit (default: env HYBRIDSURGERY_CAP_AMPLITUDES or 2^24)")
    common.add_argument("--dump-state", help="write the final state (JSON, plus a .bin buffer for lattice states)")

    p = argparse.ArgumentParser(prog="hybridsurgery", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    rp = sub.add_parser("run-protocol", parents=[common], help="run a surgery protocol")
    rp.add_argument("protocol", help=", ".join(PROTOCOLS))
    rp.add_argument("--n", type=int, default=1)
    rp.add_argument("--seed", type=int, default=0)
    rp.add_argument("--record", help="forced outcomes as a JSON object")
    rp.add_argument("--exhaustive", action="store_true", help="check every measurement branch")
    rp.add_argument("--input", type=int, help="computational basis input for gate protocols")
    rp.add_argument("--variant", default="A", choices=["A", "B"])
    rp.add_argument("--flavour", choices=["r3s", "rs"], default=None)
    rp.add_argument("--theta", help="qutrit phase: 1, -1 or i")
    rp.add_argument("--coefficients", help="qutrit coefficients, comma separated")

    vp = sub.add_parser("verify", parents=[common], help="check fixture files")
    vp.add_argument("fixtures", nargs="+")

    cp = sub.add_parser("cross-check", parents=[common], help="lattice merge/split against the logical projector")
    cp.add_argument("--fragment")
    cp.add_argument("--rows", type=int, default=1)
    cp.add_argument("--inputs", default="paper", choices=["paper", "random"])
    cp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("syndrome-table", parents=[common], help="D(D4) error/syndrome table")
    sp.add_argument("--edge", help="probe edge, e.g. V(1,0) or H(0,0)")
    sp.add_argument("--csv", help="also write the table as CSV")

    ap = sub.add_parser("anyons", parents=[common], help="anyon data of D(G)")
    ap.add_argument("group", help="e.g. D4, S3, Z4, 'Z2 x Z2'")
    ap.add_argument("--s-matrix", action="store_true")
    return p


COMMANDS = {
    "run-protocol": run_protocol,
    "verify": verify,
    "cross-check": cross_check,
    "syndrome-table": syndrome_table_cmd,
    "anyons": anyons_cmd,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.cap_amplitudes is None:
        from .lattice import default_cap

        try:
            args.cap_amplitudes = default_cap()
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return 2
    try:
        report = COMMANDS[args.command](args)
    except UsageError as exc:
        report = Report(args.command, {}, error=str(exc))
    text = report.dumps()
    if args.output:
        Path(args.output).write_text(text)
        for c in report.checks:
            print(f"{'PASS' if c.ok else 'FAIL'}  {c.name}  {c.detail}".rstrip())
        if report.error:
            print(f"error: {report.error}")
        print(f"status: {report.status}")
    else:
        sys.stdout.write(text)
        if report.error:
            print(f"error: {report.error}", file=sys.stderr)
    return report.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

