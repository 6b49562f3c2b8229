"""Command-line entry point: one subcommand per module plus a combined ``verify``.

Exit status is 0 when every selected check passes, 1 when any fails and 2 on
usage errors.  ``--json`` prints a single stable-ordered document; wall times
are left out of it unless ``--timings`` is given so that equal seeds give
byte-identical output.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Any

from .linalg_core import DEFAULT_TOL, SizeLimitError
from .report import IdentityReport, all_passed, sort_key

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0.1.0"


@dataclass
class ReportBundle:
    config: dict[str, Any]
    reports: list[IdentityReport] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    data: dict[str, Any] = field(default_factory=dict)
    version: str = field(default_factory=tool_version)

    @property
    def passed(self) -> bool:
        return all_passed(self.reports)

    def sorted_reports(self) -> list[IdentityReport]:
        return sorted(self.reports, key=sort_key)

    def to_dict(self, timings: bool = False) -> dict[str, Any]:
        out = {
            "version": self.version,
            "config": dict(sorted(self.config.items())),
            "pass": self.passed,
            "counts": self.counts(),
            "reports": [r.to_dict() for r in self.sorted_reports()],
        }
        if self.data:
            out["data"] = self.data
        if timings:
            out["timings"] = {k: round(v, 4) for k, v in self.timings.items()}
        return out

    def counts(self) -> dict[str, int]:
        c = {"pass": 0, "fail": 0, "shadowed": 0}
        for r in self.reports:
            c[r.status] += 1
        return c

    def text(self, timings: bool = True) -> str:
        lines = [r.line() for r in self.sorted_reports()]
        for key, value in self.data.items():
            lines.append(f"{key}: {json.dumps(value)}")
        c = self.counts()
        lines.append(f"{len(self.reports)} checks: {c['pass']} passed, {c['fail']} failed, {c['shadowed']} shadowed")
        if timings:
            lines += [f"  {name}: {secs:.2f} s" for name, secs in self.timings.items()]
        return "\n".join(lines)


Section = tuple[str, Callable[[], list[IdentityReport]]]


def run_sections(bundle: ReportBundle, sections: Sequence[Section], threads: int = 1) -> None:
    def timed(section: Section):
        name, fn = section
        start = time.perf_counter()
        reports = fn()
        return name, reports, time.perf_counter() - start

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(timed, sections))
    else:
        results = [timed(s) for s in sections]
    for name, reports, secs in results:
        bundle.reports.extend(reports)
        bundle.timings[name] = secs


# section builders


def _sequence_sections(n: int, M: int) -> list[Section]:
    from .sequences import verify_sequence_identities

    return [("sequences", lambda: verify_sequence_identities(n, max(M, 3)))]


def _rep_sections(n: int, tol: float, seed: int, samples: int = 10) -> list[Section]:
    from .sps_core import verify_determinant
    from .su2_rep import representation_residuals

    def rep():
        res = representation_residuals(n, samples, seed)
        return [IdentityReport(f"irrep_{k}", {"n": n, "samples": samples}, v, tol) for k, v in sorted(res.items())]

    return [("representation", rep), ("determinant", lambda: verify_determinant(n, seed, tol))]


def _system_sections(system, tol: float, seed: int, full: bool) -> list[Section]:
    from .report import exact
    from .sequences import dim_sequence
    from .sps_core import verify_axioms, verify_equivariance

    def dims():
        expected = dim_sequence(system.n, system.M)
        return [exact("system_dimension", system.dim(m), expected[m], n=system.n, m=m) for m in range(system.M + 1)]

    sections = [("system_dimensions", dims), ("axioms", lambda: verify_axioms(system))]
    if full and system.equivariant:
        sections.append(("equivariance", lambda: verify_equivariance(system, seed=seed)))
    return sections


def _ideal_sections(system, tol: float) -> list[Section]:
    from .ncpoly import verify_ideal_correspondence

    return [("ideal", lambda: verify_ideal_correspondence(system, tol))]


def _fusion_sections(fm, tol: float, seed: int, full: bool) -> list[Section]:
    from .fusion import verify_fusion_dimensions, verify_fusion_equivariance, verify_registry

    sections = [("fusion_registry", lambda: verify_registry(fm, tol)), ("fusion_dimensions", lambda: verify_fusion_dimensions(fm))]
    if full:
        sections.append(("fusion_equivariance", lambda: verify_fusion_equivariance(fm, seed=seed)))
    return sections


def _toeplitz_sections(system, fm, tol: float, seed: int, relations: bool, decay: bool) -> list[Section]:
    from . import toeplitz as tp

    sections = []
    if relations:
        sections.append(("toeplitz_relations", lambda: tp.verify_toeplitz_relations(system, tol=tol, fm=fm)))
        sections.append(("creation_norms", lambda: tp.verify_creation_norms(system, seed=seed)))
        sections.append(("gauge_equivariance", lambda: tp.verify_gauge_equivariance(system, seed=seed)))
    if decay:
        sections.append(("commutator_decay", lambda: tp.verify_commutator_decay(fm, tol=tol)))
        sections.append(("phi_decay", lambda: tp.verify_phi_decay(system)))
    return sections


def _kk_sections(ctx, tol: float) -> list[Section]:
    from . import kk_gysin as kg

    return [
        ("kk_partial_isometry", lambda: kg.certify_partial_isometry(ctx, min(tol, kg.DEFECT_TOL))),
        ("kk_intertwining", lambda: kg.certify_intertwining(ctx, tol) + kg.certify_right_defect_rank_one(ctx, tol)),
        ("kk_entries", lambda: kg.certify_toeplitz_form(ctx, tol)),
        ("kk_gamma_delta", lambda: kg.certify_gamma_delta(ctx, tol) + kg.certify_delta_inverse(ctx, tol)),
        ("kk_theta", lambda: kg.certify_theta(ctx, tol)),
        ("kk_resolvent", lambda: kg.resolvent_bounds(ctx)),
        ("kk_homotopy", lambda: kg.certify_homotopy(ctx, min(tol, kg.DEFECT_TOL))),
        ("kk_commutators", lambda: kg.certify_commutators(ctx)),
    ]


def _k_theory_reports(n: int) -> list[IdentityReport]:
    from .kk_gysin import euler_class, gysin_k_theory

    e = euler_class(n)
    k0, k1 = gysin_k_theory(n)
    tors = 1
    for t in k0.torsion:
        tors *= t
    # the order of coker is |euler| when it is nonzero, and ker has rank one exactly when euler vanishes
    order = 0 if k0.free_rank else tors
    return [
        IdentityReport("euler_class_total", {"n": n}, float(abs(e.total - (1 - n))), 0.0),
        IdentityReport("gysin_cokernel_order", {"n": n}, float(abs(order - abs(e.total))), 0.0),
        IdentityReport("gysin_kernel_rank", {"n": n}, float(abs(k1.free_rank - (1 if e.total == 0 else 0))), 0.0),
    ]


# subcommands


def cmd_seq(args, bundle: ReportBundle) -> None:
    from .sequences import IntegerSequencePack

    pack = IntegerSequencePack.build(args.n, args.max)
    bundle.data["d"] = [pack.d(m) for m in range(args.max + 1)]
    bundle.data["mu"] = [pack.mu(m) for m in range(1, args.max + 1)]
    bundle.data["gamma"] = pack.gamma
    run_sections(bundle, _sequence_sections(args.n, args.max), args.threads)


def cmd_rep(args, bundle: ReportBundle) -> None:
    run_sections(bundle, _rep_sections(args.n, args.tol, args.seed, args.samples), args.threads)


def _read_generators(source: str) -> list[str]:
    path = Path(source)
    text = path.read_text(encoding="utf-8") if path.is_file() else source
    return [g.strip() for line in text.splitlines() for g in line.split(";") if g.strip() and not g.strip().startswith("#")]


def cmd_ideal(args, bundle: ReportBundle) -> None:
    from .ncpoly import HomogeneousIdeal, ideal_component, parse_polynomial, system_from_ideal

    gens = [parse_polynomial(g, args.n) for g in _read_generators(args.gens)]
    J = HomogeneousIdeal(args.n, gens)
    start = time.perf_counter()
    q = args.n + 1
    bundle.data["ideal_dims"] = [ideal_component(J, m).shape[1] for m in range(1, args.max + 1)]
    if args.dims or args.system_out:
        system = system_from_ideal(J, args.max)
        bundle.data["system_dims"] = [system.dim(m) for m in range(args.max + 1)]
        if args.system_out:
            system.save(args.system_out)
    from .report import exact

    for m, dim in enumerate(bundle.data["ideal_dims"], start=1):
        comp = bundle.data.get("system_dims")
        if comp is not None:
            bundle.reports.append(exact("ideal_complement_dimension", dim + comp[m], q**m, n=args.n, m=m))
    bundle.timings["ideal"] = time.perf_counter() - start


def cmd_build(args, bundle: ReportBundle) -> None:
    from .sps_core import build_system

    start = time.perf_counter()
    system = build_system(args.n, args.max_degree)
    system.save(args.out)
    bundle.timings["build"] = time.perf_counter() - start
    bundle.data["dims"] = list(system.dims)
    bundle.data["out"] = str(args.out)
    run_sections(bundle, _system_sections(system, args.tol, args.seed, full=False), args.threads)


def cmd_fusion(args, bundle: ReportBundle) -> None:
    from .fusion import FusionMaps
    from .linalg_core import unitarity_defect
    from .sps_core import build_system

    M = max(args.k + args.m, 2)
    fm = FusionMaps(build_system(args.n, M))
    bundle.data["blocks"] = list(fm.fusion_blocks(args.k, args.m))
    w = fm.fusion_unitary(args.k, args.m)
    bundle.reports.append(IdentityReport("fusion_unitary", {"n": args.n, "k": args.k, "m": args.m}, unitarity_defect(w), args.tol))
    if args.verify_all:
        run_sections(bundle, _fusion_sections(fm, args.tol, args.seed, full=True), args.threads)


def cmd_toeplitz(args, bundle: ReportBundle) -> None:
    from .fusion import FusionMaps
    from .sps_core import build_system

    system = build_system(args.n, args.max_degree)
    fm = FusionMaps(system)
    relations, decay = args.relations, args.decay
    if not relations and not decay:
        relations = decay = True
    run_sections(bundle, _toeplitz_sections(system, fm, args.tol, args.seed, relations, decay), args.threads)


def cmd_kk(args, bundle: ReportBundle) -> None:
    from .kk_gysin import KKContext, k_theory_report

    if args.k_theory:
        bundle.data["k_theory"] = k_theory_report(args.n)
        bundle.reports.extend(_k_theory_reports(args.n))
    if args.certify or not args.k_theory:
        ctx = KKContext.for_ranges(args.n, args.kmax, args.mmax)
        run_sections(bundle, _kk_sections(ctx, args.tol), args.threads)


def cmd_verify(args, bundle: ReportBundle) -> None:
    from .fusion import FusionMaps
    from .kk_gysin import KKContext
    from .sps_core import build_system, load_system

    if args.input:
        system = load_system(args.input)
    else:
        system = build_system(args.n, args.max_degree)
    bundle.data["dims"] = list(system.dims)
    sections = _system_sections(system, args.tol, args.seed, full=args.all)
    fm = FusionMaps(system) if system.equivariant else None
    if fm is not None:
        sections += _fusion_sections(fm, args.tol, args.seed, full=args.all)
        sections += _toeplitz_sections(system, fm, args.tol, args.seed, relations=True, decay=args.all)
    if args.all:
        sections = _sequence_sections(system.n, system.M) + _rep_sections(system.n, args.tol, args.seed) + sections
        sections += _ideal_sections(system, args.tol)
        if fm is not None:
            # the doubled operators need two extra degrees beyond the checked columns
            K = max(1, (system.M - 2) // 2)
            if 2 * K + 2 <= system.M:
                ctx = KKContext(system, K, K)
                sections += _kk_sections(ctx, args.tol)
        sections.append(("k_theory", lambda: _k_theory_reports(system.n)))
    run_sections(bundle, sections, args.threads)


# argument parsing


def _positive_float(text: str) -> float:
    value = float(text)
    if not (value > 0 and math.isfinite(value)):
        raise argparse.ArgumentTypeError("must be a positive finite number")
    return value


def _int_at_least(low: int):
    def parse(text: str) -> int:
        value = int(text)
        if value < low:
            raise argparse.ArgumentTypeError(f"must be at least {low}")
        return value

    return parse


def _global_options(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--tol", type=_positive_float, default=default(DEFAULT_TOL), help="residual tolerance (default 1e-9)")
    parser.add_argument("--seed", type=int, default=default(0), help="seed for sampled group elements")
    parser.add_argument("--json", action="store_true", default=default(False), help="print one JSON document")
    parser.add_argument("--threads", type=_int_at_least(1), default=default(1), help="run independent sections in parallel")
    parser.add_argument("--timings", action="store_true", default=default(False), help="include wall times in JSON output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="su2sps", description="Verify SU(2) subproduct system identities blockwise.")
    _global_options(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)
    pos = _int_at_least(1)
    nonneg = _int_at_least(0)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        _global_options(p, suppress=True)
        return p

    p = add("seq", "dimension and normalisation sequences")
    p.add_argument("--n", type=pos, required=True)
    p.add_argument("--max", type=_int_at_least(3), default=20)
    p.set_defaults(func=cmd_seq)

    p = add("rep", "irreducible representation and determinant")
    p.add_argument("--n", type=pos, required=True)
    p.add_argument("--check", action="store_true", help="accepted for compatibility; checks always run")
    p.add_argument("--samples", type=pos, default=10)
    p.set_defaults(func=cmd_rep)

    p = add("ideal", "subproduct system from a homogeneous ideal")
    p.add_argument("--n", type=pos, required=True)
    p.add_argument("--gens", required=True, help="file or inline generators separated by ';'")
    p.add_argument("--max", type=pos, default=4)
    p.add_argument("--dims", action="store_true")
    p.add_argument("--system-out", type=Path)
    p.set_defaults(func=cmd_ideal)

    p = add("build", "build the SU(2) system and save it as JSON")
    p.add_argument("--n", type=pos, required=True)
    p.add_argument("--max-degree", type=pos, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_build)

    p = add("fusion", "fusion unitary W_{k,m} and the identity registry")
    p.add_argument("--n", type=pos, required=True)
    p.add_argument("--k", type=nonneg, required=True)
    p.add_argument("--m", type=nonneg, required=True)
    p.add_argument("--verify-all", action="store_true")
    p.set_defaults(func=cmd_fusion)

    p = add("toeplitz", "creation operator relations and decay")
    p.add_argument("--n", type=pos, required=True)
    p.add_argument("--max-degree", type=_int_at_least(2), required=True)
    p.add_argument("--relations", action="store_true")
    p.add_argument("--decay", action="store_true")
    p.set_defaults(func=cmd_toeplitz)

    p = add("kk", "blockwise certificates for the doubled operators and K-theory")
    p.add_argument("--n", type=pos, required=True)
    p.add_argument("--kmax", type=nonneg, default=2)
    p.add_argument("--mmax", type=nonneg, default=2)
    p.add_argument("--certify", action="store_true")
    p.add_argument("--k-theory", action="store_true")
    p.set_defaults(func=cmd_kk)

    p = add("verify", "run every check on a built or loaded system")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--in", dest="input", type=Path, help="system JSON written by build")
    src.add_argument("--n", type=pos)
    p.add_argument("--max-degree", type=_int_at_least(2))
    p.add_argument("--all", action="store_true")
    p.set_defaults(func=cmd_verify)
    return parser


def _config(args) -> dict[str, Any]:
    skip = {"func", "json", "threads", "timings"}
    return {k: str(v) if isinstance(v, Path) else v for k, v in vars(args).items() if k not in skip and v is not None}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "verify" and args.input is None and args.max_degree is None:
        parser.error("verify --n needs --max-degree")
    if args.command == "verify" and args.input is not None and not args.input.is_file():
        parser.error(f"no such file: {args.input}")
    bundle = ReportBundle(_config(args))
    try:
        args.func(args, bundle)
    except (SizeLimitError, IndexError, ValueError, OSError) as exc:
        parser.error(str(exc))
    if args.command == "kk" and args.k_theory and not args.certify:
        print(json.dumps(bundle.data["k_theory"], sort_keys=True))
    elif args.json:
        print(json.dumps(bundle.to_dict(args.timings), sort_keys=True, indent=2))
    else:
        print(bundle.text())
    return EXIT_OK if bundle.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
