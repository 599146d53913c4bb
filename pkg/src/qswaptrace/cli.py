"""Command-line entry point: ``qswaptrace <subcommand> [flags]``.

Results go to stdout (or ``--out``) as JSON; ``--format csv`` is available
where a table makes sense.  Exit status is 0 on success, 2 on usage errors
and 1 when the computation itself fails.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, Sequence

from . import cswap, estimate, experiments, measures, permtrace, qstate
from .errors import QSwapTraceError

DEFAULT_SEED = 0


class UsageError(Exception):
    pass


# -- helpers -------------------------------------------------------------------

def _read_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise QSwapTraceError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise QSwapTraceError(f"{path} is not valid JSON: {exc}") from None


def _load_state(args) -> Optional[qstate.State]:
    if getattr(args, "state_file", None):
        return qstate.state_from_json(_read_json(args.state_file))
    if getattr(args, "state", None):
        return qstate.builtin_state(args.state)
    return None


def _require_state(args) -> qstate.State:
    st = _load_state(args)
    if st is None:
        raise UsageError("a state is required: pass --state NAME or --state-file PATH")
    return st


def _target(args, st: qstate.State) -> tuple[int, ...]:
    return cswap.normalize_target(args.target, len(st.dims))


def _emit(args, payload, csv_text: Optional[str] = None) -> None:
    if args.format == "csv":
        if csv_text is None:
            raise UsageError(f"--format csv is not supported by '{args.command}'")
        text = csv_text
    else:
        text = json.dumps(payload, indent=2, ensure_ascii=False) + "\n"
    if args.out:
        try:
            with open(args.out, "w") as fh:
                fh.write(text)
        except OSError as exc:
            raise QSwapTraceError(f"cannot write {args.out}: {exc.strerror}") from None
    else:
        sys.stdout.write(text)


def _table_csv(header: Sequence[str], rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(str(c) if isinstance(c, str) else repr(c) for c in row) for row in rows]
    return "\n".join(lines) + "\n"


def _read_moments(path: str) -> qstate.MomentVector:
    obj = _read_json(path)
    if "moments" in obj:
        vals = obj["moments"]
    elif "per_k" in obj:
        per_k = {int(k): v["estimate"] for k, v in obj["per_k"].items()}
        vals = [1.0] + [per_k[k] for k in range(2, len(per_k) + 2)]
    else:
        raise QSwapTraceError(f"{path} has neither a 'moments' list nor 'per_k' estimates")
    return qstate.MomentVector(vals, int(obj.get("source_dim", 0)))


# -- subcommands ---------------------------------------------------------------

def cmd_state(args) -> None:
    st = _require_state(args)
    tgt = _target(args, st)
    rho_x = qstate.reduced_density(st, tgt)
    payload = qstate.state_to_json(rho_x if args.reduce else st)
    payload["target"] = list(tgt)
    if args.moments:
        payload["moments"] = qstate.moments(rho_x, args.moments).values.tolist()
        payload["source_dim"] = rho_x.dim
    _emit(args, payload)


def cmd_exact_dist(args) -> None:
    st = _require_state(args)
    tgt = _target(args, st)
    dist = cswap.exact_distribution(st, args.copies, tgt, args.method)
    circ = cswap.build_circuit(args.copies, tgt, st.dims)
    payload = dist.to_json()
    payload["method"] = args.method
    payload["circuit"] = {"gate_count": circ.gate_count, **circ.qubit_count_formula}
    _emit(args, payload, _table_csv(["z", "p"], dist.as_dict().items()))


def cmd_sample(args) -> None:
    if args.dist:
        if _load_state(args) is not None:
            raise UsageError("pass either --dist or a state, not both")
        dist = cswap.OutcomeDistribution.from_json(_read_json(args.dist))
    else:
        st = _require_state(args)
        if args.copies is None:
            raise UsageError("--copies is required when sampling from a state")
        dist = cswap.exact_distribution(st, args.copies, _target(args, st), args.method)
    counts = cswap.sample(dist, args.shots, args.seed)
    payload = counts.to_json()
    payload["seed"] = args.seed
    _emit(args, payload, _table_csv(["z", "count"], counts.as_dict().items()))


def cmd_estimate(args) -> None:
    obj = _read_json(args.counts)
    if "counts" in obj:
        result = estimate.traces_from_counts(cswap.ShotCounts.from_json(obj), args.k)
    elif "probabilities" in obj:
        dist = cswap.OutcomeDistribution.from_json(obj)
        result = estimate.traces_from_distribution(dist, args.k)
    else:
        raise QSwapTraceError(f"{args.counts} holds neither counts nor probabilities")
    rows = [(k, e.estimate, e.p_k, e.variance) for k, e in sorted(result.per_k.items())]
    _emit(args, result.to_json(), _table_csv(["k", "estimate", "p_k", "variance"], rows))


def cmd_plan_shots(args) -> None:
    _emit(args, estimate.plan_shots(args.epsilon, args.delta, args.copies).to_json())


def cmd_newton_girard(args) -> None:
    mv = _read_moments(args.moments)
    coeffs = estimate.newton_girard_coeffs(mv, args.rank)
    ext = estimate.extend_moments(coeffs, mv, args.extend)
    payload = {
        "rank": args.rank,
        "coefficients": coeffs.a.tolist(),
        "moments": ext.values.tolist(),
        "warnings": list(ext.warnings),
    }
    rows = [(k, v) for k, v in enumerate(ext.values.tolist(), start=1)]
    _emit(args, payload, _table_csv(["k", "m_k"], rows))


def cmd_measure(args) -> None:
    st = _require_state(args)
    tgt = _target(args, st)
    rho = qstate.reduced_density(st, tgt)
    kind = args.kind
    param: dict = {}
    if kind == "concurrence":
        copies = 2
    elif kind == "icem":
        R = args.R if args.R is not None else rho.rank() - 1
        param["R"] = R
        copies = max(2, R + 1)
    else:
        if args.q is None:
            raise UsageError(f"--q is required for --kind {kind}")
        param["q"] = args.q
        copies = args.q
    mv = qstate.moments(rho, copies)
    dist = cswap.exact_distribution_moments(mv, copies)
    if kind == "concurrence":
        value = measures.concurrence(mv.m(2))
        prob = measures.concurrence_from_distribution(dist)
    elif kind == "icem":
        value = measures.icem(mv, param["R"])
        prob = measures.icem_from_distribution(dist, param["R"])
    elif kind == "tsallis":
        value = measures.tsallis_q(mv, args.q)
        prob = measures.tsallis_q_from_distribution(dist, args.q)
    else:
        value = measures.q_concurrence(mv, args.q)
        prob = measures.q_concurrence_from_distribution(dist, args.q)
    _emit(args, {"kind": kind, "cut": list(tgt), **param, "copies": copies,
                 "value": value, "probability_form": prob})


def cmd_nonlinear(args) -> None:
    st = _load_state(args)
    dm = None
    if args.moments:
        if st is not None:
            raise UsageError("pass either --moments or a state, not both")
        mv = _read_moments(args.moments)
        dim = args.dim or mv.source_dim
    elif st is not None:
        dm = qstate.reduced_density(st, _target(args, st))
        mv = qstate.moments(dm, args.trunc + 1)
        dim = dm.dim
    else:
        raise UsageError("pass --state, --state-file or --moments")
    trunc = measures.TruncationSpec(args.trunc)
    if args.kind == "exp-trace":
        if not dim:
            raise UsageError("--dim is required when the moments file has no source_dim")
        value = measures.exp_trace(mv, dim, trunc, args.beta)
        extra = {"beta": args.beta, "tail_bound": measures.exp_tail_bound(args.trunc)}
    elif args.kind == "entropy":
        value = measures.von_neumann_entropy(mv, dim, trunc, dm)
        extra = {}
    else:
        value = measures.gibbs_cost(mv, args.trunc, dm)
        extra = {}
    _emit(args, {"kind": args.kind, "trunc": args.trunc, "value": value, **extra})


def cmd_experiment(args) -> None:
    st = _load_state(args)
    source = st if args.state_file else (args.state or "ghz3")
    if args.kind == "mse":
        rep = experiments.run_mse_experiment(source, args.copies, args.shots, args.seed)
    else:
        rep = experiments.run_hoeffding_experiment(
            source, args.copies, args.epsilon, args.delta, args.reps, args.seed
        )
    _emit(args, rep.to_json(), rep.to_csv())


def cmd_word_trace(args) -> None:
    word = permtrace.PermutationWord.parse(args.word, args.copies)
    payload = permtrace.describe_word(word)
    payload["summary"] = f"[{args.word}] k={args.copies} \u2192 {payload['expression']}"
    st = _load_state(args)
    if st is not None:
        rho = qstate.reduced_density(st, _target(args, st))
        payload["value"] = permtrace.eval_trace_cycles(word, rho)
        if rho.dim**args.copies <= permtrace.DENSE_CAP:
            payload["dense_value"] = permtrace.eval_trace_dense(word, rho)
    _emit(args, payload)


# -- parser --------------------------------------------------------------------

def _add_state_args(p: argparse.ArgumentParser, target_flags=("--target",)) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--state", help=f"built-in state: {', '.join(qstate.BUILTIN_STATES)}")
    g.add_argument("--state-file", help="JSON state file")
    p.add_argument(*target_flags, dest="target", default="1",
                   help="subsystems of the cut, e.g. 1 or 1,2 or 'all' (default 1)")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")

    parser = argparse.ArgumentParser(
        prog="qswaptrace",
        description="Controlled-SWAP test simulation and power-trace estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("state", parents=[common], help="emit a state as JSON")
    _add_state_args(p)
    p.add_argument("--reduce", action="store_true", help="emit the reduced state of the target")
    p.add_argument("--moments", type=int, metavar="K", help="also emit m_1..m_K of the target")
    p.set_defaults(func=cmd_state)

    p = sub.add_parser("exact-dist", parents=[common], help="exact outcome distribution")
    _add_state_args(p)
    p.add_argument("--copies", type=int, required=True)
    p.add_argument("--method", choices=cswap.METHODS, default="moments")
    p.set_defaults(func=cmd_exact_dist)

    p = sub.add_parser("sample", parents=[common], help="draw shots from a distribution")
    _add_state_args(p)
    p.add_argument("--dist", help="distribution JSON file to sample from")
    p.add_argument("--copies", type=int)
    p.add_argument("--shots", type=int, default=2**15)
    p.add_argument("--method", choices=cswap.METHODS, default="moments")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("estimate", parents=[common], help="invert counts to power traces")
    p.add_argument("--counts", required=True, help="counts or distribution JSON file")
    p.add_argument("--k", default=None, help="k values, e.g. 2..6 or 2,4 (default all)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("plan-shots", parents=[common], help="Hoeffding shot budget")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--copies", type=int, required=True)
    p.set_defaults(func=cmd_plan_shots)

    p = sub.add_parser("newton-girard", parents=[common], help="extend moments past the rank")
    p.add_argument("--moments", required=True, help="JSON file with a 'moments' list")
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--extend", type=int, default=0, metavar="L")
    p.set_defaults(func=cmd_newton_girard)

    p = sub.add_parser("measure", parents=[common], help="entanglement measures of a cut")
    p.add_argument("--kind", choices=("concurrence", "icem", "tsallis", "qconcurrence"), required=True)
    _add_state_args(p, target_flags=("--cut", "--target"))
    p.add_argument("--q", type=int)
    p.add_argument("--R", type=int)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("nonlinear", parents=[common], help="tr e^rho, entropy, Gibbs cost")
    p.add_argument("--kind", choices=("exp-trace", "entropy", "gibbs-cost"), required=True)
    p.add_argument("--trunc", type=int, required=True, metavar="N")
    _add_state_args(p)
    p.add_argument("--moments", help="JSON file with a 'moments' list instead of a state")
    p.add_argument("--dim", type=int, help="tr(I) when reading moments")
    p.add_argument("--beta", type=float, default=1.0)
    p.set_defaults(func=cmd_nonlinear)

    p = sub.add_parser("experiment", parents=[common], help="seeded sampling experiments")
    p.add_argument("kind", choices=("mse", "hoeffding"))
    _add_state_args(p)
    p.add_argument("--copies", type=int, default=4)
    p.add_argument("--shots", type=int, default=2**15)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--csv", dest="format", action="store_const", const="csv")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("word-trace", parents=[common], help="cycle type and trace of a SWAP word")
    p.add_argument("--word", required=True, help="comma-separated indices, e.g. 2,4,5,2,1")
    p.add_argument("--copies", type=int, required=True)
    _add_state_args(p)
    p.set_defaults(func=cmd_word_trace)

    return parser


def _check_threads_env() -> None:
    raw = os.environ.get("QSWAPTRACE_THREADS")
    if raw is None:
        return
    if not raw.strip().isdigit():
        raise UsageError(f"QSWAPTRACE_THREADS must be a nonnegative integer, got {raw!r}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _check_threads_env()
        args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except QSwapTraceError as exc:
        print(f"qswaptrace: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
