"""Command-line entry point: ``schwingerkit <subcommand> [options]``.

Every subcommand writes CSV (``%.17g`` floats, LF line ends) or JSON to
stdout or ``--out``. A ``--config`` file of ``key = value`` lines supplies
defaults that explicit flags override.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import basis as B
from . import circuits as C
from . import noise as N
from . import spectra as S
from .hamiltonian import HamiltonianParams, build_hamiltonian, format_float
from .mitigation import ZnePointSet, zne_extrapolate

logger = logging.getLogger("schwingerkit")


class UsageError(Exception):
    """Bad argument combination detected after parsing."""


# ---------------------------------------------------------------------------
# output


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return format_float(float(v))
    if isinstance(v, (list, tuple)):
        return " ".join(str(_cell(x)) for x in v)
    return v


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    w = csv.writer(buf, lineterminator="\n")
    keys = list(rows[0])
    w.writerow(keys)
    for r in rows:
        w.writerow([_cell(r.get(k)) for k in keys])
    return buf.getvalue()


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not serializable: {type(o)}")


def emit(args, rows: list[dict] | None = None, payload=None, csv_text: str | None = None) -> None:
    if args.format == "json":
        text = json.dumps(payload if payload is not None else rows, default=_jsonable, sort_keys=True) + "\n"
    else:
        text = csv_text if csv_text is not None else rows_to_csv(rows or [])
    if args.out:
        Path(args.out).write_text(text, newline="\n")
    else:
        sys.stdout.write(text)


def _split(s: str, kind):
    try:
        return [kind(v) for v in s.replace(",", " ").split()]
    except ValueError:
        raise UsageError(f"cannot parse {s!r} as a list of {kind.__name__} values") from None


def _floats(s: str) -> list[float]:
    return _split(s, float)


def _ints(s: str) -> list[int]:
    return _split(s, int)


def _times(args) -> np.ndarray:
    if args.times:
        return np.asarray(_floats(args.times))
    n = int(round(args.t_max / args.t_step))
    return np.round(np.arange(n + 1) * args.t_step, 12)


def _odd_scales(values: list[int], flag: str) -> list[int]:
    bad = [r for r in values if r < 1 or r % 2 == 0]
    if bad:
        raise UsageError(f"{flag} values must be odd positive integers, got {bad}")
    return values


def _params(args) -> HamiltonianParams:
    return HamiltonianParams(args.x, args.mu)


def _noise(args) -> N.NoiseModel | None:
    if args.eps <= 0 and not getattr(args, "readout", 0):
        return None
    ro = getattr(args, "readout", 0.0)
    if ro:
        return N.NoiseModel.symmetric_readout(ro, 2, args.eps)
    return N.NoiseModel(args.eps)


# ---------------------------------------------------------------------------
# subcommands


def cmd_basis(args):
    cfg = B.LatticeConfig(args.sites, args.link_cutoff, args.lt)
    k = None if args.k == "none" else int(args.k)
    basis = B.sector_basis(cfg, k, args.parity)
    if args.lt is not None:
        basis = B.truncate_total_energy(basis, args.lt)
    rows = []
    for j, st in enumerate(basis.states):
        rows.append({
            "index": j,
            "occ": [s.occ_string for s, _ in st.components],
            "flux": [",".join(map(str, s.fluxes)) for s, _ in st.components],
            "coeffs": [c for _, c in st.components],
            "pairs": st.pair_count,
            "electric_energy": st.electric_energy,
        })
    emit(args, rows, {"dim": len(basis), "k": basis.k, "parity": basis.parity,
                      "states": [s.to_dict() for s in basis.states]})


def cmd_scaling(args):
    ns = [n for n in (1, 2, 4, 6, 8, 10, 12) if n <= args.max_sites]
    if args.sites:
        ns = _ints(args.sites)
    rows = [r.as_dict() for r in B.scaling_table(ns, max_spatial=max(args.max_sites, max(ns)))]
    fits = {}
    for key in ("d_physical", "d_k0", "d_even", "d_odd"):
        pts = [(r["n_spatial"], r[key]) for r in rows if r[key] and r["n_spatial"] >= args.fit_min_sites]
        if len(pts) >= 2:
            a, b = B.exponential_fit(*zip(*pts))
            fits[key] = {"a": a, "b": b}
    if args.format == "csv":
        text = rows_to_csv(rows)
        if fits:
            text += "\n" + rows_to_csv([{"quantity": k, "a": v["a"], "b": v["b"]} for k, v in fits.items()])
        emit(args, csv_text=text)
    else:
        emit(args, payload={"rows": rows, "fits": fits})


def cmd_spectrum(args):
    cfg = B.LatticeConfig(args.sites, args.link_cutoff, args.lt)
    k = None if args.k == "none" else int(args.k)
    basis = B.sector_basis(cfg, k, args.parity)
    if args.lt is not None:
        basis = B.truncate_total_energy(basis, args.lt)
    if basis.is_empty:
        raise UsageError("the requested sector is empty")
    h = build_hamiltonian(basis, _params(args), sparse=len(basis) > S.DENSE_THRESHOLD)
    res = S.eigensolve(h, n_eig=args.n_eig)
    ev = res.eigenvalues
    rows = [{"index": i, "eigenvalue": e, "shifted": e - ev[0]} for i, e in enumerate(ev)]
    emit(args, rows, {"dim": len(basis), "eigenvalues": ev, "shifted": ev - ev[0]})


def cmd_vacuum(args):
    rows = []
    for n in _ints(args.sites):
        v = S.vacuum_properties(n, args.x, args.mu, args.lt, args.link_cutoff)
        rows.append({"n_spatial": n, "energy": v.energy, "energy_density": v.energy_density,
                     "condensate": v.condensate, "electric_energy": v.electric_energy})
    emit(args, rows)


def cmd_convergence(args):
    study = S.convergence_study(args.x, args.mu, args.parity, tuple(_ints(args.lt_values)),
                                args.reference_link_cutoff, _times(args))
    if args.residuals:
        if study.residuals is None:
            raise UsageError("residuals exist only for the even sector")
        emit(args, csv_text=study.residuals.to_csv(), payload=json.loads(study.residuals.to_json()))
        return
    rows = [{"cutoff": k, "eigenvalues": list(v), "shifted": list(v - v[0])} for k, v in study.rows()]
    emit(args, rows)


def cmd_evolve(args):
    params = _params(args)
    times = _times(args)
    if args.method == "exact":
        basis = S.two_site_sector(+1, 3)
        psi0 = np.zeros(len(basis))
        psi0[0] = 1.0
        ts = S.evolve_exact(build_hamiltonian(basis, params), psi0, times)
        emit(args, csv_text=ts.to_csv(), payload=json.loads(ts.to_json()))
        return
    shots = None if args.exact_probs else args.shots
    noise = _noise(args)
    rs = _odd_scales(_ints(args.r), "--r")
    series = [N.evolve_and_observe(args.method, params, times, shots, noise, r, args.dt, args.seed + i)
              for i, r in enumerate(rs)]
    if not args.zne:
        text = "".join(s.to_csv(r) if i == 0 else s.to_csv(r).split("\n", 1)[1]
                       for i, (s, r) in enumerate(zip(series, rs)))
        emit(args, csv_text=text, payload=[json.loads(s.to_json()) for s in series])
        return
    if len(rs) < args.zne_order + 1:
        raise UsageError(f"--zne needs at least {args.zne_order + 1} values of --r")
    rows = []
    for name in series[0].values:
        for i, t in enumerate(times):
            pts = ZnePointSet(rs, [s.values[name][i] for s in series],
                              None if shots is None else [max(s.stderr[name][i], 1e-12) for s in series])
            fit = zne_extrapolate(pts, args.zne_order)
            rows.append({"t": float(t), "r": 0, "observable": name, "value": fit.intercept, "stderr": fit.stderr})
    emit(args, rows)


def cmd_trotter_scan(args):
    decomp = N.two_site_decomposition(_params(args))
    scan = C.trotter_ordering_scan(decomp, args.dt, args.t)
    order = np.argsort(scan.errors)
    show = order if args.all else order[: args.top]
    rows = [{"rank": i, "order": " ".join(scan.orders[j]), "error": scan.errors[j]} for i, j in enumerate(show)]
    default = C.trotter_error(decomp, args.dt, args.t)
    payload = {"summary": scan.summary, "default_order": " ".join(C.TROTTER_TERMS),
               "default_error": default, "orders": rows}
    emit(args, rows, payload)


def cmd_vqe(args):
    from . import vqe as V

    _odd_scales([args.r_base] + (_ints(args.zne) if args.zne else []), "--r-base/--zne")
    problem = V.VqeProblem.two_site(_params(args), args.lt)
    sim = V.SimConfig(None if args.exact_probs else args.shots, args.eps, args.r_base, args.seed,
                      tuple(_ints(args.zne)) if args.zne else None, args.zne_order, args.inverted)
    if args.inverted and not args.zne:
        raise UsageError("--inverted needs --zne")
    opt = V.default_optimizer(args.seed, method=args.optimizer, budget=args.budget, n_init=args.n_init)
    results = V.vqe_spectrum(problem, sim, opt) if args.levels == "all" else [V.vqe_ground_state(problem, sim, opt)]
    if args.levels not in ("all", "0"):
        for _ in range(int(args.levels)):
            results.append(V.vqe_excited_state(problem, results[-1], sim, opt))
    exact = np.linalg.eigvalsh(problem.matrix)
    rows = [{"level": r.level, "energy": r.energy.value, "stderr": r.energy.stderr,
             "exact": exact[r.level], "condensate": r.condensate.value,
             "condensate_stderr": r.condensate.stderr, "angles": list(r.angles),
             "evaluations": r.trace.n_evaluations} for r in results]
    emit(args, rows, [r.to_dict() for r in results])


def cmd_cartan(args):
    decomp = N.two_site_decomposition(_params(args))
    from scipy.linalg import expm

    u = expm(-1j * C.traceless_matrix(decomp) * args.t)
    ang = C.cartan_decompose_symmetric(u)
    circ = C.build_propagator_circuit(ang, args.variant, drop_leading_z=not args.full)
    got = C.circuit_unitary(circ)
    if args.full:
        fid, kind = C.phase_fidelity(got, u), "unitary"
    else:
        # the dropped phase layer only matters off the |00> input
        fid, kind = float(abs(np.vdot(u[:, 0], got[:, 0])) ** 2), "state"
    payload = {"t": args.t, "theta": list(ang.theta), "cartan_class": list(C.cartan_class(ang)),
               "fidelity": fid, "fidelity_kind": kind, "cx_count": circ.count("cx"), "circuit": circ.to_text()}
    if args.format == "csv":
        rows = [{"name": f"theta{i + 1}", "value": v} for i, v in enumerate(ang.theta)]
        emit(args, csv_text=rows_to_csv(rows))
    else:
        emit(args, payload=payload)
    if args.print_circuit:
        sys.stderr.write(circ.to_text() + "\n")


def cmd_zne_fit(args):
    if args.points:
        rows = [[float(v) for v in p.split(":")] for p in args.points.split(",")]
    elif args.input:
        text = sys.stdin.read() if args.input == "-" else Path(args.input).read_text()
        rows = []
        for line in csv.reader(io.StringIO(text)):
            if not line or line[0].strip().startswith("#"):
                continue
            try:
                rows.append([float(v) for v in line if v.strip()])
            except ValueError:
                continue  # header
    else:
        raise UsageError("give --points or --input")
    if not rows or len({len(r) for r in rows}) != 1 or len(rows[0]) not in (2, 3):
        raise UsageError("points must be rows of r,value[,stderr]")
    fit = zne_extrapolate(ZnePointSet.from_rows(rows), args.order, args.chi2_scale, args.interval)
    rows_out = [{"intercept": fit.intercept, "stderr": fit.stderr, "chi2": fit.chi2, "dof": fit.dof,
                 "order": fit.order, "coefficients": list(fit.coefficients)}]
    emit(args, rows_out, fit.to_dict())


# ---------------------------------------------------------------------------
# parser


def _read_config(path: str) -> dict:
    out = {}
    for i, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{i}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", help="write to this file instead of stdout")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="file of key = value defaults")
    p.add_argument("-v", "--verbose", action="store_true")


def _hparams(p, x=0.6, mu=0.1):
    p.add_argument("--x", type=float, default=x, help="hopping strength")
    p.add_argument("--mu", type=float, default=mu, help="fermion mass")


def _sector(p):
    p.add_argument("--sites", type=int, default=2, help="spatial sites N")
    p.add_argument("--link-cutoff", type=int, default=1, help="per-link flux cutoff Lambda")
    p.add_argument("--lt", type=int, default=None, help="total electric-energy cutoff")
    p.add_argument("--k", default="0", choices=("0", "1", "-1", "none"), help="momentum sector")
    p.add_argument("--parity", type=int, default=None, choices=(1, -1))


def _time_grid(p):
    p.add_argument("--times", help="explicit comma-separated times")
    p.add_argument("--t-max", type=float, default=10.0)
    p.add_argument("--t-step", type=float, default=0.1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="schwingerkit", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("basis", help="enumerate and project physical states")
    _sector(p)
    p.set_defaults(func=cmd_basis)

    p = sub.add_parser("scaling", help="Hilbert-space dimensions and exponential fits")
    p.add_argument("--max-sites", type=int, default=12)
    p.add_argument("--sites", help="explicit comma-separated lattice sizes")
    p.add_argument("--fit-min-sites", type=int, default=4,
                   help="smallest lattice included in the exponential fits")
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("spectrum", help="eigenvalues of a sector Hamiltonian")
    _sector(p)
    _hparams(p)
    p.add_argument("--n-eig", type=int, default=None)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("vacuum", help="ground-state properties against lattice size")
    p.add_argument("--sites", default="2,4,6,8")
    p.add_argument("--lt", type=int, default=10)
    p.add_argument("--link-cutoff", type=int, default=None)
    _hparams(p)
    p.set_defaults(func=cmd_vacuum)

    p = sub.add_parser("convergence", help="truncated spectra and pair-probability residuals")
    _hparams(p)
    p.add_argument("--parity", type=int, default=1, choices=(1, -1))
    p.add_argument("--lt-values", default="1,2,3,4")
    p.add_argument("--reference-link-cutoff", type=int, default=10)
    p.add_argument("--residuals", action="store_true", help="emit residual curves instead of spectra")
    _time_grid(p)
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("evolve", help="two-site dynamics from the empty state")
    _hparams(p)
    p.add_argument("--method", choices=("cartan", "trotter", "exact"), default="cartan")
    p.add_argument("--dt", type=float, default=0.1, help="Trotter step")
    p.add_argument("--shots", type=int, default=8192)
    p.add_argument("--exact-probs", action="store_true", help="use exact probabilities, no sampling")
    p.add_argument("--eps", "--noise", dest="eps", type=float, default=0.0,
                   help="depolarizing strength per CNOT")
    p.add_argument("--readout", type=float, default=0.0, help="symmetric readout flip probability")
    p.add_argument("--r", default="1", help="CNOT repetition factors (odd), comma-separated")
    p.add_argument("--zne", action="store_true", help="extrapolate the r values to zero noise")
    p.add_argument("--zne-order", type=int, default=2, choices=(1, 2))
    _time_grid(p)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("trotter-scan", help="Trotter error over all term orderings")
    _hparams(p)
    p.add_argument("--dt", type=float, default=0.1)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--all", action="store_true")
    p.set_defaults(func=cmd_trotter_scan)

    p = sub.add_parser("vqe", help="variational ground and excited states")
    _hparams(p)
    p.add_argument("--lt", type=int, default=3, choices=(1, 2, 3))
    p.add_argument("--shots", type=int, default=8192)
    p.add_argument("--exact-probs", action="store_true")
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--r-base", type=int, default=1, help="CNOT repetition during optimization")
    p.add_argument("--zne", help="comma-separated r values for extrapolation, e.g. 1,3,5,7")
    p.add_argument("--zne-order", type=int, default=2, choices=(1, 2))
    p.add_argument("--inverted", action="store_true", help="optimize the extrapolated energy")
    p.add_argument("--optimizer", choices=("gp", "nelder-mead"), default="gp")
    p.add_argument("--budget", type=int, default=60)
    p.add_argument("--n-init", type=int, default=10)
    p.add_argument("--levels", default="0", help="'0' ground only, 'n' n excited states, 'all'")
    p.set_defaults(func=cmd_vqe)

    p = sub.add_parser("cartan", help="decompose the two-site propagator")
    _hparams(p)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--variant", choices=("3cnot", "6cnot"), default="3cnot")
    p.add_argument("--full", action="store_true", help="keep the leading phase layer")
    p.add_argument("--print-circuit", action="store_true", help="also print the circuit to stderr")
    p.set_defaults(func=cmd_cartan)

    p = sub.add_parser("zne-fit", help="extrapolate a point set to zero noise")
    p.add_argument("--points", help="r:value[:stderr] items, comma-separated")
    p.add_argument("--input", help="CSV file of r,value[,stderr] rows ('-' for stdin)")
    p.add_argument("--order", type=int, default=2, choices=(1, 2))
    p.add_argument("--chi2-scale", action="store_true")
    p.add_argument("--interval", choices=("t68", "normal"), default="t68")
    p.set_defaults(func=cmd_zne_fit)

    for sp_ in sub.choices.values():
        _common(sp_)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = ap.parse_args(argv)
    if args.config:
        try:
            conf = _read_config(args.config)
        except (OSError, UsageError) as exc:
            ap.error(str(exc))
        sub = ap._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        bad = sorted(set(conf) - known)
        if bad:
            ap.error(f"unknown config keys: {', '.join(bad)}")
        sub.set_defaults(**conf)
        args = ap.parse_args(argv)
        # argparse skips type conversion for string defaults of non-string types only
        # when the action has no type; re-run conversion explicitly
        for a in sub._actions:
            if a.dest in conf and a.type is not None and isinstance(getattr(args, a.dest), str):
                setattr(args, a.dest, a.type(getattr(args, a.dest)))
            elif a.dest in conf and a.const is True and isinstance(getattr(args, a.dest), str):
                setattr(args, a.dest, getattr(args, a.dest).lower() in ("1", "true", "yes", "on"))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"schwingerkit {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"schwingerkit {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
