"""Command-line interface: build, eval, sweep, encode, decode and pieces.

Every command prints a single ``error: ...`` line and exits with status 1 on
bad input.
"""

import json
import sys

import click
import numpy as np

from . import analysis, codec
from .approximators import build_network, theoretical_rate
from .network import check, load_json, num_weights, realize, save_json, scalar_function
from .primitives import multiplication_network
from .quantization import report
from .targets import target_from_spec


def _eps(ctx, param, value):
    if value is not None and not 0 < value < 0.5:
        raise click.BadParameter("eps must be in (0, 0.5)")
    return value


def _positive(ctx, param, value):
    if value is not None and not value > 0:
        raise click.BadParameter(f"{param.name} must be positive")
    return value


def _floats(text):
    try:
        return [float(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise click.BadParameter(f"cannot parse {text!r} as comma-separated numbers")


class _Problem:
    """A target spec resolved into a builder and a reference function."""

    def __init__(self, spec, depth_param):
        self.name = spec.get("name", spec.get("kind"))
        if spec.get("kind") == "multiplication":
            M_bound = int(spec.get("M", 1))
            L = int(depth_param if depth_param is not None else spec.get("L", 1))
            if M_bound < 1 or L < 1:
                raise ValueError("multiplication needs M >= 1 and L >= 1")
            self.dim, self.rate = 2, None
            self.func = lambda X: X[:, 0] * X[:, 1]
            self.build = lambda eps, p: multiplication_network(M_bound, eps, L)
            return
        target = target_from_spec(spec)
        self.dim = target.dim
        self.func = target
        self.build = lambda eps, p: build_network(target, eps, p)
        self.rate = lambda p: theoretical_rate(target, p)


def _load_problem(path, depth_param):
    with open(path) as fh:
        spec = json.load(fh)
    if not isinstance(spec, dict):
        raise ValueError("target spec must be a JSON object")
    return _Problem(spec, depth_param)


@click.group()
def cli():
    """Explicit ReLU network constructions and checks."""


@cli.command()
@click.argument("target_spec", type=click.Path(exists=True, dir_okay=False))
@click.option("--eps", type=float, required=True, callback=_eps, help="Accuracy in (0, 1/2).")
@click.option("--p", "p", type=float, default=2.0, show_default=True, callback=_positive,
              help="L^p exponent.")
@click.option("--depth-param", type=click.IntRange(min=1), default=None,
              help="L for the multiplication network (default: spec field L or 1).")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Network JSON output.")
def build(target_spec, eps, p, depth_param, out):
    """Construct the network for TARGET_SPEC and print depth, M, N and s."""
    problem = _load_problem(target_spec, depth_param)
    net = problem.build(eps, p)
    check(net)
    if out:
        save_json(net, out)
    r = report(net, eps)
    click.echo(f"depth={r['depth']} M={r['M']} N={r['N']} s={r['s']}")


@cli.command(name="eval")
@click.argument("net_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("point")
def eval_cmd(net_file, point):
    """Realize NET_FILE at POINT (comma-separated coordinates)."""
    net = load_json(net_file)
    x = np.array(_floats(point))
    if x.size != net.input_dim:
        raise ValueError(f"dimension mismatch: point has {x.size} coordinates, "
                         f"network expects {net.input_dim}")
    y = realize(net, x)
    click.echo(",".join(repr(float(v)) for v in y))


@cli.command()
@click.argument("target_spec", type=click.Path(exists=True, dir_okay=False))
@click.option("--eps-list", required=True, help="Comma-separated accuracies, at least three.")
@click.option("--p", "p", type=float, default=2.0, show_default=True, callback=_positive)
@click.option("--depth-param", type=click.IntRange(min=1), default=None)
@click.option("--resolution", type=click.IntRange(min=1), default=None,
              help="Grid points per axis (power of two recommended) or Monte Carlo sample count.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="CSV output (default stdout).")
def sweep(target_spec, eps_list, p, depth_param, resolution, seed, out):
    """Build across an eps sweep and write CSV rows plus a fitted-slope row."""
    eps_values = _floats(eps_list)
    if len(eps_values) < 3:
        raise ValueError("need ≥3 points")
    for e in eps_values:
        _eps(None, None, e)
    problem = _load_problem(target_spec, depth_param)
    rows = []
    rate = problem.rate(p) if problem.rate else None
    for e in eps_values:
        net = problem.build(e, p)
        r = report(net, e)
        err = analysis.lp_error(problem.func, scalar_function(net), p, problem.dim,
                                resolution=resolution, seed=seed)
        rows.append({"target_name": problem.name, "eps": e, "p": p, "depth": r["depth"],
                     "M": r["M"], "N": r["N"], "measured_error": err.value,
                     "theoretical_rate": rate})
    slope = analysis.rate_fit([(row["eps"], row["M"]) for row in rows])
    rows.append({"target_name": "fit", "theoretical_rate": rate, "fitted_slope": slope})
    if out:
        with open(out, "w", newline="") as fh:
            analysis.write_report(rows, fh)
    else:
        analysis.write_report(rows, sys.stdout)


@cli.command()
@click.argument("net_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), required=True, help=".nnc output.")
@click.option("--M", "M", type=click.IntRange(min=1), default=None,
              help="Weight budget (default: weights after simplification).")
@click.option("--K", "K", type=click.IntRange(min=2), default=None,
              help="Bits per weight (default: smallest K that represents every weight).")
def encode(net_file, out, M, K):
    """Simplify NET_FILE and write its fixed-length code."""
    net = codec.simplify_network(load_json(net_file))
    if M is None:
        M = max(1, num_weights(net))
    if K is None:
        values = np.concatenate([np.concatenate([l.values, l.bias_values]) for l in net.layers])
        K = codec.minimal_bits(values)
    code = codec.encode_network(net, M, K)
    codec.save_code(code, out)
    bound = codec.code_length(M, K, net.input_dim)
    click.echo(f"M={M} K={K} d={net.input_dim} length={len(code)} bound={bound} "
               f"C={codec.length_constant(net.input_dim)}")


@cli.command()
@click.argument("nnc_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Network JSON output.")
def decode(nnc_file, out):
    """Decode NNC_FILE into a network JSON file."""
    net = codec.decode_network(codec.load_code(nnc_file))
    save_json(net, out)
    click.echo(f"depth={len(net.layers)} M={num_weights(net)}")


def _chord(x0, v, lo, hi):
    """Parameter interval of {x0 + t v} inside the box [lo, hi]^d."""
    t0, t1 = -np.inf, np.inf
    for xj, vj in zip(x0, v):
        if vj != 0:
            a, b = sorted(((lo - xj) / vj, (hi - xj) / vj))
            t0, t1 = max(t0, a), min(t1, b)
    return t0, t1


@cli.command()
@click.argument("net_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--num-slices", type=click.IntRange(min=1), default=10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--resolution", type=click.IntRange(min=3), default=20001, show_default=True,
              help="Grid points per slice.")
@click.option("--domain", default="-0.5,0.5", show_default=True,
              help="Per-coordinate box bounds lo,hi of the sampled region.")
def pieces(net_file, num_slices, seed, resolution, domain):
    """Count affine pieces along random line slices and compare with the bound."""
    net = load_json(net_file)
    if net.output_dim != 1:
        raise ValueError("piece counting needs a scalar-output network")
    bounds = _floats(domain)
    if len(bounds) != 2 or not bounds[0] < bounds[1]:
        raise click.BadParameter("domain must be lo,hi with lo < hi")
    lo, hi = bounds
    rng = np.random.default_rng(seed)
    d = net.input_dim
    counted = 1
    for _ in range(num_slices):
        x0 = rng.uniform(lo, hi, size=d)
        v = rng.normal(size=d)
        v /= np.linalg.norm(v)
        counted = max(counted, analysis.count_slice_pieces(net, x0, v, _chord(x0, v, lo, hi),
                                                           resolution=resolution))
    bound = analysis.piece_bound(net)
    click.echo(f"counted={counted} bound={bound:.6g} ok={counted <= bound}")


def main(argv=None):
    try:
        cli.main(args=argv, prog_name="relunet", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return 1
    except click.exceptions.Abort:
        click.echo("error: aborted", err=True)
        return 1
    except (ValueError, TypeError, KeyError, OSError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        click.echo(f"error: {msg}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
