"""Command-line surface.

Exit codes: 0 success, 1 usage error, 2 runtime failure, 3 verification
failure.  Options may come from a ``key = value`` config file passed with
--config; explicit flags win over the file.
"""

import argparse
import sys

import numpy as np

from . import data, io_formats, neural_field, optimizer, tasks, tensor_core, verification
from .config import TrainConfig
from .io_formats import FileFormatError


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; the contract here is exit 1
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _read_config_file(path):
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, _, val = body.partition("=")
            values[key.strip().replace("-", "_")] = val.strip()
    return values


def _merge_config_file(args, parser):
    """Fill options left at None from the config file, coercing by the
    parser's registered option types."""
    if not getattr(args, "config", None):
        return
    values = _read_config_file(args.config)
    types = {}
    for action in parser._actions:
        types[action.dest] = action.type or str
    for key, raw in values.items():
        if key not in vars(args):
            continue
        if getattr(args, key) is None:
            caster = types.get(key, str)
            setattr(args, key, caster(raw))


def _pick(value, default):
    return default if value is None else value


def _train_config(args, **overrides):
    base = TrainConfig()
    fields = {}
    for name in ("rank", "p", "lambda_vsp", "lambda_j", "kappa", "lambda_s", "seed",
                 "lr", "width", "layers", "fourier_m"):
        v = getattr(args, name, None)
        if v is not None:
            fields[name] = v
    if getattr(args, "iters", None) is not None:
        fields["iterations"] = args.iters
    fields.update(overrides)
    return base.replace(**fields).validate()


def _add_common_training_flags(p):
    p.add_argument("--config", help="key = value option file")
    p.add_argument("--rank", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--lambda-vsp", dest="lambda_vsp", type=float)
    p.add_argument("--lambda-j", dest="lambda_j", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--iters", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--width", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--fourier-m", dest="fourier_m", type=int)
    p.add_argument("--trace", help="write a loss-trace CSV here")
    p.add_argument("--preview", help="write a PGM/PPM slice preview here")


def _maybe_outputs(args, tensor, trace):
    if getattr(args, "trace", None):
        optimizer.write_trace(args.trace, trace)
    if getattr(args, "preview", None) and tensor is not None:
        io_formats.write_image_preview(tensor, args.preview)


# ---------------------------------------------------------------------------
# subcommands

def _cmd_inpaint(args, parser):
    observed = io_formats.read_tensor(args.input)
    config = _train_config(args)
    if args.mask is not None:
        mask = io_formats.read_tensor(args.mask) > 0.5
    elif args.sr is not None:
        mask = data.sample_mask(observed.shape, args.sr, config.seed)
        print(f"mask: {int(mask.sum())}/{mask.size} entries observed")
    else:
        raise UsageError("inpaint needs --sr or --mask")
    result = tasks.inpaint(observed, mask, config)
    io_formats.write_tensor(result.tensor, args.out)
    _maybe_outputs(args, result.tensor, result.trace)
    print(f"inpaint: wrote {args.out} (rmse on observed entries {result.observed_rmse:.6g})")
    return 0


def _cmd_denoise(args, parser):
    observed = io_formats.read_tensor(args.input)
    config = _train_config(args)
    if args.case is not None:
        spec = data.NoiseSpec.preset(args.case)
        observed, _ = data.apply_noise(observed, spec, config.seed)
    elif not args.raw:
        raise UsageError("denoise needs --case 1..5 or --raw")
    result = tasks.denoise(observed, config)
    io_formats.write_tensor(result.clean, args.out)
    sparse_path = args.out_sparse or (args.out + ".sparse")
    io_formats.write_tensor(result.sparse, sparse_path)
    _maybe_outputs(args, result.clean, result.trace)
    support = int(np.count_nonzero(result.sparse))
    print(f"denoise: wrote {args.out} and {sparse_path} (sparse support {support})")
    return 0


def _cmd_sdf(args, parser):
    points = io_formats.read_points(args.points)
    config = _train_config(args)
    model = tasks.sdf_train(points, config)
    io_formats.write_field(model.params, args.out)
    # the normalization frame rides along in a sidecar so upsample can undo it
    with open(args.out + ".frame", "w") as fh:
        fh.write(" ".join(f"{c:.17g}" for c in model.center) + f" {model.scale:.17g}\n")
    _maybe_outputs(args, None, model.trace)
    print(f"sdf: wrote {args.out} ({points.shape[0]} input points)")
    return 0


def _load_sdf_model(path):
    params = io_formats.read_field(path)
    try:
        with open(path + ".frame") as fh:
            vals = [float(t) for t in fh.read().split()]
        center = np.asarray(vals[:3])
        scale = vals[3]
    except OSError:
        center = np.full(3, 0.5)
        scale = 1.0
    return tasks.SdfModel(params, center, scale)


def _cmd_upsample(args, parser):
    model = _load_sdf_model(args.model)
    dense = tasks.upsample(model, args.grid, args.tau)
    io_formats.write_points(dense, args.out)
    print(f"upsample: wrote {dense.shape[0]} points to {args.out}")
    return 0


def _cmd_verify(args, parser):
    n = _pick(args.n, 1000)
    seed = _pick(args.seed, 1)
    if args.suite == "theorem1":
        report = verification.check_theorem1(n, seed)
    elif args.suite == "gradients":
        report = verification.check_gradients(min(n, 100), seed)
    elif args.suite == "hutchinson":
        report = _verify_hutchinson(n, seed)
    elif args.suite == "normchain":
        report = _verify_normchain(min(n, 50), seed)
    else:
        raise UsageError(f"unknown suite {args.suite!r}")
    print(report.summary())
    return 0 if report.ok else 3


def _small_field(seed):
    config = TrainConfig(order=3, rank=4, layers=2, width=8, fourier_m=3,
                         activation="sine", seed=seed)
    return neural_field.init_params(config)


def _verify_hutchinson(n, seed):
    failures = 0
    worst = 0.0
    fields = 3
    for i in range(fields):
        params = _small_field(seed + i)
        eval_fn = lambda batch: neural_field.field_values(params, batch)
        x = verification.RngStream(seed, f"verify/hutch/{i}").uniform(3)
        rep = verification.check_hutchinson(eval_fn, x, 1e-3, n, seed=seed + i)
        failures += rep.failures
        worst = max(worst, rep.worst)
    return verification.CheckReport("hutchinson", fields, failures, worst, seed)


def _verify_normchain(n, seed):
    params = _small_field(seed)
    pts = verification.RngStream(seed, "verify/normchain").uniform(3 * n).reshape(n, 3)
    return verification.check_norm_chain(params, pts)


def _cmd_metrics(args, parser):
    if args.ref.endswith(".xyz") or args.est.endswith(".xyz"):
        ref = io_formats.read_points(args.ref)
        est = io_formats.read_points(args.est)
        thr = args.fscore_thr
        if thr in (None, "auto"):
            thr_val = tensor_core.auto_fscore_threshold(ref)
        else:
            thr_val = float(thr)
        cd = tensor_core.chamfer(est, ref)
        fs = tensor_core.f_score(est, ref, thr_val)
        print(f"chamfer {cd:.6g}  f-score {fs:.6g} (threshold {thr_val:.6g})")
    else:
        ref = io_formats.read_tensor(args.ref)
        est = io_formats.read_tensor(args.est)
        ps = tensor_core.psnr(ref, est)
        ps_text = "inf" if np.isinf(ps) else f"{ps:.4f}"
        ss = tensor_core.ssim(ref, est)
        nr = tensor_core.nrmse(ref, est)
        print(f"psnr {ps_text}  ssim {ss:.6f}  nrmse {nr:.6g}")
    return 0


def _parse_shape(text):
    try:
        shape = tuple(int(tok) for tok in text.lower().split("x"))
    except ValueError:
        raise UsageError(f"bad shape {text!r}, expected like 32x32x8")
    if not shape or any(s < 1 for s in shape):
        raise UsageError(f"bad shape {text!r}")
    return shape


def _cmd_synth(args, parser):
    shape = _parse_shape(args.shape)
    seed = _pick(args.seed, 0)
    tensor, factors = data.synth_lowrank(shape, _pick(args.rank, 3),
                                         smooth=args.smooth, seed=seed)
    io_formats.write_tensor(tensor, args.out)
    print(f"synth: wrote {args.out} shape {'x'.join(map(str, shape))}")
    if args.noise_case is not None:
        spec = data.NoiseSpec.preset(args.noise_case)
        noisy, _ = data.apply_noise(tensor, spec, seed)
        noisy_path = args.out + ".noisy"
        io_formats.write_tensor(noisy, noisy_path)
        print(f"synth: wrote {noisy_path} (case {args.noise_case})")
    return 0


def _cmd_mass(args, parser):
    model = _load_sdf_model(args.model) if args.model.endswith(".cpf") else None
    if model is None:
        raise UsageError("mass expects a .cpf field checkpoint")
    g = _pick(args.grid, 64)
    axes = [np.linspace(0.0, 1.0, g)] * model.params.order
    _, factors = neural_field.materialize_grid(model.params, axes)
    profile = tasks.cp_mass_profile(factors)
    for r, frac in profile:
        print(f"component {r:3d}  mass fraction {frac:.6f}")
    return 0


# ---------------------------------------------------------------------------

def _build_parser():
    parser = _Parser(prog="cppruner",
                     description="implicit neural CP tensor recovery")
    sub = parser.add_subparsers(dest="command")
    sub.required = False

    p = sub.add_parser("inpaint", add_help=True)
    p.add_argument("--input", required=True)
    p.add_argument("--sr", type=float)
    p.add_argument("--mask")
    p.add_argument("--out", required=True)
    _add_common_training_flags(p)
    p.set_defaults(run=_cmd_inpaint)

    p = sub.add_parser("denoise")
    p.add_argument("--input", required=True)
    p.add_argument("--case", type=int, choices=range(1, 6))
    p.add_argument("--raw", action="store_true",
                   help="treat the input as already corrupted")
    p.add_argument("--lambda-s", dest="lambda_s", type=float)
    p.add_argument("--out", required=True)
    p.add_argument("--out-sparse", dest="out_sparse")
    _add_common_training_flags(p)
    p.set_defaults(run=_cmd_denoise)

    p = sub.add_parser("sdf")
    p.add_argument("--points", required=True)
    p.add_argument("--out", required=True)
    _add_common_training_flags(p)
    p.set_defaults(run=_cmd_sdf)

    p = sub.add_parser("upsample")
    p.add_argument("--model", required=True)
    p.add_argument("--tau", type=float, default=0.05)
    p.add_argument("--grid", type=int, default=128)
    p.add_argument("--out", required=True)
    p.set_defaults(run=_cmd_upsample)

    p = sub.add_parser("verify")
    p.add_argument("--suite", required=True,
                   choices=("theorem1", "gradients", "hutchinson", "normchain"))
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(run=_cmd_verify)

    p = sub.add_parser("metrics")
    p.add_argument("--ref", required=True)
    p.add_argument("--est", required=True)
    p.add_argument("--fscore-thr", dest="fscore_thr")
    p.set_defaults(run=_cmd_metrics)

    p = sub.add_parser("synth")
    p.add_argument("--shape", required=True)
    p.add_argument("--rank", type=int)
    p.add_argument("--smooth", action="store_true")
    p.add_argument("--noise-case", dest="noise_case", type=int, choices=range(1, 6))
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(run=_cmd_synth)

    p = sub.add_parser("mass")
    p.add_argument("--model", required=True)
    p.add_argument("--grid", type=int)
    p.set_defaults(run=_cmd_mass)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            parser.print_usage(sys.stderr)
            print("cppruner: a subcommand is required", file=sys.stderr)
            return 1
        subparser = next(
            a for a in parser._subparsers._group_actions[0].choices.values()
            if a.prog.endswith(args.command))
        _merge_config_file(args, subparser)
        return args.run(args, parser)
    except UsageError as exc:
        print(f"cppruner: {exc}", file=sys.stderr)
        return 1
    except (FileFormatError, OSError, ValueError,
            optimizer.TrainingDiverged, tensor_core.ShapeError) as exc:
        print(f"cppruner: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
