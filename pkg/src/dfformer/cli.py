"""Command-line entry point.

Subcommands: train, eval, gradcheck, oracles, params, flops, bench,
spectrum, viz-filters, cka. Exit codes: 0 success, 1 usage, 2 validation
failure, 3 I/O failure.
"""

import argparse
import os
import sys

import numpy as np

from . import analysis, bench, gradcheck, oracles
from .autograd import Tape
from .checkpoint import load_checkpoint, save_checkpoint
from .config import load_config, model_config_from, section
from .data import SyntheticSpec, gen_synthetic, load_idx
from .errors import DfformerError
from .model import (
    build_model,
    count_flops,
    count_params,
    get_config,
    registry_names,
)
from .train import TrainConfig, evaluate, seed_streams, train


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write("error: %s\n" % message)
        raise SystemExit(1)


def _common(p, model_default=None):
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--model", default=model_default,
                   help="registry name (overridden by --config)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output directory for artifacts")
    p.add_argument("--dtype", choices=("f32", "f64"), default="f64")


def _dtype(args):
    return np.float32 if args.dtype == "f32" else np.float64


def _flat(args):
    return load_config(args.config) if args.config else {}


def _model_cfg(args, flat):
    if args.config:
        return model_config_from(flat)
    if args.model:
        return get_config(args.model)
    raise DfformerError(
        "need --model or --config; registry: %s" % ", ".join(registry_names())
    )


def _train_cfg(flat):
    return TrainConfig.from_flat(section(flat, "train"))


def _data_specs(args, flat, cfg):
    d = section(flat, "data")
    base = dict(
        grid=d.get("grid", cfg.input_size),
        classes=d.get("classes", cfg.num_classes),
        noise=d.get("noise", 0.3),
    )
    train_spec = SyntheticSpec(
        seed=args.seed * 2 + 1, per_class=d.get("train_per_class", 128), **base
    )
    test_spec = SyntheticSpec(
        seed=args.seed * 2 + 2, per_class=d.get("test_per_class", 32), **base
    )
    return train_spec, test_spec


def _load_data(args, flat, cfg):
    if args.images or args.labels:
        if not (args.images and args.labels):
            raise DfformerError("--images and --labels go together")
        return load_idx(args.images, args.labels, target=cfg.input_size)
    spec, _ = _data_specs(args, flat, cfg)
    return gen_synthetic(spec)


def _ensure_out(args):
    if args.out:
        os.makedirs(args.out, exist_ok=True)
    return args.out


def _built(args, need_default=None):
    flat = _flat(args)
    cfg = _model_cfg(args, flat) if (args.config or args.model) else \
        get_config(need_default)
    streams = seed_streams(args.seed)
    model = build_model(cfg, streams["init"], _dtype(args))
    if getattr(args, "ckpt", None):
        load_checkpoint(args.ckpt, model)
    return flat, cfg, model, streams


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(args):
    flat = _flat(args)
    cfg = _model_cfg(args, flat) if (args.config or args.model) \
        else get_config("nano-df")
    tcfg = _train_cfg(flat)
    streams = seed_streams(args.seed)
    model = build_model(cfg, streams["init"], _dtype(args))
    images, labels = _load_data(args, flat, cfg)
    images = images.astype(_dtype(args))
    hist = train(model, images, labels, tcfg, streams["shuffle"],
                 streams["droppath"], log=print)
    print("final train accuracy %.4f" % hist["acc"][-1])
    if not (args.images or args.labels):
        _, test_spec = _data_specs(args, flat, cfg)
        ti, tl = gen_synthetic(test_spec)
        acc = evaluate(model, ti.astype(_dtype(args)), tl, tcfg.batch_size)
        print("held-out accuracy %.4f" % acc)
    out = _ensure_out(args)
    if out:
        save_checkpoint(model, os.path.join(out, "model.dfck"))
        with open(os.path.join(out, "history.csv"), "w") as f:
            f.write("epoch,loss,acc\n")
            for e, (l, a) in enumerate(zip(hist["loss"], hist["acc"])):
                f.write("%d,%.10g,%.10g\n" % (e, l, a))
        print("wrote %s" % os.path.join(out, "model.dfck"))
    return 0


def cmd_eval(args):
    flat, cfg, model, _ = _built(args, "nano-df")
    if args.images or args.labels:
        images, labels = _load_data(args, flat, cfg)
    else:
        # synthetic runs score the held-out split, not the training draw
        _, test_spec = _data_specs(args, flat, cfg)
        images, labels = gen_synthetic(test_spec)
    acc = evaluate(model, images.astype(_dtype(args)), labels)
    print("accuracy %.4f" % acc)
    return 0


def cmd_gradcheck(args):
    flat = _flat(args)
    cfg = _model_cfg(args, flat) if (args.config or args.model) \
        else get_config("nano-df")
    streams = seed_streams(args.seed)
    model = build_model(cfg, streams["init"], np.float64)
    rng = streams["data"]
    images = rng.standard_normal((2, cfg.input_size, cfg.input_size, 3))
    labels = rng.integers(0, cfg.num_classes, size=2)
    worst, rows = gradcheck.check_model(model, images, labels, rng,
                                        samples=args.samples)
    bad = [(n, e) for n, e in rows if e >= gradcheck.TOL]
    for n, e in sorted(rows, key=lambda r: -r[1])[:10]:
        print("%-60s rel err %.3g" % (n, e))
    print("worst relative error %.3g over %d parameters"
          % (worst, len(rows)))
    if bad:
        print("FAIL: %d parameters over tolerance %g"
              % (len(bad), gradcheck.TOL))
        return 2
    print("PASS")
    return 0


def cmd_oracles(args):
    failures = 0
    for name, ok, detail in oracles.run_all():
        print("%-32s %s  (%s)" % (name, "PASS" if ok else "FAIL", detail))
        failures += 0 if ok else 1
    return 2 if failures else 0


def cmd_params(args):
    flat = _flat(args)
    cfg = _model_cfg(args, flat)
    streams = seed_streams(args.seed)
    model = build_model(cfg, streams["init"], _dtype(args))
    n = count_params(model)
    print("%s: %d parameters (%.2fM)" % (cfg.name, n, n / 1e6))
    return 0


def cmd_flops(args):
    flat = _flat(args)
    cfg = _model_cfg(args, flat)
    total, parts = count_flops(cfg, args.resolution)
    res = args.resolution or cfg.input_size
    print("%s @%d: %.3fG MACs (conv %.3fG, spectral %.3fG)"
          % (cfg.name, res, total / 1e9, parts["conv"] / 1e9,
             parts["fft"] / 1e9))
    return 0


def cmd_bench(args):
    out = _ensure_out(args)
    if args.kernels:
        rows = bench.bench_kernels(repeats=args.repeats, seed=args.seed)
        text = bench.kernels_csv(rows)
    else:
        names = args.models.split(",")
        resolutions = [int(r) for r in args.resolutions.split(",")]
        rows = bench.bench_rows(
            names, resolutions, batch=args.batch, repeats=args.repeats,
            seed=args.seed, dtype=_dtype(args),
            errors=lambda msg: print("skip %s" % msg, file=sys.stderr),
        )
        text = bench.bench_csv(rows)
    sys.stdout.write(text)
    if out:
        name = "kernels.csv" if args.kernels else "bench.csv"
        with open(os.path.join(out, name), "w") as f:
            f.write(text)
    return 0


def _captured_run(args, flat, cfg, model):
    spec, _ = _data_specs(args, flat, cfg)
    images, _ = gen_synthetic(spec)
    images = images[: args.batch].astype(_dtype(args))
    captures = []
    model.forward(images, Tape(record=False), captures=captures)
    return captures


def cmd_spectrum(args):
    flat, cfg, model, _ = _built(args, "nano-df")
    captures = _captured_run(args, flat, cfg, model)
    profiles = [
        analysis.log_amplitude_profile(act, layer_index=name)
        for name, act in captures
    ]
    text = analysis.profiles_csv(profiles)
    out = _ensure_out(args)
    if out:
        path = os.path.join(out, "spectrum.csv")
        with open(path, "w") as f:
            f.write(text)
        print("wrote %s (%d layers)" % (path, len(profiles)))
    else:
        sys.stdout.write(text)
    return 0


def cmd_viz_filters(args):
    flat, cfg, model, streams = _built(args, "nano-df")
    out = _ensure_out(args) or "."
    count = 0
    for name, p in model.named_parameters():
        if not (name.endswith("basis.weights") or name.endswith(".filt")):
            continue
        img = analysis.visualize_filter(p.value[:, :, : args.max_filters])
        for n in range(img.shape[2]):
            rgb = analysis.colorize(img[:, :, n])
            fname = "%s.%d.ppm" % (name.replace("/", "_"), n)
            analysis.write_ppm(os.path.join(out, fname), rgb)
            count += 1
    print("wrote %d filter images to %s" % (count, out))
    return 0


def cmd_cka(args):
    flat = _flat(args)
    acts = []
    labels = []
    for model_name, ckpt in ((args.model_a, args.ckpt_a),
                             (args.model_b, args.ckpt_b)):
        cfg = get_config(model_name) if model_name else \
            model_config_from(flat)
        # fresh streams per model: ablations share initialization draws
        streams = seed_streams(args.seed)
        model = build_model(cfg, streams["init"], _dtype(args))
        if ckpt:
            load_checkpoint(ckpt, model)
        spec, _ = _data_specs(args, flat, cfg)
        images, _ = gen_synthetic(spec)
        images = images.astype(_dtype(args))
        per_layer = None
        names = None
        bs = args.batch
        for lo in range(0, min(len(images), bs * args.batches), bs):
            captures = []
            model.forward(images[lo : lo + bs], Tape(record=False),
                          captures=captures)
            if per_layer is None:
                names = [n for n, _ in captures]
                per_layer = [[] for _ in captures]
            for k, (_, act) in enumerate(captures):
                per_layer[k].append(act.reshape(len(act), -1))
        acts.append(per_layer)
        labels.append(names)
    result = analysis.linear_cka(acts[0], acts[1], labels[0], labels[1])
    text = analysis.cka_csv(result)
    out = _ensure_out(args)
    if out:
        path = os.path.join(out, "cka.csv")
        with open(path, "w") as f:
            f.write(text)
        print("wrote %s" % path)
    else:
        sys.stdout.write(text)
    print("mean diagonal similarity %.4f"
          % float(np.mean(np.diag(result.matrix))))
    return 0


# ---------------------------------------------------------------------------


def make_parser():
    p = _Parser(prog="dfformer",
                description="FFT token-mixer models, training, and analysis")
    sub = p.add_subparsers(dest="cmd", required=True)

    sp = sub.add_parser("train", help="train on synthetic or IDX data")
    _common(sp)
    sp.add_argument("--images")
    sp.add_argument("--labels")
    sp.set_defaults(fn=cmd_train)

    sp = sub.add_parser("eval", help="evaluate a checkpoint")
    _common(sp)
    sp.add_argument("--ckpt")
    sp.add_argument("--images")
    sp.add_argument("--labels")
    sp.set_defaults(fn=cmd_eval)

    sp = sub.add_parser("gradcheck", help="finite-difference gradient check")
    _common(sp)
    sp.add_argument("--samples", type=int, default=4)
    sp.set_defaults(fn=cmd_gradcheck)

    sp = sub.add_parser("oracles", help="run independent slow-path oracles")
    _common(sp)
    sp.set_defaults(fn=cmd_oracles)

    sp = sub.add_parser("params", help="parameter count")
    _common(sp)
    sp.set_defaults(fn=cmd_params)

    sp = sub.add_parser("flops", help="analytic MAC estimate")
    _common(sp)
    sp.add_argument("--resolution", type=int)
    sp.set_defaults(fn=cmd_flops)

    sp = sub.add_parser("bench", help="throughput across resolutions")
    _common(sp)
    sp.add_argument("--models", default="nano-df,nano-conv,nano-attn")
    sp.add_argument("--resolutions", default="64,128,256")
    sp.add_argument("--repeats", type=int, default=5)
    sp.add_argument("--batch", type=int, default=2)
    sp.add_argument("--kernels", action="store_true",
                    help="compare kernel backends instead of models")
    sp.set_defaults(fn=cmd_bench)

    sp = sub.add_parser("spectrum", help="feature-map amplitude profiles")
    _common(sp)
    sp.add_argument("--ckpt")
    sp.add_argument("--batch", type=int, default=8)
    sp.set_defaults(fn=cmd_spectrum)

    sp = sub.add_parser("viz-filters", help="render filter spectra to PPM")
    _common(sp)
    sp.add_argument("--ckpt")
    sp.add_argument("--max-filters", type=int, default=4)
    sp.set_defaults(fn=cmd_viz_filters)

    sp = sub.add_parser("cka", help="CKA similarity between two models")
    _common(sp)
    sp.add_argument("--model-a", default="nano-df")
    sp.add_argument("--model-b", default="nano-gf")
    sp.add_argument("--ckpt-a")
    sp.add_argument("--ckpt-b")
    sp.add_argument("--batches", type=int, default=4)
    sp.add_argument("--batch", type=int, default=16)
    sp.set_defaults(fn=cmd_cka)
    return p


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        return args.fn(args)
    except DfformerError as e:
        print("error: %s" % e, file=sys.stderr)
        return 2
    except OSError as e:
        print("i/o error: %s" % e, file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
