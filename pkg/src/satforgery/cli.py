"""Command-line workflow: gen-data, train, fit-svm, infer, eval, selfcheck.

Every command is rerunnable: identical config and seed produce identical
artifacts. The merged effective configuration is written next to each
command's outputs. Exit codes: 0 success, 1 usage error, 2 data error,
3 numerical failure.
"""

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import dataset, evaluate, imageio, ocsvm, pipeline
from .architectures import build_spec, param_count
from .config import ConfigError, load_config
from .gradcheck import grad_check
from .layers import ConvParams, ShapeError, conv2d, conv2d_grad, deconv2d
from .losses import mse_loss, mse_loss_grad
from .networks import Autoencoder
from .ocsvm import SvmConfig
from .train import TrainConfig, train_autoencoder, train_gan
from .weights_io import load_weights, save_weights

log = logging.getLogger("satforgery.cli")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

TABLE2_COUNTS = {"A1": 997299, "A2": 84547, "A3": 124883, "A4": 135939}


class UsageError(ValueError):
    pass


class DataError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# shared plumbing

def _config_from_args(args):
    config = load_config(getattr(args, "config", None),
                         getattr(args, "set", None) or ())
    for key, attr in getattr(args, "_flag_map", {}).items():
        value = getattr(args, attr, None)
        if value is not None:
            config.set(key, value)
    return config


def _load_manifest(data_dir):
    path = Path(data_dir) / "manifest.txt"
    if not path.exists():
        raise DataError(f"no dataset manifest at {path}")
    return dataset.load_manifest(path)


def _pool_patches(manifest, data_dir):
    """All patches from the pool images, in sorted image-id order."""
    chunks = []
    for image_id in manifest.pool_ids:
        image = imageio.load_image(Path(data_dir) / "images" / f"{image_id}.png")
        grid = pipeline.extract_patches(image, manifest.patch_size,
                                        manifest.stride)
        chunks.append(grid.patches)
    if not chunks:
        raise DataError("manifest contains no pool images")
    return np.concatenate(chunks, axis=0)


def _train_val_patches(manifest, data_dir, seed):
    patches = _pool_patches(manifest, data_dir)
    train_idx, val_idx = dataset.split_patches(len(patches), seed)
    return patches[train_idx], patches[val_idx]


def _write_history(history, path):
    lines = [f"stage={history.stage} initial_val_mse={history.initial_val_mse!r} "
             f"best_epoch={history.best_epoch}"]
    for r in history.records:
        line = (f"epoch={r.epoch} train_mse={r.train_mse!r} "
                f"val_mse={r.val_mse!r}")
        if r.disc_bce is not None:
            line += f" disc_bce={r.disc_bce!r} gen_adv={r.gen_adv!r}"
        lines.append(line)
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# commands

def cmd_gen_data(args):
    config = _config_from_args(args)
    count = config["data.count"]
    if args.scale == "desk":
        count = max(3, round(count / 10))
    out = Path(config["data.dir"])
    out.mkdir(parents=True, exist_ok=True)
    manifest = dataset.generate_dataset(
        out, count, dims=(config["data.height"], config["data.width"]),
        seed=config["data.seed"], patch_size=config["pipeline.patch_size"],
        stride=config["pipeline.stride"])
    config.write_effective(out / "effective-config.ini")
    n_forged = len(manifest.forged_entries())
    print(f"dataset={out} base_images={count} pool={len(manifest.pool_ids)} "
          f"test_pristine={len(manifest.test_pristine_ids)} forged={n_forged}")
    return EXIT_OK


def cmd_train(args):
    config = _config_from_args(args)
    manifest = _load_manifest(config["data.dir"])
    ckpt_dir = Path(config["train.checkpoint_dir"])
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    tcfg = TrainConfig(
        arch=config["train.arch"], epochs=config["train.epochs"],
        batch_size=config["train.batch_size"], gen_lr=config["train.gen_lr"],
        disc_lr=config["train.disc_lr"], rec_weight=config["train.rec_weight"],
        seed=config["train.seed"],
        checkpoint_dir=str(ckpt_dir) if args.keep_epochs else None)
    train_p, val_p = _train_val_patches(manifest, config["data.dir"], tcfg.seed)
    if args.strategy == "plain":
        best, history = train_autoencoder(train_p, val_p, tcfg)
    else:
        init_path = Path(args.init or ckpt_dir / "plain_best.weights")
        if not init_path.exists():
            raise DataError(f"GAN training needs a plain checkpoint; none at "
                            f"{init_path} (run `train --strategy plain` first)")
        pretrained = load_weights(init_path)
        if pretrained.arch_id != tcfg.arch:
            raise DataError(f"checkpoint architecture {pretrained.arch_id} "
                            f"does not match configured {tcfg.arch}")
        best, history = train_gan(pretrained, train_p, val_p, tcfg)
    out_weights = ckpt_dir / f"{args.strategy}_best.weights"
    save_weights(best, out_weights)
    _write_history(history, ckpt_dir / f"{args.strategy}_history.txt")
    config.write_effective(ckpt_dir / "effective-config.ini")
    best_record = history.records[history.best_epoch - 1]
    print(f"strategy={args.strategy} best_epoch={history.best_epoch} "
          f"val_mse={best_record.val_mse!r} weights={out_weights}")
    return EXIT_OK


def cmd_fit_svm(args):
    config = _config_from_args(args)
    manifest = _load_manifest(config["data.dir"])
    weights_path = Path(args.weights)
    if not weights_path.exists():
        raise DataError(f"no weight file at {weights_path}")
    weights = load_weights(weights_path)
    ae = Autoencoder(weights.arch_id)
    train_p, _ = _train_val_patches(manifest, config["data.dir"],
                                    config["train.seed"])
    features = np.concatenate(
        [ae.encode(weights, train_p[s:s + pipeline.SCORE_BATCH])
         for s in range(0, len(train_p), pipeline.SCORE_BATCH)], axis=0)
    svm_config = SvmConfig(gamma=config["svm.gamma"], nu=config["svm.nu"],
                           tol=config["svm.tol"],
                           max_iter=config["svm.max_iter"],
                           standardize=config["svm.standardize"])
    model = ocsvm.fit(features, svm_config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    ocsvm.save_model(model, out)
    config.write_effective(out.with_suffix(".effective-config.ini"))
    sv_fraction = len(model.coefficients) / model.n_train
    print(f"gamma={svm_config.gamma} nu={svm_config.nu} "
          f"n_train={model.n_train} n_sv={len(model.coefficients)} "
          f"sv_fraction={sv_fraction:.6f} kkt_residual={model.kkt_residual:.3e} "
          f"converged={model.converged} model={out}")
    return EXIT_OK


def cmd_infer(args):
    config = _config_from_args(args)
    for path, what in ((args.weights, "weight file"), (args.svm, "SVM model")):
        if not Path(path).exists():
            raise DataError(f"no {what} at {path}")
    weights = load_weights(args.weights)
    ae = Autoencoder(weights.arch_id)
    svm_model = ocsvm.load_model(args.svm)
    image = imageio.load_image(args.image)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    soft = pipeline.compute_soft_mask(
        image, ae, weights, svm_model, config["pipeline.patch_size"],
        config["pipeline.stride"], config["pipeline.aggregate"])
    elapsed = time.perf_counter() - start
    stem = Path(args.image).stem
    imageio.save_soft_mask(soft.scores, out_dir / f"{stem}_soft.png",
                           out_dir / f"{stem}_soft.raw",
                           out_dir / f"{stem}_soft.txt")
    binary = pipeline.threshold_mask(soft, config["pipeline.threshold"])
    imageio.save_binary_mask(binary, out_dir / f"{stem}_mask.png")
    config.write_effective(out_dir / "effective-config.ini")
    n = len(soft.patch_scores)
    print(f"image={args.image} patches={n} "
          f"detection_score={pipeline.detection_score(soft)!r} "
          f"per_patch_seconds={elapsed / n:.6f} out={out_dir}")
    return EXIT_OK


def _strategy_models(args):
    pairs = []
    for strategy, wpath, spath in (("plain", args.plain_weights, args.plain_svm),
                                   ("gan", args.gan_weights, args.gan_svm)):
        if wpath is None and spath is None:
            continue
        if wpath is None or spath is None:
            raise UsageError(f"{strategy}: both weights and SVM model required")
        for path in (wpath, spath):
            if not Path(path).exists():
                raise DataError(f"no model file at {path}")
        pairs.append((strategy, load_weights(wpath), ocsvm.load_model(spath)))
    if not pairs:
        raise UsageError("provide models for at least one strategy")
    return pairs


def cmd_eval(args):
    config = _config_from_args(args)
    data_dir = Path(config["data.dir"])
    manifest = _load_manifest(data_dir)
    if not manifest.test_pristine_ids or not manifest.forged_entries():
        raise DataError("manifest has an empty test split")
    pristine = [imageio.load_image(data_dir / "images" / f"{i}.png")
                for i in manifest.test_pristine_ids]
    forged_by_class, masked_by_class = {}, {}
    for size_class in dataset.SIZE_CLASSES:
        images, pairs = [], []
        for entry in manifest.forged_entries(size_class):
            image = imageio.load_image(data_dir / "images" / f"{entry.image_id}.png")
            mask = imageio.load_binary_mask(data_dir / "masks" / f"{entry.image_id}.png")
            images.append(image)
            pairs.append((image, mask))
        forged_by_class[size_class] = images
        masked_by_class[size_class] = pairs
    size = config["pipeline.patch_size"]
    stride = config["pipeline.stride"]
    reports = []
    for strategy, weights, svm_model in _strategy_models(args):
        ae = Autoencoder(weights.arch_id)
        reports += evaluate.detection_eval(pristine, forged_by_class, ae,
                                           weights, svm_model, strategy,
                                           size, stride)
        reports += evaluate.localization_eval(masked_by_class, ae, weights,
                                              svm_model, strategy, size, stride)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = evaluate.report_table(reports)
    (out_dir / "report.txt").write_text(table + "\n")
    (out_dir / "report.records").write_text(evaluate.report_records(reports) + "\n")
    config.write_effective(out_dir / "effective-config.ini")
    print(table)
    return EXIT_OK


# ---------------------------------------------------------------------------
# selfcheck

def _check_param_audit():
    for arch_id, expected in TABLE2_COUNTS.items():
        actual = param_count(build_spec(arch_id))
        print(f"check=param_count arch={arch_id} value={actual} "
              f"expected={expected}")
        if actual != expected:
            return False
    return True


def _conv_loss_fn(x, stride):
    def loss_fn(params):
        cp = ConvParams(params["filters"], params["bias"], stride)
        out = conv2d(x, cp)
        loss = float(0.5 * (out * out).sum())
        gi, gf, gb = conv2d_grad(x, cp, out)
        return loss, {"filters": gf, "bias": gb}
    return loss_fn


def _check_gradients():
    rng = np.random.default_rng(7)
    x = rng.normal(size=(2, 8, 8, 2))
    params = {"filters": rng.normal(size=(3, 3, 2, 4)),
              "bias": rng.normal(size=4)}
    report = grad_check(_conv_loss_fn(x, 2), params, samples_per_param=30)
    print(f"check=grad_conv worst={report.worst:.3e} passed={report.passed}")
    if not report.passed:
        return False

    ae = Autoencoder("A4")
    weights = ae.init(0)
    for k in weights.arrays:
        weights.arrays[k] = weights.arrays[k].astype(np.float64)
    patch = rng.normal(size=(2, 64, 64, 3)).clip(-1, 1)

    def ae_loss_fn(params):
        weights.arrays.update(params)
        out, caches = ae.forward_train(weights, patch, update_running=False)
        return (mse_loss(out, patch),
                ae.backward(weights, caches, mse_loss_grad(out, patch)))

    probe = {k: weights.arrays[k] for k in
             ("conv3.filters", "conv5.bias", "dconv2.filters",
              "dconv4.bn.scale", "dconv5.filters")}
    report = grad_check(ae_loss_fn, probe, samples_per_param=4)
    print(f"check=grad_autoencoder worst={report.worst:.3e} "
          f"passed={report.passed}")
    return report.passed


def _check_adjointness():
    rng = np.random.default_rng(3)
    filters = rng.normal(size=(3, 3, 2, 4))
    fwd = ConvParams(filters, np.zeros(4), 2)
    adj = ConvParams(filters.transpose(0, 1, 3, 2), np.zeros(2), 2)
    x = rng.normal(size=(1, 6, 6, 2))
    y = rng.normal(size=(1, 3, 3, 4))
    lhs = float((conv2d(x, fwd) * y).sum())
    rhs = float((x * deconv2d(y, adj)).sum())
    err = abs(lhs - rhs) / max(abs(lhs), 1e-8)
    print(f"check=adjointness rel_error={err:.3e}")
    return err <= 1e-10


def _check_svm_oracle():
    rng = np.random.default_rng(11)
    x = rng.normal(size=(8, 2))
    config = SvmConfig(gamma=0.5, nu=0.5)
    model = ocsvm.fit(x, config)
    alpha_ref, _ = ocsvm.fit_bruteforce(x, config)
    obj = ocsvm.dual_objective(model)
    obj_ref = ocsvm.dual_objective(alpha_ref, x, config.gamma)
    err = abs(obj - obj_ref)
    alpha_sum = float(model.coefficients.sum())
    print(f"check=svm_oracle objective_gap={err:.3e} "
          f"alpha_sum={alpha_sum!r} kkt={model.kkt_residual:.3e}")
    return err <= 1e-6 and abs(alpha_sum - 1.0) <= 1e-6


def _check_auc_oracle():
    rng = np.random.default_rng(13)
    scores = rng.normal(size=500)
    labels = rng.integers(0, 2, size=500)
    labels[:2] = (0, 1)  # both classes guaranteed
    a = evaluate.auc_from_scores(scores, labels)
    ref = evaluate.pair_count_auc(scores, labels)
    cases = (
        evaluate.auc_from_scores([0.0, 0.0, 1.0, 1.0], [0, 0, 1, 1]),  # 1.0
        evaluate.auc_from_scores([1.0, 1.0, 0.0, 0.0], [0, 0, 1, 1]),  # 0.0
        evaluate.auc_from_scores([0.5, 0.5, 0.5, 0.5], [0, 0, 1, 1]),  # 0.5
    )
    print(f"check=auc_oracle pair_gap={abs(a - ref):.3e} "
          f"perfect={cases[0]} anti={cases[1]} constant={cases[2]}")
    return (abs(a - ref) <= 1e-12 and cases == (1.0, 0.0, 0.5))


def _check_negative_control():
    rng = np.random.default_rng(17)
    x = rng.normal(size=(1, 6, 6, 2))
    params = {"filters": rng.normal(size=(3, 3, 2, 3)),
              "bias": rng.normal(size=3)}
    honest = _conv_loss_fn(x, 1)

    def corrupted(p):
        loss, grads = honest(p)
        return loss, {k: 2.0 * g for k, g in grads.items()}

    report = grad_check(corrupted, params, samples_per_param=10)
    print(f"check=negative_control corrupted_gradient_detected={not report.passed}")
    return not report.passed


def cmd_selfcheck(args):
    checks = (
        _check_param_audit,
        _check_adjointness,
        _check_gradients,
        _check_svm_oracle,
        _check_auc_oracle,
        _check_negative_control,
    )
    ok = True
    for check in checks:
        if not check():
            ok = False
    print(f"selfcheck={'pass' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_NUMERICAL


# ---------------------------------------------------------------------------
# argument wiring

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS,
                        help="config file path (also via the "
                             "SATFORGERY_CONFIG environment variable)")
    common.add_argument("--set", action="append", default=argparse.SUPPRESS,
                        metavar="SECTION.KEY=VALUE",
                        help="override a single config value (repeatable)")
    parser = _Parser(prog="satforgery", parents=[common],
                     description="Patch-based satellite-image forgery "
                                 "detection and localization.")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    def add_command(name, **kw):
        return sub.add_parser(name, parents=[common], **kw)

    p = add_command("gen-data", help="generate the synthetic dataset")
    p.add_argument("--out", dest="out_dir")
    p.add_argument("--scale", choices=("paper", "desk"), default="paper",
                   help="desk = 10%% of the full image count")
    p.add_argument("--count", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_gen_data,
                   _flag_map={"data.dir": "out_dir", "data.count": "count",
                              "data.seed": "seed"})

    p = add_command("train", help="train the autoencoder")
    p.add_argument("--data", dest="data_dir")
    p.add_argument("--strategy", choices=("plain", "gan"), default="plain")
    p.add_argument("--arch", choices=("A1", "A2", "A3", "A4"))
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--seed", type=int)
    p.add_argument("--checkpoint-dir", dest="checkpoint_dir")
    p.add_argument("--init", help="plain checkpoint to initialize GAN training")
    p.add_argument("--keep-epochs", action="store_true",
                   help="write a checkpoint file for every epoch")
    p.set_defaults(func=cmd_train,
                   _flag_map={"data.dir": "data_dir", "train.arch": "arch",
                              "train.epochs": "epochs",
                              "train.batch_size": "batch_size",
                              "train.seed": "seed",
                              "train.checkpoint_dir": "checkpoint_dir"})

    p = add_command("fit-svm", help="fit the one-class SVM on training "
                                       "patch features")
    p.add_argument("--data", dest="data_dir")
    p.add_argument("--weights", required=True)
    p.add_argument("--out", default="svm.model")
    p.add_argument("--gamma", type=float)
    p.add_argument("--nu", type=float)
    p.set_defaults(func=cmd_fit_svm,
                   _flag_map={"data.dir": "data_dir", "svm.gamma": "gamma",
                              "svm.nu": "nu"})

    p = add_command("infer", help="score one image into soft/binary masks")
    p.add_argument("image")
    p.add_argument("--weights", required=True)
    p.add_argument("--svm", required=True)
    p.add_argument("--stride", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--out", default="inference")
    p.set_defaults(func=cmd_infer,
                   _flag_map={"pipeline.stride": "stride",
                              "pipeline.threshold": "threshold"})

    p = add_command("eval", help="detection/localization AUC reports")
    p.add_argument("--data", dest="data_dir")
    p.add_argument("--plain-weights")
    p.add_argument("--plain-svm")
    p.add_argument("--gan-weights")
    p.add_argument("--gan-svm")
    p.add_argument("--stride", type=int)
    p.add_argument("--out", default="reports")
    p.set_defaults(func=cmd_eval,
                   _flag_map={"data.dir": "data_dir",
                              "pipeline.stride": "stride"})

    p = add_command("selfcheck", help="run built-in numerical diagnostics")
    p.set_defaults(func=cmd_selfcheck)
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, ShapeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
