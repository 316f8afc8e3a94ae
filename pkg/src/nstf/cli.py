"""Command-line front end.

Every subcommand writes its outputs plus a resolved-configuration echo
(config.txt, flat key=value under a [command] section) into --outdir, so a
rerun with the same arguments reproduces the files byte for byte. Grid-like
results are written as numeric CSV with a sibling PGM rendering, and a
matplotlib PNG figure is added alongside unless --no-figures is given.

Exit codes: 0 success, 1 argument or I/O problem, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import pathlib
import sys

import numpy as np

from .classify import classify_pipeline, make_preset_mixture, \
    noise_robustness_sweep
from .cs import adaptive_gradient, format_sparse_result, iht, \
    iterative_threshold_reconstruct, omp, single_iteration_reconstruct, \
    subsample
from .decompose import export_components, iterative_extract, \
    make_burst_mixture, make_harmonic_mixture
from .qr_engine import FlopLedger, TriangularMatrix, address_select, \
    householder_qr, solve_direct_ls, solve_modified_ls, systolic_qr, \
    systolic_tri_inverse
from .robust import LEstimator, robust_ambiguity, robust_ctd
from .siggen import NoiseSpec, Signal, add_noise, gen_nonlinear_fm, \
    load_signal, nonlinear_fm_true_if, save_signal
from .sparse_tf import MaskSpec, run_pipeline
from .timefreq import CTDConfig, KernelSpec, TFGrid, ambiguity, \
    cohen_distribution, ctd4, hann_window, smethod, spectrogram, stft, \
    wigner, write_grid_csv, write_grid_pgm

_DEMO_3X2 = np.array([[1.0, 0.8], [0.8, 2.0], [2.0, 1.0]])

_PRESETS = ("eq416", "sine_mod_mono", "harmonic9", "harmonic19", "bursts12",
            "table5")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: A003 - argparse hook
        raise _UsageError(message)


def _preset_signal(name: str, length: int | None) -> Signal:
    if name in ("eq416", "sine_mod_mono"):
        return gen_nonlinear_fm(name, length)
    if name == "harmonic9":
        return make_harmonic_mixture(9, fundamental_bin=13)
    if name == "harmonic19":
        return make_harmonic_mixture(19, fundamental_bin=6, decay=0.9)
    if name == "bursts12":
        return make_burst_mixture()[0]
    if name == "table5":
        return make_preset_mixture()[0]
    raise _UsageError(f"unknown preset {name!r}")


def _input_signal(args) -> Signal:
    if getattr(args, "infile", None):
        return load_signal(args.infile)
    if getattr(args, "preset", None):
        sig = _preset_signal(args.preset, getattr(args, "length", None))
        noise = getattr(args, "noise", "none")
        if noise != "none":
            spec = NoiseSpec(noise, snr_db=args.snr_db,
                             impulse_prob=args.impulse_prob,
                             impulse_scale=args.impulse_scale)
            sig = add_noise(sig, spec, args.noise_seed)
        return sig
    raise _UsageError("need --in FILE or --preset NAME")


def _outdir(args) -> pathlib.Path:
    out = pathlib.Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo_config(args, out: pathlib.Path) -> None:
    skip = {"handler", "config", "command"}
    with open(out / "config.txt", "w") as fh:
        fh.write(f"[{args.command}]\n")
        for key, val in vars(args).items():
            if key in skip:
                continue
            fh.write(f"{key}={val}\n")


def _figure(args, out: pathlib.Path, name: str, draw) -> None:
    if args.no_figures:
        return
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    fig = plt.figure(figsize=(7.0, 4.5))
    try:
        draw(fig)
        fig.savefig(out / name, dpi=110, metadata={"Software": "nstf"})
    finally:
        plt.close(fig)


def _draw_grid(fig, grid: TFGrid, title: str) -> None:
    ax = fig.add_subplot(111)
    mag = np.abs(grid.values)
    order = np.fft.fftshift(np.arange(mag.shape[1]))
    img = mag[:, order].T[::-1]
    vmax = img.max() if img.max() > 0 else 1.0
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(np.maximum(img, 1e-300) / vmax)
    ax.imshow(np.clip(db, -60.0, 0.0), aspect="auto", cmap="viridis",
              extent=(0, mag.shape[0], -mag.shape[1] // 2,
                      mag.shape[1] - 1 - mag.shape[1] // 2))
    ax.set_xlabel("time (samples)")
    ax.set_ylabel("frequency (signed bins)")
    ax.set_title(title)
    fig.tight_layout()


def _parse_sigma(text: str):
    parts = [float(p) for p in text.split(",") if p.strip() != ""]
    if not parts:
        raise _UsageError("empty kernel scale")
    return parts[0] if len(parts) == 1 else tuple(parts)


def _cmd_gen(args) -> int:
    out = _outdir(args)
    sig = _input_signal(args)
    save_signal(sig, str(out / "signal.csv"))
    _echo_config(args, out)

    def draw(fig):
        ax = fig.add_subplot(111)
        ax.plot(sig.samples.real, lw=0.8, label="re")
        ax.plot(sig.samples.imag, lw=0.8, label="im")
        ax.set_xlabel("sample")
        ax.legend(loc="upper right")
        ax.set_title("generated signal")
        fig.tight_layout()

    _figure(args, out, "signal.png", draw)
    print(f"wrote {out / 'signal.csv'} ({sig.n} samples)")
    return 0


def _cmd_tf(args) -> int:
    out = _outdir(args)
    sig = _input_signal(args)
    window = hann_window(args.window_len) if args.window_len else None
    est = LEstimator(args.robust_a) if args.robust_a is not None else None
    kernel = None
    if args.kernel != "none":
        kernel = KernelSpec(args.kernel, _parse_sigma(args.kernel_sigma))

    method = args.method
    if method == "stft":
        grid = stft(sig, window, args.hop, args.nfft)
    elif method == "spectrogram":
        grid = spectrogram(sig, window, args.hop, args.nfft)
    elif method == "smethod":
        grid = smethod(sig, window, args.L, args.hop, args.nfft)
    elif method == "wigner":
        grid = wigner(sig)
    elif method == "ambiguity":
        grid = robust_ambiguity(sig, est) if est else ambiguity(sig)
    elif method == "cohen":
        if kernel is None:
            raise _UsageError("--method cohen needs --kernel")
        grid = cohen_distribution(sig, kernel)
    else:  # ctd4
        cfg = CTDConfig(smooth_width=args.ctd_width,
                        kernel=kernel if kernel else KernelSpec())
        grid = robust_ctd(sig, cfg, est) if est else ctd4(sig, cfg)

    prefix = args.out_prefix
    write_grid_csv(grid, str(out / f"{prefix}.csv"))
    write_grid_pgm(grid, str(out / f"{prefix}.pgm"))
    _echo_config(args, out)
    _figure(args, out, f"{prefix}.png",
            lambda fig: _draw_grid(fig, grid, prefix))
    print(f"wrote {out / prefix}.csv/.pgm "
          f"({grid.n_time} x {grid.n_freq} {method})")
    return 0


def _cmd_decompose(args) -> int:
    out = _outdir(args)
    sig = _input_signal(args)
    window = hann_window(args.window_len) if args.window_len else None
    cset = iterative_extract(sig, k_per_iter=args.K, L=args.L, xi=args.xi,
                             max_iter=args.max_iter, window=window)
    export_components(cset, out, sig.sample_rate)
    _echo_config(args, out)

    def draw(fig):
        ax = fig.add_subplot(111)
        energies = [c.energy for c in cset.components]
        iters = [c.iteration for c in cset.components]
        bars = ax.bar(range(len(energies)), energies,
                      color=["C" + str(i % 10) for i in iters])
        ax.set_xlabel("component")
        ax.set_ylabel("energy")
        ax.set_title("extracted components (color = pass)")
        for b, it in zip(bars, iters):
            ax.text(b.get_x() + b.get_width() / 2, b.get_height(), str(it),
                    ha="center", va="bottom", fontsize=8)
        fig.tight_layout()

    _figure(args, out, "components.png", draw)
    for i, comp in enumerate(cset.components):
        print(f"component {i}: energy={comp.energy:.6g} "
              f"center_bin={comp.center_bin} iteration={comp.iteration}")
    status = "converged" if cset.converged else "partial (hit max-iter)"
    print(f"{len(cset.components)} components in {cset.iterations} "
          f"iterations; {status}")
    return 0


def _cmd_cs(args) -> int:
    out = _outdir(args)
    sig = _input_signal(args)
    ms = subsample(sig, args.m, args.seed)
    if args.solver == "single":
        res = single_iteration_reconstruct(ms, args.p)
    elif args.solver == "iterative":
        res = iterative_threshold_reconstruct(ms, args.p,
                                              sigma_noise=args.sigma_noise)
    elif args.solver == "omp":
        if args.k is None:
            raise _UsageError("--solver omp needs --k")
        res = omp(ms, k=args.k)
    elif args.solver == "iht":
        if args.k is None:
            raise _UsageError("--solver iht needs --k")
        res = iht(ms, args.k)
    else:  # adaptive
        filled = adaptive_gradient(ms, transform=args.domain,
                                   r_max=args.r_max)
        spec = np.fft.fft(filled.samples) / ms.n
        idx = np.flatnonzero(np.abs(spec) > 1e-6 * np.abs(spec).max())
        from .cs import SparseResult

        res = SparseResult(idx, spec[idx], 0, 0.0)
    text = format_sparse_result(res)
    (out / "result.txt").write_text(text + "\n")
    full = res.spectrum(ms.n)
    with open(out / "spectrum.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin", "re", "im"])
        for k, v in enumerate(full):
            writer.writerow([k, repr(v.real), repr(v.imag)])
    _echo_config(args, out)

    def draw(fig):
        ax = fig.add_subplot(111)
        ax.stem(np.arange(ms.n), np.abs(full), basefmt=" ")
        ax.set_xlabel("bin")
        ax.set_ylabel("|amplitude|")
        ax.set_title(f"recovered spectrum ({args.solver}, "
                     f"M={args.m} of N={ms.n})")
        fig.tight_layout()

    _figure(args, out, "spectrum.png", draw)
    print(text)
    return 0


def _cmd_sparse_tf(args) -> int:
    out = _outdir(args)
    sig = _input_signal(args)
    mask = MaskSpec(args.mask_size, args.take, args.outside, args.mask_seed)
    est = LEstimator(args.robust_a) if args.robust_a is not None else None
    truth = None
    if args.preset in ("eq416", "sine_mod_mono"):
        truth = nonlinear_fm_true_if(args.preset, args.length) * sig.n
    n_comp = args.components
    if truth is not None:
        n_comp = truth.shape[0]
    result = run_pipeline(sig, mask=mask, robust=est,
                          n_components=n_comp, guard=args.guard,
                          truth=truth)
    write_grid_csv(result.reconstruction, str(out / "recon.csv"))
    write_grid_pgm(result.reconstruction, str(out / "recon.pgm"))
    with open(out / "measurements.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["doppler", "lag", "re", "im"])
        for (ti, tj), v in zip(result.measurements.positions,
                               result.measurements.values):
            writer.writerow([ti, tj, repr(v.real), repr(v.imag)])
    with open(out / "tracks.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["component"]
                        + [f"t{t}" for t in range(result.tracks.shape[1])])
        for c in range(result.tracks.shape[0]):
            writer.writerow([c] + [repr(float(v)) for v in result.tracks[c]])
    _echo_config(args, out)

    def draw(fig):
        ax = fig.add_subplot(111)
        mag = np.abs(result.reconstruction.values)
        order = np.fft.fftshift(np.arange(mag.shape[1]))
        half = mag.shape[1] // 2
        ax.imshow(mag[:, order].T[::-1], aspect="auto", cmap="viridis",
                  extent=(0, mag.shape[0], -half, mag.shape[1] - 1 - half))
        for c in range(result.tracks.shape[0]):
            ax.plot(np.arange(result.tracks.shape[1]), result.tracks[c],
                    lw=1.0, color="w")
        ax.set_xlabel("time (samples)")
        ax.set_ylabel("frequency (signed bins)")
        ax.set_title("sparse TF reconstruction and IF tracks")
        fig.tight_layout()

    _figure(args, out, "recon.png", draw)
    kept = result.measurements.values.size
    total = result.measurements.n ** 2
    print(f"reconstructed {result.measurements.n} x {result.measurements.n} "
          f"plane from {kept} of {total} ambiguity cells")
    if result.errors is not None:
        for c, (mse, rel) in enumerate(result.errors):
            print(f"component {c}: if mse={mse:.6g} bins^2, "
                  f"relative={rel:.4g} %")
    return 0


def _cmd_classify(args) -> int:
    out = _outdir(args)
    sig = _input_signal(args)
    reports = classify_pipeline(sig, L=args.L, k_per_iter=args.K,
                                subsample_pct=args.subsample_pct,
                                seed=args.seed,
                                duration_threshold=args.duration_threshold)
    with open(out / "report.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "domain", "concentration_dft",
                         "concentration_ht", "duration", "center_freq",
                         "label", "reconstruction_mse"])
        for r in reports:
            writer.writerow([r.index, r.domain, repr(r.concentration_dft),
                             repr(r.concentration_ht), r.duration,
                             r.center_freq, r.label,
                             repr(r.reconstruction_mse)])
    _echo_config(args, out)

    def draw(fig):
        ax = fig.add_subplot(111)
        colors = {"FHSS": "C0", "DSSS": "C1"}
        ax.bar([r.index for r in reports], [r.duration for r in reports],
               color=[colors[r.label] for r in reports])
        ax.axhline(args.duration_threshold, color="k", ls="--", lw=0.8)
        ax.set_xlabel("component")
        ax.set_ylabel("duration (samples)")
        ax.set_title("component durations (dashed: label threshold)")
        fig.tight_layout()

    _figure(args, out, "durations.png", draw)
    for r in reports:
        print(f"component {r.index}: {r.label} duration={r.duration} "
              f"center={r.center_freq} domain={r.domain} "
              f"mse={r.reconstruction_mse:.3g}")
    if args.snr_sweep:
        snrs = [float(s) for s in args.snr_sweep.split(",")]
        rows = noise_robustness_sweep(sig, snrs, seed=args.seed)
        with open(out / "sweep.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["snr_db", "separated", "iterations"])
            for snr, count, iters in rows:
                writer.writerow([repr(snr), count, iters])
                print(f"snr {snr:+.2f} dB: separated={count} "
                      f"iterations={iters}")
    return 0


def _cmd_qr(args) -> int:
    out = _outdir(args)
    if args.demo == "paper-3x2":
        a = _DEMO_3X2
    else:
        try:
            rows, cols = (int(p) for p in args.demo.split("x"))
        except ValueError as exc:
            raise _UsageError("--demo needs 'paper-3x2' or 'MxK'") from exc
        rng = np.random.default_rng(args.seed)
        a = rng.standard_normal((rows, cols))
    r, trace = systolic_qr(a)
    with open(out / "r.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in r:
            writer.writerow([repr(v.real) if abs(v.imag) < 1e-300
                             else repr(complex(v)) for v in row])
    if args.trace:
        (out / "trace.txt").write_text("\n".join(trace) + "\n")
        print("\n".join(trace))
    if args.inverse:
        tri = TriangularMatrix(r[:r.shape[1]], "upper")
        inv = systolic_tri_inverse(tri)
        with open(out / "r_inverse.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            for row in inv.entries:
                writer.writerow([repr(v.real) if abs(v.imag) < 1e-300
                                 else repr(complex(v)) for v in row])
    _echo_config(args, out)
    with np.printoptions(precision=5, suppress=True):
        print(f"R =\n{r[:r.shape[1]]}")
    return 0


def _cmd_bench(args) -> int:
    out = _outdir(args)
    pairs = [(5, 50), (10, 100), (15, 250)]
    rows = []
    rng = np.random.default_rng(0)
    for k, m in pairs:
        n = 4 * m
        omega = np.sort(rng.choice(n, size=m, replace=False))
        bins = np.sort(rng.choice(n, size=k, replace=False))
        mat = address_select(omega, bins, n)
        y = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        led_mod = FlopLedger()
        led_dir = FlopLedger()
        solve_modified_ls(mat, y, led_mod)
        solve_direct_ls(mat, y, led_dir)
        rows.append((k, m, led_mod.additions, led_mod.multiplications,
                     led_dir.additions, led_dir.multiplications))
    with open(out / "flops.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["K", "M", "adds_modified", "mults_modified",
                         "adds_direct", "mults_direct"])
        for row in rows:
            writer.writerow(row)
    lines = [f"{'K':>4} {'M':>6} {'adds(mod)':>12} {'mults(mod)':>12} "
             f"{'adds(dir)':>12} {'mults(dir)':>12}"]
    for k, m, am, mm, ad, md in rows:
        lines.append(f"{k:>4} {m:>6} {am:>12} {mm:>12} {ad:>12} {md:>12}")
    table = "\n".join(lines)
    print(table)

    checks = []
    sig = gen_nonlinear_fm("eq416")
    sm0 = smethod(sig, L=0)
    spec = spectrogram(sig)
    same = np.array_equal(sm0.values, spec.values)
    checks.append(("smethod L=0 equals spectrogram bitwise", same))
    wd = wigner(sig)
    af = ambiguity(sig)
    dual = np.fft.fft(np.fft.ifft(wd.values, axis=1), axis=0)
    err = float(np.abs(dual - af.values).max()
                / max(np.abs(af.values).max(), 1e-300))
    checks.append(("wigner/ambiguity duality residual < 1e-9", err < 1e-9))
    q, r_hh = householder_qr(_DEMO_3X2)
    r_sys, _ = systolic_qr(_DEMO_3X2)
    err_r = float(np.abs(r_hh[:2] - r_sys).max())
    checks.append(("systolic R matches householder R < 1e-9", err_r < 1e-9))
    for label, ok in checks:
        lines.append(f"{'PASS' if ok else 'FAIL'}  {label}")
        print(f"{'PASS' if ok else 'FAIL'}  {label}")
    (out / "bench.txt").write_text("\n".join(lines) + "\n")
    _echo_config(args, out)

    def draw(fig):
        ax = fig.add_subplot(111)
        ks = [f"K={k},M={m}" for k, m, *_ in rows]
        x = np.arange(len(rows))
        ax.bar(x - 0.2, [r[2] + r[3] for r in rows], width=0.4,
               label="triangular-inverse form")
        ax.bar(x + 0.2, [r[4] + r[5] for r in rows], width=0.4,
               label="normal-equations form")
        ax.set_xticks(x, ks)
        ax.set_yscale("log")
        ax.set_ylabel("real operations")
        ax.set_title("least-squares operation counts")
        ax.legend()
        fig.tight_layout()

    _figure(args, out, "flops.png", draw)
    return 0 if all(ok for _, ok in checks) else 2


def _add_common(sub, presets=True, noise=True) -> None:
    sub.add_argument("--outdir", default=".", help="output directory")
    sub.add_argument("--no-figures", action="store_true",
                     help="skip PNG figure rendering")
    sub.add_argument("--config", default=None,
                     help="key=value file merged under the flags")
    if presets:
        sub.add_argument("--in", dest="infile", default=None,
                         help="input signal file (csv or raw)")
        sub.add_argument("--preset", choices=_PRESETS, default=None)
        sub.add_argument("--length", type=int, default=None)
    if noise:
        sub.add_argument("--noise", default="none",
                         choices=("none", "gaussian", "impulse", "mixed"))
        sub.add_argument("--snr-db", type=float, default=20.0)
        sub.add_argument("--impulse-prob", type=float, default=0.005)
        sub.add_argument("--impulse-scale", type=float, default=10.0)
        sub.add_argument("--noise-seed", type=int, default=0)


def _build_parser() -> tuple[_Parser, dict]:
    parser = _Parser(prog="nstf", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True,
                                 parser_class=_Parser)
    table = {}

    sub = subs.add_parser("gen",
                          help="generate a test signal")
    _add_common(sub)
    sub.set_defaults(handler=_cmd_gen)
    table["gen"] = sub

    sub = subs.add_parser("tf",
                          help="time-frequency distributions")
    _add_common(sub)
    sub.add_argument("--method", required=True,
                     choices=("stft", "spectrogram", "smethod", "wigner",
                              "ambiguity", "cohen", "ctd4"))
    sub.add_argument("--L", type=int, default=6)
    sub.add_argument("--window-len", type=int, default=None)
    sub.add_argument("--hop", type=int, default=1)
    sub.add_argument("--nfft", type=int, default=None)
    sub.add_argument("--kernel", default="none",
                     choices=("none", "choi_williams", "born_jordan", "zam",
                              "gaussian"))
    sub.add_argument("--kernel-sigma", default="30")
    sub.add_argument("--ctd-width", type=int, default=3)
    sub.add_argument("--robust-a", type=float, default=None)
    sub.add_argument("--out-prefix", default="grid")
    sub.set_defaults(handler=_cmd_tf)
    table["tf"] = sub

    sub = subs.add_parser("decompose",
                          help="eigenvector component extraction")
    _add_common(sub)
    sub.add_argument("--K", type=int, default=4)
    sub.add_argument("--L", type=int, default=6)
    sub.add_argument("--xi", type=float, default=None)
    sub.add_argument("--max-iter", type=int, default=20)
    sub.add_argument("--window-len", type=int, default=None)
    sub.set_defaults(handler=_cmd_decompose)
    table["decompose"] = sub

    sub = subs.add_parser("cs",
                          help="sparse spectrum recovery from subsamples")
    _add_common(sub)
    sub.add_argument("--solver", default="single",
                     choices=("single", "iterative", "omp", "iht",
                              "adaptive"))
    sub.add_argument("--m", type=int, required=True,
                     help="retained sample count")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--p", type=float, default=0.99)
    sub.add_argument("--sigma-noise", type=float, default=0.0)
    sub.add_argument("--k", type=int, default=None)
    sub.add_argument("--domain", default="dft", choices=("dft", "hermite"))
    sub.add_argument("--r-max", type=float, default=-100.0)
    sub.set_defaults(handler=_cmd_cs)
    table["cs"] = sub

    sub = subs.add_parser("sparse-tf",
                          help="TF plane from partial ambiguity samples")
    _add_common(sub)
    sub.add_argument("--mask-size", type=int, default=25)
    sub.add_argument("--take", type=float, default=0.6)
    sub.add_argument("--outside", type=float, default=0.0)
    sub.add_argument("--mask-seed", type=int, default=0)
    sub.add_argument("--robust-a", type=float, default=None)
    sub.add_argument("--components", type=int, default=2)
    sub.add_argument("--guard", type=int, default=2)
    sub.set_defaults(handler=_cmd_sparse_tf)
    table["sparse-tf"] = sub

    sub = subs.add_parser("classify",
                          help="separate and label mixture components")
    _add_common(sub)
    sub.add_argument("--seed", type=int, default=7)
    sub.add_argument("--L", type=int, default=12)
    sub.add_argument("--K", type=int, default=4)
    sub.add_argument("--subsample-pct", type=float, default=0.45)
    sub.add_argument("--duration-threshold", type=int, default=50)
    sub.add_argument("--snr-sweep", default=None,
                     help="comma list of SNR dB points to sweep")
    sub.set_defaults(handler=_cmd_classify)
    table["classify"] = sub

    sub = subs.add_parser("qr",
                          help="systolic QR demos")
    _add_common(sub, presets=False, noise=False)
    sub.add_argument("--demo", default="paper-3x2",
                     help="'paper-3x2' or a random 'MxK' size")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--trace", action="store_true")
    sub.add_argument("--inverse", action="store_true",
                     help="also invert R on the triangular fabric")
    sub.set_defaults(handler=_cmd_qr)
    table["qr"] = sub

    sub = subs.add_parser("bench",
                          help="operation-count table and self checks")
    _add_common(sub, presets=False, noise=False)
    sub.set_defaults(handler=_cmd_bench)
    table["bench"] = sub

    return parser, table


def _apply_config(args, table) -> None:
    sub = table[args.command]
    actions = {a.dest: a for a in sub._actions if a.dest != "help"}
    path = pathlib.Path(args.config)
    overrides = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("["):
            continue
        if "=" not in line:
            raise _UsageError(f"{path}:{lineno}: expected key=value")
        key, _, val = line.partition("=")
        key = key.strip().replace("-", "_")
        val = val.strip()
        if key not in actions:
            raise _UsageError(f"{path}:{lineno}: unknown key {key!r}")
        action = actions[key]
        if isinstance(action, (argparse._StoreTrueAction,
                               argparse._StoreFalseAction)):
            overrides[key] = val.lower() in ("1", "true", "yes", "on")
        elif val == "None":
            overrides[key] = None
        elif action.type is not None:
            overrides[key] = action.type(val)
        else:
            overrides[key] = val
        if action.choices and overrides[key] not in action.choices \
                and overrides[key] is not None:
            raise _UsageError(f"{path}:{lineno}: invalid value for {key!r}")
    sub.set_defaults(**overrides)


def main(argv=None) -> int:
    parser, table = _build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "config", None):
            _apply_config(args, table)
            args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.handler(args)
    except FileNotFoundError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError, ArithmeticError,
            np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
