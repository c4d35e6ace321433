"""Experiment orchestration and command line interface.

Subcommands
-----------
generate  write ground truth, clean and corrupted streams and the mask
run       stream data through the trimmed estimator and the dual iteration
bench     seeds x {small, large corruption} x {robust, naive} error trajectories
diag      running sum of descent gaps on a wide, short configuration

Configuration is layered: built-in defaults, then ``--config`` (``key = value``
lines), then command line flags.
"""

import argparse
import dataclasses
import logging
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import bounds, csvio, gama, synth
from .errors import DataError, NumericalError, ParameterError
from .gama import GamaConfig
from .synth import CorruptionModel, CorruptionSpec
from .trim import Phase, TrimConfig, TrimState

log = logging.getLogger("robust_ggm")

ESTIMATORS = ("robust", "naive")
COVARIANCE_SOURCES = ("precision_inverse", "literal")
BENCH_CELLS = (("clean", None), ("small", 2.0), ("large", 5.0))
SCALAR_COLUMNS = ("t", "lambda_min_gamma", "lambda_max_gamma", "zeta", "delta",
                  "delta_sum", "dual_gap", "lambda_min_phi")


@dataclass(frozen=True)
class ExperimentConfig:
    p: int = 10
    t: int = 5000
    t0: int = 100
    delta: float = 0.9
    eta: float = 0.03
    lam: float = 0.15
    step_fraction: float = 0.9
    corruption: CorruptionModel = CorruptionModel.PER_ROW
    corruption_eta: float = None
    mu: float = 1.0
    sigma: float = 5.0
    seeds: tuple = (0,)
    estimators: tuple = ESTIMATORS
    checkpoints: tuple = ()
    covariance_source: str = "precision_inverse"
    refine: int = 1

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("corruption", CorruptionModel.parse(self.corruption))
        if self.corruption_eta is None:
            set_("corruption_eta", self.eta)
        set_("seeds", tuple(int(s) for s in self.seeds))
        set_("estimators", tuple(self.estimators))
        set_("checkpoints", tuple(sorted(set(int(c) for c in self.checkpoints))))
        self.validate()

    def validate(self):
        for name in ("p", "t", "t0"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ParameterError(name, f"must be a positive integer, got {v!r}")
        if self.p < 2:
            raise ParameterError("p", f"must be at least 2, got {self.p}")
        if self.t <= self.t0:
            raise ParameterError("t", f"must exceed t0={self.t0}, got {self.t}")
        if not self.seeds:
            raise ParameterError("seeds", "at least one seed is required")
        bad = set(self.estimators) - set(ESTIMATORS)
        if bad or not self.estimators:
            raise ParameterError("estimators", f"must be a nonempty subset of {ESTIMATORS}, got {self.estimators}")
        if self.covariance_source not in COVARIANCE_SOURCES:
            raise ParameterError("covariance_source", f"must be one of {COVARIANCE_SOURCES}")
        for c in self.checkpoints:
            if not self.t0 <= c <= self.t:
                raise ParameterError("checkpoints", f"{c} outside [t0, t] = [{self.t0}, {self.t}]")
        self.trim_config()
        self.gama_config()
        self.corruption_spec(0)

    def trim_config(self):
        return TrimConfig(t0=self.t0, delta=self.delta, eta=self.eta)

    def gama_config(self):
        return GamaConfig(lam=self.lam, step_fraction=self.step_fraction, t0=self.t0, refine=self.refine)

    def corruption_spec(self, seed, sigma=None):
        return CorruptionSpec(model=self.corruption, eta=self.corruption_eta, mu=self.mu,
                              sigma=self.sigma if sigma is None else sigma, seed=seed)

    def to_text(self):
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            key = "lambda" if f.name == "lam" else f.name
            if isinstance(v, CorruptionModel):
                v = v.value
            elif isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{key} = {v}")
        return "\n".join(lines) + "\n"


APPENDIX_F_DEFAULTS = dict(p=100, t=1000, t0=100, lam=0.5, seeds=(0, 1, 2), estimators=("robust",))

_INT_KEYS = {"p", "t", "t0", "refine"}
_FLOAT_KEYS = {"delta", "eta", "lam", "step_fraction", "corruption_eta", "mu", "sigma"}
_LIST_KEYS = {"seeds": int, "estimators": str, "checkpoints": int}


def _coerce(key, raw):
    raw = raw.strip()
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _LIST_KEYS:
            conv = _LIST_KEYS[key]
            return tuple(conv(x.strip()) for x in raw.split(",") if x.strip())
    except ValueError:
        raise ParameterError(key, f"cannot parse {raw!r}") from None
    return raw


def parse_config_text(text, source="<config>"):
    """Parse ``key = value`` lines (``#`` starts a comment) into a dict of overrides."""
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"{source}:{lineno}", f"expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "lambda":
            key = "lam"
        if key not in names:
            raise ParameterError(f"{source}:{lineno}", f"unknown key {key!r}")
        out[key] = _coerce(key, raw)
    return out


def load_config(path):
    try:
        with open(path) as fh:
            return parse_config_text(fh.read(), source=path)
    except OSError as exc:
        raise ParameterError("config", f"cannot read {path}: {exc}") from None


def make_config(*layers):
    merged = {}
    for layer in layers:
        merged.update({k: v for k, v in layer.items() if v is not None})
    try:
        return ExperimentConfig(**merged)
    except TypeError as exc:
        raise ParameterError("config", str(exc)) from None


# -- the estimation pipeline ------------------------------------------------


@dataclass
class Pipeline:
    """Trimmed (or naive) covariance estimate feeding the dual iteration.

    With ``truth`` given, every step appends an :class:`ErrorTrace` row with
    errors against the ground truth; before ``t0`` the covariance and precision
    estimates count as zero matrices.
    """

    config: ExperimentConfig
    p: int
    robust: bool = True
    truth: synth.GroundTruth = None
    gamma_star: np.ndarray = None
    checkpoint_sink: object = None
    trace: bounds.ErrorTrace = field(default_factory=bounds.ErrorTrace)
    scalars: list = field(default_factory=list)

    def __post_init__(self):
        cfg = self.config
        self.trim = TrimState(cfg.trim_config(), self.p, trimming=self.robust)
        self.gama_config = cfg.gama_config()
        self.state = None
        self.max_dual_gap = 0.0
        self.min_lambda_min = math.inf
        if self.truth is not None:
            self._sigma_max = bounds.sigma_max(self.truth.s_star)
            self._cor2 = bounds.corollary_frobenius_bound(
                self.p, self._sigma_max, cfg.eta, cfg.delta, cfg.t0)
            self._s_norm = float(np.linalg.norm(self.truth.s_star))
            self._theta_norm = float(np.linalg.norm(self.truth.theta_star))

    @property
    def name(self):
        return "robust" if self.robust else "naive"

    def feed(self, x):
        self.trim.ingest(x)
        t = self.trim.t
        if self.trim.phase is Phase.BUFFERING:
            if self.truth is not None:
                self.trace.append(t, cov_err=self._s_norm, prec_err=self._theta_norm)
            return
        s_hat = self.trim.current_estimate()
        if self.state is None:
            self.state = gama.init_dual(s_hat, self.gama_config, t=t)
        else:
            self.state = gama.step(self.state, s_hat)
        st = self.state
        gap = st.dual_gap()
        self.max_dual_gap = max(self.max_dual_gap, gap)
        self.min_lambda_min = min(self.min_lambda_min, st.lambda_min)
        lmin_phi = gama.symmetric_eigen(st.phi).lambda_min
        self.scalars.append((t, st.lambda_min, st.lambda_max, st.zeta, st.delta,
                             st.delta_sum, gap, lmin_phi))
        row = dict(lambda_min_gamma=st.lambda_min, delta_sum=st.delta_sum)
        if self.truth is not None:
            cfg = self.config
            row.update(
                cov_err=bounds.frobenius_error(s_hat, self.truth.s_star),
                prec_err=bounds.frobenius_error(st.phi, self.truth.theta_star),
                thm1_bound=bounds.corollary1_bound(t, self.p, self._sigma_max, cfg.t0, cfg.delta, cfg.eta),
                cor2_bound=self._cor2,
            )
            if self.gamma_star is not None:
                row["dual_err"] = bounds.frobenius_error(st.gamma, self.gamma_star)
        self.trace.append(t, **row)
        if self.checkpoint_sink is not None and t in self.config.checkpoints:
            self.checkpoint_sink(self, t, s_hat)

    def run(self, data):
        """Feed every column of a ``p x t`` matrix."""
        for x in np.asarray(data).T:
            self.feed(x)
        return self

    def write(self, out_dir, prefix):
        self.trace.write_csv(os.path.join(out_dir, f"{prefix}_trace.csv"))
        csvio.write_table(os.path.join(out_dir, f"{prefix}_scalars.csv"), SCALAR_COLUMNS, self.scalars)


def _matrix_dumper(out_dir, prefix):
    def dump(pipe, t, s_hat):
        st = pipe.state
        for name, m in (("s_hat", s_hat), ("gamma", st.gamma), ("phi", st.phi)):
            csvio.write_matrix(os.path.join(out_dir, f"{prefix}_{name}_t{t}.csv"), m)
    return dump


def ground_truth(cfg, seed):
    return synth.generate_graph(cfg.p, seed)


def clean_stream(cfg, truth, seed):
    cov = truth.s_star if cfg.covariance_source == "precision_inverse" else truth.theta_star
    return synth.sample_stream(cov, cfg.t, seed)


def gamma_star_for(cfg, truth):
    state, _ = gama.solve_fixed_point(truth.s_star, dataclasses.replace(cfg.gama_config(), refine=1),
                                      tol=1e-10)
    return state.gamma


def _ensure_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise ParameterError("out", f"cannot create output directory {path}: {exc}") from None
    if not os.access(path, os.W_OK):
        raise ParameterError("out", f"output directory {path} is not writable")
    return path


def _seed_dir(out, cfg, seed):
    if len(cfg.seeds) == 1:
        return _ensure_dir(out)
    return _ensure_dir(os.path.join(out, f"seed{seed}"))


def _write_config(out, cfg):
    path = os.path.join(out, "config.txt")
    with open(path, "w") as fh:
        fh.write(cfg.to_text())
    return path


def _listing(out):
    found = []
    for root, _, files in os.walk(out):
        found.extend(os.path.join(root, f) for f in files)
    return sorted(found)


@dataclass
class RunArtifacts:
    out_dir: str
    paths: list
    pipelines: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)


def cmd_generate(cfg, out):
    """Write ground truth, clean and corrupted streams and the mask for every seed."""
    _ensure_dir(out)
    for seed in cfg.seeds:
        d = _seed_dir(out, cfg, seed)
        truth = ground_truth(cfg, seed)
        clean = clean_stream(cfg, truth, seed)
        dirty, mask = synth.corrupt(clean, cfg.corruption_spec(seed))
        csvio.write_matrix(os.path.join(d, "theta_star.csv"), truth.theta_star)
        csvio.write_matrix(os.path.join(d, "s_star.csv"), truth.s_star)
        csvio.write_edges(os.path.join(d, "edges.csv"), truth.edges)
        csvio.write_stream(os.path.join(d, "clean_stream.csv"), clean)
        csvio.write_stream(os.path.join(d, "corrupted_stream.csv"), dirty)
        csvio.write_mask(os.path.join(d, "mask.csv"), mask)
        log.info("seed %d: %d edges, %d corrupted cells", seed, len(truth.edges), mask.n_corrupted)
    _write_config(out, cfg)
    return RunArtifacts(out, _listing(out))


def _run_pipelines(cfg, data, p, out_dir, truth=None, gamma_star=None, prefix=""):
    pipes = {}
    for est in cfg.estimators:
        name = f"{prefix}{est}"
        pipe = Pipeline(cfg, p, robust=(est == "robust"), truth=truth, gamma_star=gamma_star,
                        checkpoint_sink=_matrix_dumper(out_dir, name) if cfg.checkpoints else None)
        pipe.run(data)
        pipe.write(out_dir, name)
        pipes[name] = pipe
    return pipes


def cmd_run(cfg, source="generate", out=".", truth_dir=None):
    """Run the estimators on a generated stream or on a stream CSV.

    ``source`` is ``"generate"`` or a path. For file input the dimension is
    taken from the first data row; ground truth (``theta_star.csv`` and
    ``s_star.csv``) may be supplied through ``truth_dir``.
    """
    _ensure_dir(out)
    result = RunArtifacts(out, [])
    if source == "generate":
        for seed in cfg.seeds:
            d = _seed_dir(out, cfg, seed)
            truth = ground_truth(cfg, seed)
            dirty, _ = synth.corrupt(clean_stream(cfg, truth, seed), cfg.corruption_spec(seed))
            pipes = _run_pipelines(cfg, dirty, cfg.p, d, truth, gamma_star_for(cfg, truth))
            result.pipelines.update({(seed, k): v for k, v in pipes.items()})
    else:
        try:
            data = csvio.read_stream(source)
        except OSError as exc:
            raise DataError(f"cannot read stream {source}: {exc}") from None
        p, t = data.shape
        cfg = dataclasses.replace(cfg, p=p, t=t)
        truth = gamma_star = None
        if truth_dir is not None:
            theta = csvio.read_matrix(os.path.join(truth_dir, "theta_star.csv"))
            s_star = csvio.read_matrix(os.path.join(truth_dir, "s_star.csv"))
            if theta.shape != (p, p):
                raise DataError(f"ground truth has shape {theta.shape}, stream has p={p}")
            truth = synth.GroundTruth(theta, s_star, ())
            gamma_star = gamma_star_for(cfg, truth)
        result.pipelines.update(_run_pipelines(cfg, data, p, out, truth, gamma_star))
    _write_config(out, cfg)
    result.paths = _listing(out)
    return result


def _median_rows(traces, columns):
    t = traces[0].column("t")
    cols = [np.median(np.vstack([tr.column(c) for tr in traces]), axis=0) for c in columns]
    return [(int(ti),) + tuple(c[k] for c in cols) for k, ti in enumerate(t)]


def cmd_bench(cfg, out):
    """Error trajectories over seeds for clean, small and large corruption.

    The small and large cells use ``N(mu, 2**2)`` and ``N(mu, 5**2)``
    corruption with an identical mask; the clean cell is the corruption-free
    reference. Writes per-seed traces, median-over-seed trajectories, the
    descent-gap running sums and ``summary.csv``.
    """
    _ensure_dir(out)
    per_seed = {}
    for seed in cfg.seeds:
        truth = ground_truth(cfg, seed)
        clean = clean_stream(cfg, truth, seed)
        gstar = gamma_star_for(cfg, truth)
        for cell, sigma in BENCH_CELLS:
            if sigma is None:
                data = clean
            else:
                data, _ = synth.corrupt(clean, cfg.corruption_spec(seed, sigma=sigma))
            pipes = _run_pipelines(cfg, data, cfg.p, out, truth, gstar, prefix=f"seed{seed}_{cell}_")
            for name, pipe in pipes.items():
                est = name.rsplit("_", 1)[1]
                per_seed[(seed, cell, est)] = pipe
    summary = {}
    rows = []
    low_conf = len(cfg.seeds) < 3
    for cell, _ in BENCH_CELLS:
        for est in cfg.estimators:
            pipes = [per_seed[(s, cell, est)] for s in cfg.seeds]
            traces = [pp.trace for pp in pipes]
            med = _median_rows(traces, ("cov_err", "prec_err", "dual_err"))
            csvio.write_table(os.path.join(out, f"median_{cell}_{est}.csv"),
                              ("t", "cov_err", "prec_err", "dual_err"), med)
            final = med[-1]
            rec = dict(cov_err=final[1], prec_err=final[2], dual_err=final[3],
                       max_dual_gap=max(pp.max_dual_gap for pp in pipes),
                       min_lambda_min_gamma=min(pp.min_lambda_min for pp in pipes))
            summary[(cell, est)] = rec
            rows.append((cell, est, len(cfg.seeds), rec["cov_err"], rec["prec_err"], rec["dual_err"],
                         rec["max_dual_gap"], rec["min_lambda_min_gamma"], "true" if low_conf else "false"))
    csvio.write_table(os.path.join(out, "summary.csv"),
                      ("cell", "estimator", "n_seeds", "final_cov_err", "final_prec_err", "final_dual_err",
                       "max_dual_gap", "min_lambda_min_gamma", "low_confidence"), rows)
    if "robust" in cfg.estimators:
        _write_delta_sums(os.path.join(out, "delta_sum.csv"),
                          {s: per_seed[(s, "large", "robust")] for s in cfg.seeds})
    _write_config(out, cfg)
    if low_conf:
        log.warning("bench run with %d seed(s); summary marked low-confidence", len(cfg.seeds))
    return RunArtifacts(out, _listing(out), per_seed, summary)


def _write_delta_sums(path, pipes):
    seeds = sorted(pipes)
    cols = [np.array([row[5] for row in pipes[s].scalars]) for s in seeds]
    ts = [row[0] for row in pipes[seeds[0]].scalars]
    rows = [(t,) + tuple(c[k] for c in cols) for k, t in enumerate(ts)]
    csvio.write_table(path, ("t",) + tuple(f"seed{s}" for s in seeds), rows)


def delta_sum_change(pipe, window):
    """``|S_T - S_{T - window}|`` for the running descent-gap sum ``S``."""
    sums = [row[5] for row in pipe.scalars]
    return abs(sums[-1] - sums[-1 - window])


def cmd_diag(cfg, out, window=None):
    """Descent-gap running sum and smallest dual eigenvalue, robust pipeline only."""
    _ensure_dir(out)
    window = window if window is not None else max(1, (cfg.t - cfg.t0) // 5)
    window = min(window, cfg.t - cfg.t0)
    cfg = dataclasses.replace(cfg, estimators=("robust",))
    pipes = {}
    for seed in cfg.seeds:
        truth = ground_truth(cfg, seed)
        data, _ = synth.corrupt(clean_stream(cfg, truth, seed), cfg.corruption_spec(seed))
        pipe = Pipeline(cfg, cfg.p, robust=True)
        pipe.run(data)
        pipes[seed] = pipe
    _write_delta_sums(os.path.join(out, "delta_sum.csv"), pipes)
    rows = []
    summary = {}
    for seed, pipe in pipes.items():
        change = delta_sum_change(pipe, window)
        summary[seed] = dict(delta_sum=pipe.state.delta_sum, change=change,
                             min_lambda_min_gamma=pipe.min_lambda_min)
        rows.append((seed, pipe.state.delta_sum, window, change, pipe.min_lambda_min))
    csvio.write_table(os.path.join(out, "diag_summary.csv"),
                      ("seed", "final_delta_sum", "window", "window_change", "min_lambda_min_gamma"), rows)
    _write_config(out, cfg)
    return RunArtifacts(out, _listing(out), pipes, summary)


# -- command line -------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="robust-ggm", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="PATH")
        p.add_argument("--out", metavar="DIR", default=".")
        p.add_argument("--seed", type=int, action="append", dest="seeds", metavar="N")
        p.add_argument("--p", type=int)
        p.add_argument("--t", type=int)
        p.add_argument("--t0", type=int)
        p.add_argument("--eta", type=float)
        p.add_argument("--delta", type=float)
        p.add_argument("--lambda", type=float, dest="lam")
        p.add_argument("--step-fraction", type=float)
        p.add_argument("--corruption", choices=[m.value for m in CorruptionModel])
        p.add_argument("--corruption-eta", type=float)
        p.add_argument("--mu", type=float)
        p.add_argument("--sigma", type=float)
        p.add_argument("--estimators", type=lambda s: tuple(x for x in s.split(",") if x))
        p.add_argument("--checkpoints", type=lambda s: tuple(int(x) for x in s.split(",") if x))
        p.add_argument("--covariance-source", choices=COVARIANCE_SOURCES)
        p.add_argument("--refine", type=int)

    common(sub.add_parser("generate", help="write a synthetic corrupted dataset"))
    run = sub.add_parser("run", help="estimate from a stream CSV or a generated stream")
    common(run)
    run.add_argument("--input", default="generate", metavar="PATH|generate")
    run.add_argument("--truth", metavar="DIR", help="directory with theta_star.csv and s_star.csv")
    common(sub.add_parser("bench", help="seeds x corruption x estimator error trajectories"))
    diag = sub.add_parser("diag", help="descent-gap running sum on a wide configuration")
    common(diag)
    diag.add_argument("--window", type=int)
    return parser


_FLAG_KEYS = [f.name for f in dataclasses.fields(ExperimentConfig)]


def config_from_args(args):
    base = dict(APPENDIX_F_DEFAULTS) if args.command == "diag" else {}
    file_layer = load_config(args.config) if args.config else {}
    flags = {k: getattr(args, k, None) for k in _FLAG_KEYS}
    if flags.get("corruption") is not None:
        flags["corruption"] = CorruptionModel.parse(flags["corruption"])
    if flags.get("seeds") is not None:
        flags["seeds"] = tuple(flags["seeds"])
    return make_config(base, file_layer, flags)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    logging.captureWarnings(True)
    try:
        cfg = config_from_args(args)
        if args.command == "generate":
            res = cmd_generate(cfg, args.out)
        elif args.command == "run":
            res = cmd_run(cfg, args.input, args.out, truth_dir=args.truth)
        elif args.command == "bench":
            res = cmd_bench(cfg, args.out)
        else:
            res = cmd_diag(cfg, args.out, window=args.window)
    except ParameterError as exc:
        log.error("configuration error: %s", exc)
        return 2
    except DataError as exc:
        log.error("data error: %s", exc)
        return 3
    except NumericalError as exc:
        log.error("numerical error: %s", exc)
        return 4
    for path in res.paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
