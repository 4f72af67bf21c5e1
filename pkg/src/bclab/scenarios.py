"""End-to-end scenarios: hypothesis checks, conclusion certificates, reports.

A scenario is described by a flat ``key = value`` file.  ``run`` evaluates the
named hypothesis predicates first; only when all of them pass does it search
for the certificate required by the conclusion.  Reports are written as
``report.json`` (deterministic), ``report.txt`` (adds wall-clock time),
``certificates.csv`` and ``figure.svg``.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .annulus import box_inside, essential, fixed_point_in_fill, lift, puncture
from .errors import (CannotPuncture, ConfigError, IncompleteCertification, PointInSet,
                     PreconditionFailed)
from .fixedpoints import (CertificateList, FixedPointCertificate, annulus_domain, find_fixed_points,
                          rate_estimate)
from .maps import iterate, julia_dust, make_family, preimage_residual, image_residual
from .perturbation import NormalizedModel, PerturbationMap, build_V, verify_no_new_fixed
from .plane import BoxRect
from .region import CompactRegion, annulus_region, circle_region, fill, is_connected, separates
from .svg import Figure

SCENARIOS = ("theorem_a", "theorem_b", "theorem_c", "proposition_model", "annulus_rate")

PASS = "pass"
VIOLATED = "hypothesis_violated"
UNDECIDED = "undecided"
NO_CERTIFICATE = "no_certificate"

EXIT_CODES = {PASS: 0, VIOLATED: 1, UNDECIDED: 2, NO_CERTIFICATE: 2}


# configuration -------------------------------------------------------------------

def _complex(s: str) -> complex:
    return complex(s.replace(" ", "").replace("i", "j"))


def _frame(s: str) -> BoxRect:
    parts = s.replace(",", " ").split()
    if len(parts) != 4:
        raise ConfigError("frame needs four numbers: x_lo x_hi y_lo y_hi")
    x0, x1, y0, y1 = map(float, parts)
    if not (x0 < x1 and y0 < y1):
        raise ConfigError("frame must have x_lo < x_hi and y_lo < y_hi")
    return BoxRect(x0, x1, y0, y1)


# family parameters recognized in config files, with their parsers
FAMILY_KEYS = {"a": _complex, "d": int, "alpha": float, "scale": float, "exponent": float,
               "angle": float, "center": _complex, "shift": _complex, "inner": float, "outer": float}


@dataclass
class ScenarioConfig:
    scenario: str
    family: str = "quadratic"
    params: dict = field(default_factory=dict)
    K: str = "none"
    K_depth: int = 12
    K_center: complex = 0j
    K_radius: float = 1.0
    U: str = "none"
    U_width: float = 0.1
    frame: BoxRect = BoxRect(-2.0, 2.0, -2.0, 2.0)
    delta: float = 1e-2
    box_delta: float = 1e-6
    budget: int = 5_000_000
    seed: int = 0
    samples: int = 10_000
    N: int = 4
    exclusion: float = 0.1
    out: str | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; expected one of {', '.join(SCENARIOS)}")
        if not self.delta > 0 or not self.box_delta > 0:
            raise ConfigError("delta and box_delta must be positive")
        if self.budget < 1:
            raise ConfigError("budget must be >= 1")
        if self.N < 1 or self.K_depth < 1 or self.samples < 1:
            raise ConfigError("N, K_depth and samples must be >= 1")
        if self.K not in ("none", "julia_dust", "circle"):
            raise ConfigError(f"unknown K kind {self.K!r}")
        if self.U not in ("none", "annulus"):
            raise ConfigError(f"unknown U kind {self.U!r}")

    _PARSERS = {"scenario": str, "family": str, "K": str, "K_depth": int, "K_center": _complex,
                "K_radius": float, "U": str, "U_width": float, "frame": _frame, "delta": float,
                "box_delta": float, "budget": int, "seed": int, "samples": int, "N": int,
                "exclusion": float, "out": str}

    @classmethod
    def parse(cls, text: str) -> "ScenarioConfig":
        values: dict = {}
        params: dict = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            try:
                if key in cls._PARSERS:
                    values[key] = cls._PARSERS[key](value)
                elif key in FAMILY_KEYS:
                    params[key] = FAMILY_KEYS[key](value)
                else:
                    raise ConfigError(f"line {lineno}: unknown key {key!r}")
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad value for {key!r}: {value!r}") from exc
        if "scenario" not in values:
            raise ConfigError("missing required key 'scenario'")
        return cls(params=params, **values)

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        return cls.parse(path.read_text())

    def with_overrides(self, **kw) -> "ScenarioConfig":
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data.update({k: v for k, v in kw.items() if v is not None})
        return ScenarioConfig(**data)

    def make_map(self):
        p = dict(self.params)
        if "inner" in p:
            p["r_in"] = p.pop("inner")
        if "outer" in p:
            p["r_out"] = p.pop("outer")
        return make_family(self.family, **p)

    def as_dict(self) -> dict:
        """Normalized settings for the report (the output directory is left out)."""
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "out"}
        d["frame"] = [self.frame.x_lo, self.frame.x_hi, self.frame.y_lo, self.frame.y_hi]
        d["params"] = dict(sorted(self.params.items()))
        return _jsonable(d)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [_jsonable(float(x.real)), _jsonable(float(x.imag))]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


# report --------------------------------------------------------------------------

@dataclass
class HypothesisCheck:
    name: str
    passed: bool
    value: object = None
    tolerance: object = None


def _cert_dict(c: FixedPointCertificate) -> dict:
    b = c.box
    return {"box": [b.x_lo, b.x_hi, b.y_lo, b.y_hi], "index": c.index, "status": c.status,
            "margin": c.margin, "witness": c.witness}


@dataclass
class ScenarioReport:
    scenario: str
    config: dict
    hypotheses: list
    verdict: str
    reason: str = ""
    certificates: list = field(default_factory=list)
    conclusion: dict = field(default_factory=dict)
    search: CertificateList | None = None
    figure: Figure | None = None
    wall_clock: float = 0.0
    paths: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.verdict]

    def to_dict(self) -> dict:
        return _jsonable({
            "scenario": self.scenario,
            "verdict": self.verdict,
            "reason": self.reason,
            "exit_code": self.exit_code,
            "hypotheses": [asdict(h) for h in self.hypotheses],
            "certificates": [_cert_dict(c) for c in self.certificates],
            "conclusion": self.conclusion,
            "config": self.config,
            "files": ["report.json", "report.txt", "certificates.csv", "figure.svg"],
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        lines = [f"scenario: {self.scenario}", f"verdict:  {self.verdict}"]
        if self.reason:
            lines.append(f"reason:   {self.reason}")
        lines.append("")
        lines.append("hypotheses:")
        for h in self.hypotheses:
            mark = "PASS" if h.passed else "FAIL"
            tol = "" if h.tolerance is None else f" (tolerance {h.tolerance})"
            val = "" if h.value is None else f" value={h.value}"
            lines.append(f"  [{mark}] {h.name}{val}{tol}")
        if self.certificates:
            lines.append("")
            lines.append("certificates:")
            for c in self.certificates:
                b = c.box
                lines.append(f"  {c.status:15s} [{b.x_lo:.9f}, {b.x_hi:.9f}] x [{b.y_lo:.9f}, {b.y_hi:.9f}]"
                             f" index={c.index}" + (f" witness={c.witness}" if c.witness is not None else ""))
        if self.conclusion:
            lines.append("")
            lines.append("conclusion:")
            for k in sorted(self.conclusion):
                lines.append(f"  {k}: {self.conclusion[k]}")
        lines.append("")
        lines.append(f"wall-clock: {self.wall_clock:.3f} s")
        return "\n".join(lines) + "\n"

    def write(self, out) -> dict:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"json": out / "report.json", "text": out / "report.txt", "csv": out / "certificates.csv"}
        paths["json"].write_text(self.to_json())
        paths["text"].write_text(self.to_text())
        _write_certificates(self, paths["csv"])
        paths.update(emit_figures(self, out))
        self.paths = paths
        return paths


def _write_certificates(report: ScenarioReport, path: Path):
    if report.search is not None:
        report.search.to_csv(path, include_empty=False)
        return
    with path.open("w") as fh:
        fh.write("x_lo,x_hi,y_lo,y_hi,index,status,margin\n")
        for c in report.certificates:
            b = c.box
            fh.write(f"{b.x_lo!r},{b.x_hi!r},{b.y_lo!r},{b.y_hi!r},{c.index},{c.status},{float(c.margin)!r}\n")


def emit_figures(report: ScenarioReport, out) -> dict:
    """Write the scenario figure as ``figure.svg``."""
    path = Path(out) / "figure.svg"
    fig = report.figure or Figure(BoxRect(0, 1, 0, 1), title=report.scenario)
    fig.save(path)
    return {"figure": path}


# shared pieces -------------------------------------------------------------------

def _build_K(cfg: ScenarioConfig) -> CompactRegion | None:
    if cfg.K == "julia_dust":
        return julia_dust(cfg.params.get("a", 0j), cfg.K_depth, cfg.frame, cfg.delta, seed=cfg.seed)
    if cfg.K == "circle":
        return circle_region(cfg.K_center, cfg.K_radius, cfg.frame, cfg.delta)
    return None


def _separation_checks(K, c, fc) -> list:
    checks = [HypothesisCheck("c_not_in_K", not K.contains(c), _jsonable(c)),
              HypothesisCheck("fc_not_in_K", not K.contains(fc), _jsonable(fc))]
    try:
        sep = separates(K, c, fc)
    except PointInSet:
        sep = True
    checks.append(HypothesisCheck("c_fc_not_separated", not sep))
    return checks


def _base_figure(cfg: ScenarioConfig, title: str) -> Figure:
    return Figure(cfg.frame, title=title)


def _draw_certs(fig: Figure, certs, color="red"):
    for c in certs:
        fig.rect(c.box, stroke=color, width=1.5, min_px=6)


def _finish(cfg, hyps, fig, t0, verdict=None, reason="", certs=(), conclusion=None, search=None):
    if verdict is None:
        verdict = PASS if all(h.passed for h in hyps) else VIOLATED
    if verdict == VIOLATED and not reason:
        reason = "failed: " + ", ".join(h.name for h in hyps if not h.passed)
    return ScenarioReport(cfg.scenario, cfg.as_dict(), hyps, verdict, reason, list(certs), conclusion or {},
                          search, fig, time.perf_counter() - t0)


def _within(value: float, tol: float) -> bool:
    # grid distances are integer multiples of delta up to rounding
    return value <= tol * (1 + 1e-9)


def _violated(hyps) -> bool:
    return not all(h.passed for h in hyps)


# scenarios -----------------------------------------------------------------------

def _theorem_a(cfg: ScenarioConfig, t0: float) -> ScenarioReport:
    f = cfg.make_map()
    K = _build_K(cfg)
    if K is None:
        raise ConfigError("theorem_a needs K = julia_dust or K = circle")
    c, fc = f.critical_point, f.critical_value
    fig = _base_figure(cfg, "theorem_a")
    fig.mask(K)
    fig.cross(c, "blue")
    fig.cross(fc, "green")
    res = preimage_residual(f, K)
    hyps = [HypothesisCheck("degree_two", f.degree == 2, f.degree, 2),
            HypothesisCheck("totally_invariant", _within(res, 4 * cfg.delta), res, 4 * cfg.delta),
            *_separation_checks(K, c, fc)]
    if _violated(hyps):
        return _finish(cfg, hyps, fig, t0)
    search = find_fixed_points(f, cfg.frame, cfg.box_delta, budget=cfg.budget)
    _draw_certs(fig, search.fixed)
    for cert in search.fixed:
        fig.marker(cert.box.center, "red", 3)
    conclusion = {"region": "plane", "fixed_points": [cert.box.center for cert in search.fixed],
                  "undecided": len(search.undecided), "empty_boxes": search.empty_count,
                  "evaluations": search.evaluations}
    if search.undecided:
        verdict, reason = UNDECIDED, f"{len(search.undecided)} undecided boxes"
    elif not search.fixed:
        verdict, reason = NO_CERTIFICATE, "search complete without a fixed point"
    else:
        verdict, reason = PASS, ""
    return _finish(cfg, hyps, fig, t0, verdict, reason, search.fixed + search.undecided,
                   _jsonable(conclusion), search)


def _invariance_checks(f, K, delta) -> list:
    res = image_residual(f, K)
    return [HypothesisCheck("K_invariant", _within(res, 2 * delta), res, 2 * delta),
            HypothesisCheck("K_connected", is_connected(K))]


def _theorem_b(cfg: ScenarioConfig, t0: float) -> ScenarioReport:
    f = cfg.make_map()
    K = _build_K(cfg)
    if K is None or cfg.U != "annulus":
        raise ConfigError("theorem_b needs K = circle and U = annulus")
    U = annulus_region(cfg.K_center, cfg.K_radius - cfg.U_width, cfg.K_radius + cfg.U_width, cfg.frame, cfg.delta)
    c, fc = f.critical_point, f.critical_value
    fU = CompactRegion.from_points(f(U.points()), U.frame, U.delta)
    W = fill(U | fU)
    fig = _base_figure(cfg, "theorem_b")
    fig.mask(W, "#cfe3ff")
    fig.mask(U, "#7aa6e0")
    fig.mask(K)
    fig.cross(c, "blue")
    fig.cross(fc, "green")
    hyps = [_invariance_checks(f, K, cfg.delta)[0],
            HypothesisCheck("U_neighbourhood_of_K", bool(K.dilate(1) <= U)),
            HypothesisCheck("U_connected", is_connected(U)),
            HypothesisCheck("c_not_in_fill", not W.contains(c), _jsonable(c)),
            HypothesisCheck("fc_not_in_fill", not W.contains(fc), _jsonable(fc))]
    if _violated(hyps):
        return _finish(cfg, hyps, fig, t0)
    try:
        cert = fixed_point_in_fill(f, K, U, delta=cfg.box_delta, budget=cfg.budget, seed=cfg.seed)
    except IncompleteCertification as exc:
        return _finish(cfg, hyps, fig, t0, UNDECIDED, str(exc))
    except PreconditionFailed as exc:
        return _finish(cfg, hyps, fig, t0, NO_CERTIFICATE, str(exc))
    _draw_certs(fig, [cert])
    conclusion = {"region": "fill(U + f(U))", "inside_region": box_inside(cert.box, W),
                  "fixed_point": cert.box.center}
    return _finish(cfg, hyps, fig, t0, PASS, "", [cert], _jsonable(conclusion))


def _theorem_c(cfg: ScenarioConfig, t0: float) -> ScenarioReport:
    f = cfg.make_map()
    K = _build_K(cfg)
    if K is None:
        raise ConfigError("theorem_c needs K")
    c, fc = f.critical_point, f.critical_value
    F = fill(K)
    fig = _base_figure(cfg, "theorem_c")
    fig.mask(F, "#cfe3ff")
    fig.mask(K)
    fig.cross(c, "blue")
    fig.cross(fc, "green")
    hyps = _invariance_checks(f, K, cfg.delta) + _separation_checks(K, c, fc)
    if _violated(hyps):
        return _finish(cfg, hyps, fig, t0)
    box = F.bbox().expanded(cfg.delta)
    if not F.contains(c):
        # c in the unbounded component: search Fill(K) directly
        search = find_fixed_points(f, box, cfg.box_delta, budget=cfg.budget)
        inside = [cert for cert in search.fixed if box_inside(cert.box, F)]
        conclusion = {"case": "inessential", "region": "Fill(K)"}
    else:
        # c enclosed by K: puncture at c and work on the annulus
        try:
            g = puncture(f, c, seed=cfg.seed)
        except CannotPuncture as exc:
            return _finish(cfg, hyps, fig, t0, UNDECIDED, f"essential case needs a totally invariant fixed c: {exc}")
        hyps.append(HypothesisCheck("K_essential", essential(K, c)))
        if _violated(hyps):
            return _finish(cfg, hyps, fig, t0)
        fig.marker(c, "black", 3, "puncture")
        L = lift(g)
        r_in = cfg.exclusion * float(np.min(np.abs(K.points() - c)))
        search = find_fixed_points(f, box, cfg.box_delta, budget=cfg.budget,
                                   domain=annulus_domain(c, r_in))
        inside = [cert for cert in search.fixed if box_inside(cert.box, F) and abs(cert.box.center - c) >= r_in]
        on_K = [cert for cert in inside if K.contains(cert.box.center)]
        conclusion = {"case": "essential", "region": "Fill(K) minus puncture", "excluded_radius": r_in,
                      "in_K": len(on_K), "in_bounded_component": len(inside) - len(on_K),
                      "lift_deck_residual": L.deck_residual(500, seed=cfg.seed),
                      "lift_projection_residual": L.projection_residual(500, seed=cfg.seed)}
    _draw_certs(fig, inside)
    conclusion.update({"fixed_points": [cert.box.center for cert in inside],
                       "undecided": len(search.undecided), "evaluations": search.evaluations})
    if inside:
        verdict, reason = PASS, ""
    elif search.undecided:
        verdict, reason = UNDECIDED, f"{len(search.undecided)} undecided boxes"
    else:
        verdict, reason = NO_CERTIFICATE, "search complete without a fixed point in the region"
    return _finish(cfg, hyps, fig, t0, verdict, reason, inside + search.undecided, _jsonable(conclusion), search)


def _proposition_model(cfg: ScenarioConfig, t0: float) -> ScenarioReport:
    model = NormalizedModel(float(cfg.params.get("exponent", 1.0)))
    V = model.V
    frame = BoxRect(-0.5, 10.5, -1.5, 1.5)
    fig = Figure(frame, width=880, title="proposition_model")
    for b, color in ((model.U, "#bbbbbb"), (V, "black"), (model.U0, "blue"), (model.fU0, "green")):
        fig.rect(b, stroke=color)
    fig.polyline(model.gamma_prime.z, stroke="orange", width=2)
    h = PerturbationMap(model)
    xs, ys = np.meshgrid(np.linspace(0.25, 9.75, 39), np.linspace(-0.875, 0.875, 8))
    p = (xs + 1j * ys).ravel()
    for a, b in zip(p, h(p)):
        fig.arrow(a, b)

    hyps = [HypothesisCheck(f"model_{k}", v) for k, v in model.check(cfg.samples, cfg.seed).items()]
    support = build_V(model, delta=cfg.delta)
    hyps += [HypothesisCheck(f"support_{k}", v) for k, v in support.predicates.items()]
    base = find_fixed_points(model.f, V, cfg.box_delta, budget=cfg.budget)
    hyps.append(HypothesisCheck("f_fixed_free_on_V", base.complete and not base.fixed,
                                {"fixed": len(base.fixed), "undecided": len(base.undecided)}))
    if _violated(hyps):
        return _finish(cfg, hyps, fig, t0)

    rep = verify_no_new_fixed(model, delta=cfg.box_delta, samples=cfg.samples, seed=cfg.seed, budget=cfg.budget)
    _draw_certs(fig, rep.fixed_boxes)
    fig.marker(complex(model.c), "red", 2.5)
    conclusion = {"stages": {s.name: {"passed": s.passed, "detail": s.detail} for s in rep.stages},
                  "seams": rep.seams, "radial_factor_range": list(rep.h11_range)}
    g = puncture(h.perturbed(), complex(model.c), seed=cfg.seed)
    L = lift(g)
    conclusion["lift_deck_residual"] = L.deck_residual(500, seed=cfg.seed)
    conclusion["index_at_c"] = rep.fixed_boxes[0].index if rep.fixed_boxes else None
    if rep.passed:
        verdict, reason = PASS, ""
    elif rep.certificates is not None and not rep.certificates.complete:
        verdict, reason = UNDECIDED, rep.stage("search").detail
    else:
        verdict, reason = NO_CERTIFICATE, "; ".join(f"{s.name}: {s.detail}" for s in rep.stages if not s.passed)
    certs = list(rep.fixed_boxes) + (rep.certificates.undecided if rep.certificates is not None else [])
    return _finish(cfg, hyps, fig, t0, verdict, reason, certs, _jsonable(conclusion), rep.certificates)


def _annulus_rate(cfg: ScenarioConfig, t0: float) -> ScenarioReport:
    f = cfg.make_map()
    K = _build_K(cfg)
    c = f.critical_point
    fig = _base_figure(cfg, "annulus_rate")
    hyps = []
    if K is not None:
        fig.mask(K)
        res = preimage_residual(f, K)
        hyps += [HypothesisCheck("totally_invariant", _within(res, 4 * cfg.delta), res, 4 * cfg.delta),
                 HypothesisCheck("K_essential", essential(K, c))]
    try:
        puncture(f, c, seed=cfg.seed)
        hyps.append(HypothesisCheck("puncture_valid", True))
    except CannotPuncture as exc:
        hyps.append(HypothesisCheck("puncture_valid", False, str(exc)))
    fig.marker(c, "black", 3, "puncture")
    if _violated(hyps):
        return _finish(cfg, hyps, fig, t0)
    kw = dict(puncture=c, r_in=cfg.exclusion, budget=cfg.budget)
    try:
        series = rate_estimate(f, cfg.N, cfg.frame, cfg.box_delta, **kw)
    except IncompleteCertification as exc:
        return _finish(cfg, hyps, fig, t0, UNDECIDED, str(exc))
    d = f.degree
    bounds = {n: d ** n - 1 for n, _ in series.counts}
    ok = all(k >= bounds[n] for n, k in series.counts)
    search = find_fixed_points(iterate(f, cfg.N), cfg.frame, cfg.box_delta, budget=cfg.budget,
                               domain=annulus_domain(c, cfg.exclusion))
    _draw_certs(fig, search.fixed)
    conclusion = {"degree": d, "counts": [list(t) for t in series.counts],
                  "lower_bounds": [[n, b] for n, b in sorted(bounds.items())],
                  "estimates": [list(t) for t in series.estimates], "log_degree": math.log(d)}
    verdict = PASS if ok else NO_CERTIFICATE
    reason = "" if ok else "count below the lower bound"
    return _finish(cfg, hyps, fig, t0, verdict, reason, search.fixed, _jsonable(conclusion), search)


_RUNNERS = {"theorem_a": _theorem_a, "theorem_b": _theorem_b, "theorem_c": _theorem_c,
            "proposition_model": _proposition_model, "annulus_rate": _annulus_rate}


def run(config: ScenarioConfig) -> ScenarioReport:
    """Run one scenario; writes nothing (see :meth:`ScenarioReport.write`)."""
    t0 = time.perf_counter()
    return _RUNNERS[config.scenario](config, t0)
